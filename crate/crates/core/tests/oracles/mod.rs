//! Reference implementations the library is checked against. They are coded
//! from the textbook formulas on plain arrays and share no numerics with the
//! crate beyond the scene primitives the planner oracle composes.
#![allow(dead_code)]

use activetrack_core::env::reward_from_log_dets;
use activetrack_core::filter::{ekf_covariance_update, kf_predict, FilterError, GaussianBelief, TargetModel};
use activetrack_core::nn::{Gradients, Mlp};
use activetrack_core::planner::PlannerConfig;
use activetrack_core::world::{closest_obstacle, step_robot, MotionPrimitive, Pose, SensorSpec, WorldMap, NUM_ACTIONS};
use nalgebra::{Matrix4, Vector4};
use rand::Rng;

pub type M4 = [[f64; 4]; 4];

pub fn mat_mul<const A: usize, const B: usize, const C: usize>(x: &[[f64; B]; A], y: &[[f64; C]; B]) -> [[f64; C]; A] {
    let mut out = [[0.0; C]; A];
    for i in 0..A {
        for j in 0..C {
            for k in 0..B {
                out[i][j] += x[i][k] * y[k][j];
            }
        }
    }
    out
}

pub fn transpose<const A: usize, const B: usize>(x: &[[f64; B]; A]) -> [[f64; A]; B] {
    let mut out = [[0.0; A]; B];
    for i in 0..A {
        for j in 0..B {
            out[j][i] = x[i][j];
        }
    }
    out
}

pub fn to_array(m: &Matrix4<f64>) -> M4 {
    let mut out = [[0.0; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    out
}

pub fn to_matrix(a: &M4) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| a[i][j])
}

/// `L Lᵀ + floor·I` with `L` lower triangular, entries uniform in ±scale.
pub fn random_spd<R: Rng>(rng: &mut R, scale: f64, floor: f64) -> Matrix4<f64> {
    let mut l = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..=i {
            l[(i, j)] = rng.random_range(-scale..scale);
        }
    }
    l * l.transpose() + Matrix4::identity() * floor
}

fn wrap(a: f64) -> f64 {
    let mut a = a % (2.0 * std::f64::consts::PI);
    if a <= -std::f64::consts::PI {
        a += 2.0 * std::f64::consts::PI;
    } else if a > std::f64::consts::PI {
        a -= 2.0 * std::f64::consts::PI;
    }
    a
}

/// Textbook EKF update with the simple `(I − KH)P` covariance form.
pub fn textbook_update(mean: [f64; 4], cov: M4, robot: (f64, f64, f64), z: (f64, f64), sigma: (f64, f64)) -> ([f64; 4], M4) {
    let (dx, dy) = (mean[0] - robot.0, mean[1] - robot.1);
    let q = dx * dx + dy * dy;
    let r = q.sqrt();
    let h = [[dx / r, dy / r, 0.0, 0.0], [-dy / q, dx / q, 0.0, 0.0]];
    let pred = (r, wrap(dy.atan2(dx) - robot.2));
    let ht = transpose(&h);
    let pht = mat_mul(&cov, &ht);
    let mut s = mat_mul(&h, &pht);
    s[0][0] += sigma.0 * sigma.0;
    s[1][1] += sigma.1 * sigma.1;
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let s_inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
    let k = mat_mul(&pht, &s_inv);
    let nu = [z.0 - pred.0, wrap(z.1 - pred.1)];
    let mut new_mean = mean;
    for i in 0..4 {
        new_mean[i] += k[i][0] * nu[0] + k[i][1] * nu[1];
    }
    let kh = mat_mul(&k, &h);
    let mut ikh = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            ikh[i][j] = if i == j { 1.0 } else { 0.0 } - kh[i][j];
        }
    }
    (new_mean, mat_mul(&ikh, &cov))
}

/// Symmetric eigenvalues by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(m: &M4) -> [f64; 4] {
    let mut a = *m;
    for _ in 0..100 {
        let off: f64 = (0..4)
            .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..4 {
            for q in p + 1..4 {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..4 {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..4 {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    [a[0][0], a[1][1], a[2][2], a[3][3]]
}

/// Deterministic 4-state chain: action 0 steps left (clamped at state 0),
/// action 1 steps right. Stepping right from state 3 pays 1 and ends the
/// episode; every other move pays 0.
pub fn chain_step(s: usize, a: usize) -> (usize, f64, bool) {
    match (s, a) {
        (3, 1) => (3, 1.0, true),
        (s, 1) => (s + 1, 0.0, false),
        (s, _) => (s.saturating_sub(1), 0.0, false),
    }
}

pub fn one_hot(s: usize) -> Vec<f64> {
    let mut v = vec![0.0; 4];
    v[s] = 1.0;
    v
}

/// Q* of the chain by repeated Bellman backups.
pub fn chain_value_iteration(gamma: f64, sweeps: usize) -> [[f64; 2]; 4] {
    let mut q = [[0.0; 2]; 4];
    for _ in 0..sweeps {
        let mut next = q;
        for (s, row) in next.iter_mut().enumerate() {
            for (a, v) in row.iter_mut().enumerate() {
                let (s2, r, done) = chain_step(s, a);
                *v = if done { r } else { r + gamma * q[s2][0].max(q[s2][1]) };
            }
        }
        q = next;
    }
    q
}

/// Largest relative error between backprop and central differences over
/// every parameter; magnitudes below `floor` count as `floor`.
pub fn gradient_check(net: &Mlp, xs: &[f64], actions: &[usize], targets: &[f64], h: f64, floor: f64) -> f64 {
    let mut grads = Gradients::zeros_like(net);
    net.selected_mse_grad(xs, actions, targets, &mut grads).unwrap();
    let loss = |n: &Mlp| n.selected_mse(xs, actions, targets).unwrap();
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for (li, (gw, gb)) in grads.layers.iter().enumerate() {
        for (which, analytic) in [(0, gw), (1, gb)] {
            for (i, &g) in analytic.iter().enumerate() {
                let orig = {
                    let l = &probe.layers()[li];
                    if which == 0 { l.weights[i] } else { l.bias[i] }
                };
                let set = |n: &mut Mlp, v: f64| {
                    let l = &mut n.layers_mut()[li];
                    if which == 0 {
                        l.weights[i] = v;
                    } else {
                        l.bias[i] = v;
                    }
                };
                set(&mut probe, orig + h);
                let up = loss(&probe);
                set(&mut probe, orig - h);
                let down = loss(&probe);
                set(&mut probe, orig);
                let numeric = (up - down) / (2.0 * h);
                let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(floor);
                worst = worst.max(rel);
            }
        }
    }
    worst
}

/// Exhaustive search over all `12^h` action sequences, scoring each node
/// exactly as the tree search does. Sequences are visited in lexicographic
/// order and only a strictly better score replaces the incumbent.
pub fn exhaustive_plan(
    pose: &Pose,
    beliefs: &[GaussianBelief],
    map: &WorldMap,
    spec: &SensorSpec,
    model: &TargetModel,
    cfg: &PlannerConfig,
) -> usize {
    struct Best {
        score: f64,
        action: usize,
    }

    fn node_reward(pose: &Pose, beliefs: &[GaussianBelief], map: &WorldMap, spec: &SensorSpec, model: &TargetModel, cfg: &PlannerConfig) -> Option<(Vec<GaussianBelief>, f64)> {
        let mut next = Vec::new();
        let mut log_dets = Vec::new();
        for b in beliefs {
            let mut p = kf_predict(b, model);
            if spec.can_see(pose, p.position(), map) {
                match ekf_covariance_update(&p, pose, spec) {
                    Ok(u) => p = u,
                    Err(FilterError::DegenerateRange) => {}
                    Err(_) => return None,
                }
            }
            log_dets.push(p.log_det().ok()?);
            next.push(p);
        }
        let r = reward_from_log_dets(&log_dets, &closest_obstacle(pose, spec, map), &cfg.weights);
        Some((next, r))
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(
        pose: Pose,
        beliefs: &[GaussianBelief],
        depth: usize,
        score: f64,
        discount: f64,
        first: usize,
        ctx: (&WorldMap, &SensorSpec, &TargetModel, &PlannerConfig),
        best: &mut Option<Best>,
    ) {
        let (map, spec, model, cfg) = ctx;
        if depth == cfg.horizon {
            if best.as_ref().is_none_or(|b| score > b.score) {
                *best = Some(Best { score, action: first });
            }
            return;
        }
        for a in 0..NUM_ACTIONS {
            let next_pose = step_robot(pose, MotionPrimitive::from_index(a).unwrap(), model.tau(), map);
            let Some((next, r)) = node_reward(&next_pose, beliefs, map, spec, model, cfg) else {
                continue;
            };
            let s = score + discount * r;
            if !s.is_finite() {
                continue;
            }
            let f = if depth == 0 { a } else { first };
            walk(next_pose, &next, depth + 1, s, discount * cfg.gamma, f, ctx, best);
        }
    }

    let mut best = None;
    walk(*pose, beliefs, 0, 0.0, 1.0, 0, (map, spec, model, cfg), &mut best);
    best.map_or(0, |b| b.action)
}

/// A random planning scene: a free robot pose on `map` and `n` beliefs
/// within 12 m of the robot with random SPD covariances.
pub fn random_scene<R: Rng>(rng: &mut R, map: &WorldMap, n: usize) -> (Pose, Vec<GaussianBelief>) {
    let b = *map.bounds();
    let pose = loop {
        let p = Pose::new(
            rng.random_range(b.min.x..b.max.x),
            rng.random_range(b.min.y..b.max.y),
            rng.random_range(-3.14..3.14),
        );
        if map.is_free(p.position()) {
            break p;
        }
    };
    let beliefs = (0..n)
        .map(|_| {
            let r = rng.random_range(0.5..12.0);
            let phi: f64 = rng.random_range(-3.14..3.14);
            let mean = Vector4::new(
                pose.x + r * phi.cos(),
                pose.y + r * phi.sin(),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            GaussianBelief::new(mean, random_spd(rng, 2.0, 0.5))
        })
        .collect();
    (pose, beliefs)
}
