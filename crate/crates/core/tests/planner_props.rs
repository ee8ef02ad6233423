mod oracles;

use std::time::Instant;

use activetrack_core::filter::{GaussianBelief, TargetModel};
use activetrack_core::planner::{plan, propagate_beliefs, random_policy, PlannerConfig};
use activetrack_core::rng::seeded;
use activetrack_core::world::{step_robot, MotionPrimitive, Pose, SensorSpec, WorldMap, NUM_ACTIONS};
use nalgebra::Vector4;
use oracles::{exhaustive_plan, random_scene};
use rand::Rng;

fn unpruned(horizon: usize) -> PlannerConfig {
    PlannerConfig {
        horizon,
        prune_eps: f64::INFINITY,
        ..PlannerConfig::default()
    }
}

fn check_against_oracle(horizon: usize, scenes: usize, seed: u64) {
    let spec = SensorSpec::default();
    let model = TargetModel::new(0.5, 0.01);
    let maps = [WorldMap::builtin("empty-50").unwrap(), WorldMap::builtin("obstacle-30").unwrap()];
    let mut rng = seeded(seed);
    let cfg = unpruned(horizon);
    for k in 0..scenes {
        let map = &maps[k % 2];
        let n = 1 + k % 3;
        let (pose, beliefs) = random_scene(&mut rng, map, n);
        let got = plan(&pose, &beliefs, map, &spec, &model, &cfg);
        let want = exhaustive_plan(&pose, &beliefs, map, &spec, &model, &cfg);
        assert_eq!(got, want, "scene {k}, horizon {horizon}");
    }
}

#[test]
fn matches_exhaustive_search_depth_1() {
    check_against_oracle(1, 100, 71);
}

#[test]
fn matches_exhaustive_search_depth_2() {
    check_against_oracle(2, 100, 72);
}

#[test]
fn matches_exhaustive_search_depth_3() {
    check_against_oracle(3, 100, 73);
}

/// Whether some target is visible from the pose reached by `action`.
fn keeps_sight(pose: &Pose, b: &GaussianBelief, action: usize, map: &WorldMap, spec: &SensorSpec, model: &TargetModel) -> bool {
    let next = step_robot(*pose, MotionPrimitive::from_index(action).unwrap(), model.tau(), map);
    let pred = activetrack_core::filter::kf_predict(b, model);
    spec.can_see(&next, pred.position(), map)
}

#[test]
fn never_gives_up_a_visible_target() {
    let spec = SensorSpec::default();
    let model = TargetModel::new(0.5, 0.01);
    let map = WorldMap::builtin("empty-50").unwrap();
    let mut rng = seeded(74);
    let mut checked = 0;
    for _ in 0..500 {
        let pose = Pose::new(rng.random_range(12.0..38.0), rng.random_range(12.0..38.0), rng.random_range(-3.1..3.1));
        let r = rng.random_range(1.0..9.0);
        let phi = pose.theta + rng.random_range(-1.2..1.2);
        let b = GaussianBelief::isotropic(Vector4::new(pose.x + r * f64::cos(phi), pose.y + r * f64::sin(phi), 0.0, 0.0), 30.0);
        if !(0..NUM_ACTIONS).any(|a| keeps_sight(&pose, &b, a, &map, &spec, &model)) {
            continue;
        }
        checked += 1;
        let a = plan(&pose, &[b], &map, &spec, &model, &unpruned(1));
        assert!(keeps_sight(&pose, &b, a, &map, &spec, &model), "action {a} loses the target");
    }
    assert!(checked > 400);
}

#[test]
fn unseen_targets_tie_to_action_zero() {
    let spec = SensorSpec::default();
    let model = TargetModel::new(0.5, 0.01);
    let map = WorldMap::builtin("empty-50").unwrap();
    let pose = Pose::new(25.0, 25.0, 0.0);
    let b = GaussianBelief::isotropic(Vector4::new(2.0, 2.0, 0.0, 0.0), 30.0);
    let (_, predicted_only) = propagate_beliefs(&pose, &[b], &map, &spec, &model).unwrap();
    for a in 0..NUM_ACTIONS {
        let next = step_robot(pose, MotionPrimitive::from_index(a).unwrap(), 0.5, &map);
        let (_, ld) = propagate_beliefs(&next, &[b], &map, &spec, &model).unwrap();
        assert_eq!(ld, predicted_only);
    }
    assert_eq!(plan(&pose, &[b], &map, &spec, &model, &unpruned(1)), 0);
}

#[test]
fn depth_three_three_targets_is_fast() {
    let spec = SensorSpec::default();
    let model = TargetModel::new(0.5, 0.01);
    let map = WorldMap::builtin("obstacle-30").unwrap();
    let mut rng = seeded(75);
    let cfg = PlannerConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (pose, beliefs) = random_scene(&mut rng, &map, 3);
        let t = Instant::now();
        let a = plan(&pose, &beliefs, &map, &spec, &model, &cfg);
        worst = worst.max(t.elapsed().as_secs_f64());
        assert!(a < NUM_ACTIONS);
    }
    assert!(worst < 0.05, "slowest call {worst:.4} s");
}

#[test]
fn random_policy_is_uniform_and_seeded() {
    let mut rng = seeded(76);
    let mut counts = [0u64; NUM_ACTIONS];
    let n = 100_000u64;
    for _ in 0..n {
        counts[random_policy(&mut rng)] += 1;
    }
    let p = 1.0 / NUM_ACTIONS as f64;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sd);
    }
    let a: Vec<usize> = (0..50).map({
        let mut r = seeded(5);
        move |_| random_policy(&mut r)
    }).collect();
    let b: Vec<usize> = (0..50).map({
        let mut r = seeded(5);
        move |_| random_policy(&mut r)
    }).collect();
    assert_eq!(a, b);
}
