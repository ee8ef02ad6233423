//! The tracking MDP: episode lifecycle, feature construction and the
//! log-det-covariance reward.
//!
//! Per target the state carries the belief mean in robot-frame polar
//! coordinates, the belief velocity as (speed, robot-frame direction), the
//! covariance log-determinant and a detection flag; the closest visible
//! obstacle point is appended at the end, giving `6N + 2` features.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::Vector4;
use rand::Rng;

use crate::filter::{ekf_update, kf_predict, FilterError, GaussianBelief, TargetModel};
use crate::geometry::{wrap_angle, Point};
use crate::world::{
    closest_obstacle, observe, step_robot, step_target, MotionPrimitive, ObstacleReading, Pose,
    SensorSpec, TargetState, WorldMap, DEFAULT_REFLECT_JITTER, LINEAR_SPEEDS, NUM_ACTIONS,
};

/// Placement attempts before [`EnvError::InitFailure`].
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

/// Features per target block.
pub const TARGET_FEATURES: usize = 6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("could not place {0} in free space after {MAX_PLACEMENT_ATTEMPTS} attempts")]
    InitFailure(&'static str),
    #[error("episode already finished; call reset")]
    EpisodeFinished,
    #[error("no episode in progress; call reset")]
    NotStarted,
    #[error("action index {0} out of range")]
    InvalidAction(usize),
    #[error("invalid environment config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

/// Weights of the uncertainty, dispersion and obstacle-proximity terms.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RewardWeights {
    pub kappa_m: f64,
    pub kappa_d: f64,
    pub kappa_o: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            kappa_m: 0.2,
            kappa_d: 0.1,
            kappa_o: 1.0,
        }
    }
}

/// Initial-condition sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InitSpec {
    /// Targets start uniformly in a disc of this radius around the robot.
    pub target_max_offset: f64,
    /// Belief means start uniformly in a disc of this radius around their target.
    pub belief_max_offset: f64,
    /// Initial covariance is this times the identity.
    pub init_variance: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            target_max_offset: 8.0,
            belief_max_offset: 5.0,
            init_variance: 30.0,
        }
    }
}

/// Divisors of the optional feature scaling: ranges by `max_range`, angles by
/// π, speeds by the top linear speed, log-determinants by 50.
pub const LOG_DET_SCALE: f64 = 50.0;

/// Scaled features are clamped to `±FEATURE_CLAMP`. A diverged belief can put
/// its mean hundreds of metres away; past a few sensor ranges the exact
/// distance carries nothing useful for the policy.
pub const FEATURE_CLAMP: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvConfig {
    pub map: WorldMap,
    pub n_targets: usize,
    /// Episode length in steps.
    pub horizon: usize,
    pub tau: f64,
    pub q: f64,
    pub sensor: SensorSpec,
    pub weights: RewardWeights,
    pub init: InitSpec,
    /// Reflection jitter std as a fraction of target speed.
    pub reflect_jitter: f64,
    pub normalize_features: bool,
}

impl EnvConfig {
    /// One target, `q = 0.01`, 100 steps.
    pub fn single_target(map: WorldMap) -> Self {
        Self {
            map,
            n_targets: 1,
            horizon: 100,
            tau: 0.5,
            q: 0.01,
            sensor: SensorSpec::default(),
            weights: RewardWeights::default(),
            init: InitSpec::default(),
            reflect_jitter: DEFAULT_REFLECT_JITTER,
            normalize_features: false,
        }
    }

    /// `n` targets, `q = 0.001`, 150 steps.
    pub fn multi_target(map: WorldMap, n: usize) -> Self {
        Self {
            n_targets: n,
            horizon: 150,
            q: 0.001,
            ..Self::single_target(map)
        }
    }

    pub fn feature_dim(&self) -> usize {
        TARGET_FEATURES * self.n_targets + 2
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.n_targets == 0 {
            return Err(EnvError::Config("n_targets must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(EnvError::Config("horizon must be positive"));
        }
        if !(self.tau > 0.0) {
            return Err(EnvError::Config("tau must be positive"));
        }
        if !(self.q >= 0.0) {
            return Err(EnvError::Config("q must be non-negative"));
        }
        let w = &self.weights;
        if !(w.kappa_m >= 0.0 && w.kappa_d >= 0.0 && w.kappa_o >= 0.0) {
            return Err(EnvError::Config("reward weights must be non-negative"));
        }
        if !(self.init.init_variance > 0.0
            && self.init.target_max_offset >= 0.0
            && self.init.belief_max_offset >= 0.0)
        {
            return Err(EnvError::Config("invalid initial-condition parameters"));
        }
        if !(self.reflect_jitter >= 0.0) {
            return Err(EnvError::Config("reflect_jitter must be non-negative"));
        }
        self.sensor
            .validate()
            .map_err(|_| EnvError::Config("invalid sensor spec"))
    }

    pub fn target_model(&self) -> TargetModel {
        TargetModel::new(self.tau, self.q)
    }
}

/// The MDP state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Build the state vector from the robot pose and the current beliefs.
pub fn featurize(
    pose: &Pose,
    beliefs: &[GaussianBelief],
    observed: &[bool],
    obstacle: &ObstacleReading,
    sensor: &SensorSpec,
    normalize: bool,
) -> Result<FeatureVector, FilterError> {
    debug_assert_eq!(beliefs.len(), observed.len());
    let (range_scale, angle_scale, speed_scale, logdet_scale) = if normalize {
        (sensor.max_range, PI, LINEAR_SPEEDS[LINEAR_SPEEDS.len() - 1], LOG_DET_SCALE)
    } else {
        (1.0, 1.0, 1.0, 1.0)
    };
    let mut out = Vec::with_capacity(TARGET_FEATURES * beliefs.len() + 2);
    for (b, &seen) in beliefs.iter().zip(observed) {
        let (r, theta) = pose.polar_of(b.position());
        let (vx, vy) = (b.mean[2], b.mean[3]);
        let speed = libm::hypot(vx, vy);
        let heading = wrap_angle(libm::atan2(vy, vx) - pose.theta);
        out.extend_from_slice(&[
            r / range_scale,
            theta / angle_scale,
            speed / speed_scale,
            heading / angle_scale,
            b.log_det()? / logdet_scale,
            if seen { 1.0 } else { 0.0 },
        ]);
    }
    out.push(obstacle.range / range_scale);
    out.push(obstacle.bearing / angle_scale);
    if normalize {
        for v in out.iter_mut() {
            *v = v.clamp(-FEATURE_CLAMP, FEATURE_CLAMP);
        }
    }
    Ok(FeatureVector(out))
}

/// Population standard deviation.
fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    libm::sqrt(xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n)
}

/// Reward from per-target log-determinants of the posterior covariances.
/// The obstacle term only applies when an obstacle is in view.
pub fn reward_from_log_dets(log_dets: &[f64], obstacle: &ObstacleReading, w: &RewardWeights) -> f64 {
    let total: f64 = log_dets.iter().sum();
    let mut r = -w.kappa_m * total - w.kappa_d * std_dev(log_dets);
    if obstacle.detected {
        r -= w.kappa_o / (obstacle.range * obstacle.range);
    }
    r
}

/// Reward on the posterior beliefs after a step.
pub fn reward(
    beliefs: &[GaussianBelief],
    obstacle: &ObstacleReading,
    w: &RewardWeights,
) -> Result<f64, FilterError> {
    let log_dets = beliefs
        .iter()
        .map(GaussianBelief::log_det)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(reward_from_log_dets(&log_dets, obstacle, w))
}

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub features: FeatureVector,
    pub reward: f64,
    pub done: bool,
    /// Posterior log-determinant per target.
    pub log_dets: Vec<f64>,
    /// Whether each target was detected this step.
    pub observed: Vec<bool>,
}

/// One tracking episode at a time over a fixed configuration.
#[derive(Debug, Clone)]
pub struct TrackingEnv {
    cfg: EnvConfig,
    model: TargetModel,
    pose: Pose,
    targets: Vec<TargetState>,
    beliefs: Vec<GaussianBelief>,
    observed: Vec<bool>,
    obstacle: ObstacleReading,
    t: usize,
    started: bool,
    suppress_detection: bool,
}

fn sample_in_disc<R: Rng + ?Sized>(center: Point, radius: f64, rng: &mut R) -> Point {
    let r = radius * libm::sqrt(rng.random::<f64>());
    let phi = 2.0 * PI * rng.random::<f64>();
    Point::new(center.x + r * libm::cos(phi), center.y + r * libm::sin(phi))
}

impl TrackingEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let model = cfg.target_model();
        let obstacle = ObstacleReading::none(&cfg.sensor);
        Ok(Self {
            cfg,
            model,
            pose: Pose::default(),
            targets: Vec::new(),
            beliefs: Vec::new(),
            observed: Vec::new(),
            obstacle,
            t: 0,
            started: false,
            suppress_detection: false,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn model(&self) -> &TargetModel {
        &self.model
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn targets(&self) -> &[TargetState] {
        &self.targets
    }

    pub fn beliefs(&self) -> &[GaussianBelief] {
        &self.beliefs
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn obstacle(&self) -> &ObstacleReading {
        &self.obstacle
    }

    /// Steps taken in the current episode.
    pub fn time(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.started && self.t >= self.cfg.horizon
    }

    /// Treat every target as undetected (counterfactual replays).
    pub fn set_detection_suppressed(&mut self, suppressed: bool) {
        self.suppress_detection = suppressed;
    }

    /// Start a new episode with random robot, target and belief placement.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<FeatureVector, EnvError> {
        let map = &self.cfg.map;
        let b = *map.bounds();

        let robot = (0..MAX_PLACEMENT_ATTEMPTS)
            .map(|_| {
                Point::new(
                    b.min.x + b.width() * rng.random::<f64>(),
                    b.min.y + b.height() * rng.random::<f64>(),
                )
            })
            .find(|p| map.is_free(*p))
            .ok_or(EnvError::InitFailure("robot"))?;
        let heading = PI - 2.0 * PI * rng.random::<f64>();
        self.pose = Pose::new(robot.x, robot.y, heading);

        let init = self.cfg.init;
        self.targets.clear();
        self.beliefs.clear();
        for _ in 0..self.cfg.n_targets {
            let p = (0..MAX_PLACEMENT_ATTEMPTS)
                .map(|_| sample_in_disc(robot, init.target_max_offset, rng))
                .find(|p| map.is_free(*p))
                .ok_or(EnvError::InitFailure("target"))?;
            self.targets.push(TargetState::new(p.x, p.y, 0.0, 0.0));
        }
        for y in &self.targets {
            let m = sample_in_disc(y.position(), init.belief_max_offset, rng);
            self.beliefs.push(GaussianBelief::isotropic(
                Vector4::new(m.x, m.y, 0.0, 0.0),
                init.init_variance,
            ));
        }
        self.observed = alloc::vec![false; self.cfg.n_targets];
        self.obstacle = closest_obstacle(&self.pose, &self.cfg.sensor, map);
        self.t = 0;
        self.started = true;
        self.features().map_err(EnvError::from)
    }

    /// Current state vector.
    pub fn features(&self) -> Result<FeatureVector, FilterError> {
        featurize(
            &self.pose,
            &self.beliefs,
            &self.observed,
            &self.obstacle,
            &self.cfg.sensor,
            self.cfg.normalize_features,
        )
    }

    /// Apply one motion primitive: move the robot, move the targets, sense,
    /// filter, and score the posterior beliefs.
    pub fn step<R: Rng + ?Sized>(&mut self, action: usize, rng: &mut R) -> Result<Step, EnvError> {
        if !self.started {
            return Err(EnvError::NotStarted);
        }
        if self.is_done() {
            return Err(EnvError::EpisodeFinished);
        }
        let primitive = MotionPrimitive::from_index(action).ok_or(EnvError::InvalidAction(action))?;
        let cfg = &self.cfg;

        self.pose = step_robot(self.pose, primitive, cfg.tau, &cfg.map);
        for y in self.targets.iter_mut() {
            *y = step_target(y, &cfg.map, &self.model, cfg.reflect_jitter, rng);
        }

        let mut log_dets = Vec::with_capacity(cfg.n_targets);
        for (i, (y, b)) in self.targets.iter().zip(self.beliefs.iter_mut()).enumerate() {
            let z = if self.suppress_detection {
                crate::world::Measurement {
                    target_id: i,
                    reading: None,
                }
            } else {
                observe(&self.pose, i, y, &cfg.sensor, &cfg.map, rng)
            };
            let predicted = kf_predict(b, &self.model);
            *b = match ekf_update(&predicted, &z, &self.pose, &cfg.sensor) {
                Ok(post) => post,
                // Robot on top of the belief mean: keep the prediction.
                Err(FilterError::DegenerateRange) => predicted,
                Err(e) => return Err(e.into()),
            };
            self.observed[i] = z.detected();
            log_dets.push(b.log_det()?);
        }

        self.obstacle = closest_obstacle(&self.pose, &cfg.sensor, &cfg.map);
        let reward = reward_from_log_dets(&log_dets, &self.obstacle, &cfg.weights);
        self.t += 1;
        Ok(Step {
            features: self.features()?,
            reward,
            done: self.t >= self.cfg.horizon,
            log_dets,
            observed: self.observed.clone(),
        })
    }

    pub fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn belief_at(x: f64, y: f64) -> GaussianBelief {
        GaussianBelief::isotropic(Vector4::new(x, y, 0.0, 0.0), 30.0)
    }

    #[test]
    fn feature_lengths() {
        for (n, len) in [(1, 8), (3, 20)] {
            let cfg = EnvConfig::multi_target(WorldMap::builtin("empty-100").unwrap(), n);
            assert_eq!(cfg.feature_dim(), len);
            let mut env = TrackingEnv::new(cfg).unwrap();
            let f = env.reset(&mut seeded(3)).unwrap();
            assert_eq!(f.len(), len);
        }
    }

    #[test]
    fn polar_features() {
        let spec = SensorSpec::default();
        let none = ObstacleReading::none(&spec);
        let f = featurize(&Pose::new(0.0, 0.0, 0.0), &[belief_at(3.0, 4.0)], &[true], &none, &spec, false).unwrap();
        let s = f.as_slice();
        assert!((s[0] - 5.0).abs() < 1e-12);
        assert!((s[1] - 0.9272952).abs() < 5e-8);
        assert_eq!(s[5], 1.0);
        assert_eq!(&s[6..], &[10.0, PI]);

        let f = featurize(
            &Pose::new(0.0, 0.0, core::f64::consts::FRAC_PI_2),
            &[belief_at(0.0, 5.0)],
            &[false],
            &none,
            &spec,
            false,
        )
        .unwrap();
        assert!((f.as_slice()[0] - 5.0).abs() < 1e-12);
        assert!(f.as_slice()[1].abs() < 1e-12);
        assert_eq!(f.as_slice()[5], 0.0);
    }

    #[test]
    fn normalized_features() {
        let spec = SensorSpec::default();
        let none = ObstacleReading::none(&spec);
        let f = featurize(&Pose::new(0.0, 0.0, 0.0), &[belief_at(3.0, 4.0)], &[true], &none, &spec, true).unwrap();
        let s = f.as_slice();
        assert!((s[0] - 0.5).abs() < 1e-12);
        assert!((s[1] - 0.9272952 / PI).abs() < 5e-8);
        assert!((s[4] - 4.0 * libm::log(30.0) / 50.0).abs() < 1e-12);
        assert_eq!(&s[6..], &[1.0, 1.0]);

        let far = GaussianBelief::isotropic(Vector4::new(600.0, 0.0, 9.0, 0.0), 30.0);
        let f = featurize(&Pose::new(0.0, 0.0, 0.0), &[far], &[false], &none, &spec, true).unwrap();
        assert_eq!(f.as_slice()[0], FEATURE_CLAMP);
        assert_eq!(f.as_slice()[2], 3.0);
    }

    #[test]
    fn reward_examples() {
        let w = RewardWeights {
            kappa_m: 1.0,
            kappa_d: 1.0,
            kappa_o: 1.0,
        };
        let spec = SensorSpec::default();
        let none = ObstacleReading::none(&spec);
        let r = reward(&[belief_at(0.0, 0.0)], &none, &w).unwrap();
        assert!((r + 4.0 * libm::log(30.0)).abs() < 1e-12);

        let r2 = reward(&[belief_at(0.0, 0.0), belief_at(1.0, 1.0)], &none, &w).unwrap();
        assert!((r2 + 8.0 * libm::log(30.0)).abs() < 1e-12);

        let near = ObstacleReading {
            range: 2.0,
            bearing: 0.0,
            detected: true,
        };
        let r3 = reward(&[belief_at(0.0, 0.0)], &near, &w).unwrap();
        assert!((r3 - (r - 0.25)).abs() < 1e-12);

        // Dispersion uses the population standard deviation.
        let rd = reward_from_log_dets(&[1.0, 3.0], &none, &w);
        assert!((rd - (-4.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn step_errors() {
        let mut env = TrackingEnv::new(EnvConfig::single_target(WorldMap::builtin("empty-100").unwrap())).unwrap();
        let mut rng = seeded(1);
        assert_eq!(env.step(0, &mut rng).unwrap_err(), EnvError::NotStarted);
        env.reset(&mut rng).unwrap();
        assert_eq!(env.step(12, &mut rng).unwrap_err(), EnvError::InvalidAction(12));
        let mut steps = 0;
        loop {
            steps += 1;
            if env.step(3, &mut rng).unwrap().done {
                break;
            }
        }
        assert_eq!(steps, 100);
        assert_eq!(env.step(0, &mut rng).unwrap_err(), EnvError::EpisodeFinished);
    }

    #[test]
    fn config_validation() {
        let mut cfg = EnvConfig::single_target(WorldMap::empty(50.0));
        cfg.n_targets = 0;
        assert!(matches!(cfg.validate(), Err(EnvError::Config(_))));
        let mut cfg = EnvConfig::single_target(WorldMap::empty(50.0));
        cfg.weights.kappa_d = -1.0;
        assert!(TrackingEnv::new(cfg).is_err());
    }

    #[test]
    fn init_failure_when_no_free_space() {
        let blocked = WorldMap::new(
            crate::geometry::Rect::new(0.0, 0.0, 10.0, 10.0),
            alloc::vec![crate::geometry::Rect::new(1e-9, 1e-9, 10.0 - 1e-9, 10.0 - 1e-9)],
        )
        .unwrap();
        let mut env = TrackingEnv::new(EnvConfig::single_target(blocked)).unwrap();
        assert_eq!(env.reset(&mut seeded(0)).unwrap_err(), EnvError::InitFailure("robot"));
    }
}
