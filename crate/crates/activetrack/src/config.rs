use std::path::{Path, PathBuf};

use activetrack_core::agent::{DqnConfig, EpsilonSchedule, TdMode};
use activetrack_core::env::{EnvConfig, InitSpec, RewardWeights};
use activetrack_core::geometry::Rect;
use activetrack_core::planner::PlannerConfig;
use activetrack_core::world::{SensorSpec, WorldMap, DEFAULT_REFLECT_JITTER};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "ACTIVETRACK_OUT";

/// Output root: `$ACTIVETRACK_OUT`, or `runs` under the working directory.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Everything that determines a training run. The output location is not
/// part of it, so the same config hashes the same wherever it is written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// A built-in map name or the path of a map file.
    pub map: String,
    pub n_targets: usize,
    pub horizon: usize,
    pub tau: f64,
    pub q: f64,
    pub sensor: SensorSpec,
    pub weights: RewardWeights,
    pub init: InitSpec,
    pub reflect_jitter: f64,
    pub normalize_features: bool,

    pub mode: TdMode,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub lr: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub target_sync: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Share of all training steps over which ε is annealed.
    pub epsilon_anneal_fraction: f64,
    /// Training rewards are clamped to `±reward_clip` before storage.
    /// Evaluation always reports the raw information measure.
    pub reward_clip: Option<f64>,

    /// Number of training trajectories M.
    pub trajectories: usize,
    pub seeds: Vec<u64>,
    /// Evaluate after every this many trajectories.
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub eval_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::single_target()
    }
}

impl TrainConfig {
    /// One target on the empty 50 m map.
    pub fn single_target() -> Self {
        let env = EnvConfig::single_target(WorldMap::empty(50.0));
        Self {
            map: "empty-50".into(),
            n_targets: 1,
            horizon: env.horizon,
            tau: env.tau,
            q: env.q,
            sensor: env.sensor,
            weights: env.weights,
            init: env.init,
            reflect_jitter: DEFAULT_REFLECT_JITTER,
            normalize_features: true,
            mode: TdMode::Dqn,
            hidden_width: 128,
            hidden_layers: 3,
            lr: 0.001,
            gamma: 0.99,
            batch_size: 64,
            replay_capacity: 1000,
            target_sync: 50,
            epsilon_start: 1.0,
            epsilon_end: 0.01,
            epsilon_anneal_fraction: 0.5,
            reward_clip: Some(10.0),
            trajectories: 100,
            seeds: vec![1],
            eval_every: 1,
            eval_episodes: 5,
            eval_epsilon: 0.05,
        }
    }

    /// `n` targets on the 27 m map, wider network, slower learning rate.
    pub fn multi_target(n: usize) -> Self {
        let env = EnvConfig::multi_target(WorldMap::empty(27.0), n);
        Self {
            map: "empty-27".into(),
            n_targets: n,
            horizon: env.horizon,
            q: env.q,
            hidden_width: 256,
            lr: 0.0005,
            trajectories: 300,
            eval_every: 2,
            ..Self::single_target()
        }
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path, e))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.trajectories == 0 {
            return bad("trajectories must be positive");
        }
        if self.seeds.is_empty() {
            return bad("seed list is empty");
        }
        if self.eval_every == 0 || self.eval_episodes == 0 {
            return bad("evaluation cadence and repeats must be positive");
        }
        if self.hidden_layers == 0 || self.hidden_width == 0 {
            return bad("network needs at least one non-empty hidden layer");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start)
            || !(0.0..=1.0).contains(&self.epsilon_end)
            || !(0.0..=1.0).contains(&self.eval_epsilon)
        {
            return bad("epsilon values must lie in [0, 1]");
        }
        if !(self.epsilon_anneal_fraction > 0.0 && self.epsilon_anneal_fraction <= 1.0) {
            return bad("epsilon_anneal_fraction must lie in (0, 1]");
        }
        if let Some(c) = self.reward_clip {
            if !(c > 0.0) {
                return bad("reward_clip must be positive");
            }
        }
        self.dqn_config().validate()?;
        self.env_config()?.validate()?;
        Ok(())
    }

    pub fn world_map(&self) -> Result<WorldMap> {
        resolve_map(&self.map)
    }

    pub fn env_config(&self) -> Result<EnvConfig> {
        Ok(EnvConfig {
            map: self.world_map()?,
            n_targets: self.n_targets,
            horizon: self.horizon,
            tau: self.tau,
            q: self.q,
            sensor: self.sensor,
            weights: self.weights,
            init: self.init,
            reflect_jitter: self.reflect_jitter,
            normalize_features: self.normalize_features,
        })
    }

    pub fn dqn_config(&self) -> DqnConfig {
        DqnConfig {
            mode: self.mode,
            hidden: vec![self.hidden_width; self.hidden_layers],
            lr: self.lr,
            gamma: self.gamma,
            batch_size: self.batch_size,
            replay_capacity: self.replay_capacity,
            target_sync: self.target_sync,
        }
    }

    pub fn epsilon_schedule(&self) -> EpsilonSchedule {
        let total = (self.trajectories * self.horizon) as f64;
        EpsilonSchedule {
            start: self.epsilon_start,
            end: self.epsilon_end,
            anneal_steps: (total * self.epsilon_anneal_fraction).round() as u64,
        }
    }

    /// Baseline planner settings matching this config's reward and discount.
    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            gamma: self.gamma,
            weights: self.weights,
            ..PlannerConfig::default()
        }
    }

    /// SHA-256 over the canonical JSON of the config and the resolved map.
    pub fn hash(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Hashed<'a> {
            config: &'a TrainConfig,
            map: &'a WorldMap,
        }
        let map = self.world_map()?;
        let bytes = serde_json::to_vec(&Hashed { config: self, map: &map }).expect("config serialises");
        Ok(hex(&Sha256::digest(&bytes)))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// On-disk map layout: `bounds = [min_x, min_y, max_x, max_y]` and a list of
/// obstacle rectangles in the same form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub bounds: [f64; 4],
    #[serde(default)]
    pub obstacles: Vec<[f64; 4]>,
}

impl MapFile {
    pub fn to_map(&self) -> Result<WorldMap> {
        let rect = |r: &[f64; 4]| Rect::new(r[0], r[1], r[2], r[3]);
        Ok(WorldMap::new(rect(&self.bounds), self.obstacles.iter().map(rect).collect())?)
    }

    pub fn from_map(map: &WorldMap) -> Self {
        let flat = |r: &Rect| [r.min.x, r.min.y, r.max.x, r.max.y];
        Self {
            bounds: flat(map.bounds()),
            obstacles: map.obstacles().iter().map(flat).collect(),
        }
    }
}

/// A built-in map name, or a TOML map file.
pub fn resolve_map(name: &str) -> Result<WorldMap> {
    match WorldMap::builtin(name) {
        Ok(map) => Ok(map),
        Err(builtin_err) => {
            let path = Path::new(name);
            if !path.exists() {
                return Err(builtin_err.into());
            }
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let file: MapFile = toml::from_str(&text).map_err(|e| Error::parse(path, e))?;
            file.to_map()
        }
    }
}
