//! Policies and the evaluation protocol.

use std::path::Path;

use activetrack_core::agent::act;
use activetrack_core::env::{EnvConfig, TrackingEnv};
use activetrack_core::nn::Mlp;
use activetrack_core::planner::{plan, random_policy, PlannerConfig};
use activetrack_core::rng::{stream, SimRng, Stream};
use serde::{Deserialize, Serialize};

use crate::config::MapFile;
use crate::episode::{EpisodeHeader, EpisodeWriter, StepRecord, EPISODE_SCHEMA};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum Policy<'a> {
    /// ε-greedy over a Q-network.
    Network { net: &'a Mlp, epsilon: f64 },
    Baseline(PlannerConfig),
    Random,
}

impl Policy<'_> {
    pub fn name(&self) -> String {
        match self {
            Policy::Network { epsilon, .. } => format!("q-network(eps={epsilon})"),
            Policy::Baseline(c) => format!("baseline(h={}, prune={})", c.horizon, c.prune_eps),
            Policy::Random => "random".into(),
        }
    }

    pub fn act(&self, env: &TrackingEnv, features: &[f64], rng: &mut SimRng) -> Result<usize> {
        Ok(match self {
            Policy::Network { net, epsilon } => {
                let q = net.forward(features).map_err(|e| Error::Agent(e.into()))?;
                act(&q, *epsilon, rng)
            }
            Policy::Baseline(c) => {
                let cfg = env.config();
                plan(env.pose(), env.beliefs(), &cfg.map, &cfg.sensor, env.model(), c)
            }
            Policy::Random => random_policy(rng),
        })
    }
}

/// Per-episode totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    /// `−Σ_t Σ_i log det Σ_{i,t}` over the steps of the episode.
    pub cumulative_neg_log_det: f64,
    /// The same sum divided by the number of steps.
    pub mean_neg_log_det: f64,
    pub cumulative_reward: f64,
    /// Steps on which each target was detected.
    pub detections: Vec<usize>,
    pub steps: usize,
}

/// Run one episode to its horizon. `env_rng` drives the world and sensing,
/// `policy_rng` the policy's own randomness.
pub fn run_episode(
    env: &mut TrackingEnv,
    policy: &Policy<'_>,
    env_rng: &mut SimRng,
    policy_rng: &mut SimRng,
    mut log: Option<&mut EpisodeWriter>,
) -> Result<EpisodeOutcome> {
    let mut features = env.reset(env_rng)?.into_inner();
    if let Some(w) = log.as_deref_mut() {
        w.step(&StepRecord::capture(env, None, None)?)?;
    }
    let n = env.config().n_targets;
    let mut out = EpisodeOutcome {
        cumulative_neg_log_det: 0.0,
        mean_neg_log_det: 0.0,
        cumulative_reward: 0.0,
        detections: vec![0; n],
        steps: 0,
    };
    while !env.is_done() {
        let a = policy.act(env, &features, policy_rng)?;
        let step = env.step(a, env_rng)?;
        out.cumulative_neg_log_det -= step.log_dets.iter().sum::<f64>();
        out.cumulative_reward += step.reward;
        for (d, &seen) in out.detections.iter_mut().zip(&step.observed) {
            *d += usize::from(seen);
        }
        out.steps += 1;
        if let Some(w) = log.as_deref_mut() {
            w.step(&StepRecord::capture(env, Some(a), Some(step.reward))?)?;
        }
        features = step.features.into_inner();
    }
    out.mean_neg_log_det = out.cumulative_neg_log_det / out.steps.max(1) as f64;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub policy: String,
    pub seed: u64,
    pub episodes: usize,
    pub n_targets: usize,
    pub feature_dim: usize,
    pub config_hash: String,
    /// Statistics of the per-episode cumulative `−Σ log det Σ`.
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub outcomes: Vec<EpisodeOutcome>,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Episode `k` of an evaluation under master seed `seed` uses the
/// `(Eval, k)` stream for the world and `(EvalPolicy, k)` for the policy, so
/// every policy faces the same initial conditions and target motion.
pub fn eval_streams(seed: u64, k: u32) -> (SimRng, SimRng) {
    (stream(seed, Stream::Eval, k), stream(seed, Stream::EvalPolicy, k))
}

/// Evaluate `policy` for `episodes` episodes. With `log_dir`, one episode log
/// per episode is written there.
pub fn evaluate(
    policy: &Policy<'_>,
    env_cfg: &EnvConfig,
    episodes: usize,
    seed: u64,
    config_hash: &str,
    log_dir: Option<&Path>,
) -> Result<EvalSummary> {
    let mut env = TrackingEnv::new(env_cfg.clone())?;
    if let Some(dir) = log_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut outcomes = Vec::with_capacity(episodes);
    for k in 0..episodes as u32 {
        let (mut env_rng, mut pol_rng) = eval_streams(seed, k);
        let mut writer = match log_dir {
            Some(dir) => Some(EpisodeWriter::create(
                &dir.join(format!("episode_{k:03}.jsonl")),
                &EpisodeHeader {
                    schema: EPISODE_SCHEMA.into(),
                    policy: policy.name(),
                    episode: k,
                    seed,
                    config_hash: config_hash.into(),
                    n_targets: env_cfg.n_targets,
                    horizon: env_cfg.horizon,
                    map: MapFile::from_map(&env_cfg.map),
                },
            )?),
            None => None,
        };
        outcomes.push(run_episode(&mut env, policy, &mut env_rng, &mut pol_rng, writer.as_mut())?);
        if let Some(w) = writer {
            w.finish()?;
        }
    }
    let scores: Vec<f64> = outcomes.iter().map(|o| o.cumulative_neg_log_det).collect();
    let (mean, std) = mean_std(&scores);
    Ok(EvalSummary {
        policy: policy.name(),
        seed,
        episodes,
        n_targets: env_cfg.n_targets,
        feature_dim: env_cfg.feature_dim(),
        config_hash: config_hash.into(),
        mean,
        std,
        min: scores.iter().copied().fold(f64::INFINITY, f64::min),
        max: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        outcomes,
    })
}
