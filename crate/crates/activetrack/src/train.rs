//! The training loop and its run records.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use activetrack_core::agent::{AgentError, DqnAgent, QLearner, Transition};
use activetrack_core::env::TrackingEnv;
use activetrack_core::nn::{Mlp, NnError};
use activetrack_core::rng::{stream, Stream};
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::evaluate::{evaluate, mean_std, Policy};

pub const RUN_SCHEMA: &str = "activetrack.run/1";
/// Trailing window of the smoothed learning curve.
pub const SMOOTHING_WINDOW: usize = 4;

pub const CHECKPOINT_FILE: &str = "qnet.ckpt";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const TIMING_FILE: &str = "timing.jsonl";
pub const CONFIG_FILE: &str = "config.toml";

/// One line of a run's record stream. Everything here is a deterministic
/// function of the config and seed; wall-clock times go to a separate file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RunRecord {
    Meta {
        schema: String,
        config_hash: String,
        seed: u64,
        code_version: String,
        feature_dim: usize,
        n_targets: usize,
        trajectories: usize,
    },
    Eval {
        /// Trajectories completed when the evaluation ran.
        trajectory: usize,
        env_steps: u64,
        train_steps: u64,
        target_syncs: u64,
        epsilon: f64,
        /// Mean and population std of cumulative `−Σ log det Σ` over the
        /// evaluation episodes.
        mean: f64,
        std: f64,
        /// Mean of the last [`SMOOTHING_WINDOW`] raw means, this one included.
        smoothed: f64,
        /// The evaluation mean divided by the horizon.
        mean_per_step: f64,
        /// Mean training loss since the previous evaluation.
        train_loss: Option<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingRecord {
    pub trajectory: usize,
    pub wall_seconds: f64,
}

/// Trailing moving average; the first entries average what is available.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    (0..xs.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let w = &xs[lo..=i];
            w.iter().sum::<f64>() / w.len() as f64
        })
        .collect()
}

pub struct TrainOutcome {
    pub records: Vec<RunRecord>,
    pub network: Mlp,
    pub run_dir: Option<PathBuf>,
}

struct Sink {
    records: Option<(PathBuf, BufWriter<File>)>,
    timing: Option<(PathBuf, BufWriter<File>)>,
}

impl Sink {
    fn open(dir: Option<&Path>) -> Result<Self> {
        let Some(dir) = dir else {
            return Ok(Self { records: None, timing: None });
        };
        let open = |name: &str| -> Result<(PathBuf, BufWriter<File>)> {
            let p = dir.join(name);
            let f = OpenOptions::new()
                .create(true)
                .write(true)
                .truncate(true)
                .open(&p)
                .map_err(|e| Error::io(&p, e))?;
            Ok((p, BufWriter::new(f)))
        };
        Ok(Self {
            records: Some(open(RECORDS_FILE)?),
            timing: Some(open(TIMING_FILE)?),
        })
    }

    fn write<T: Serialize>(slot: &mut Option<(PathBuf, BufWriter<File>)>, value: &T) -> Result<()> {
        if let Some((path, w)) = slot {
            let line = serde_json::to_string(value).map_err(|e| Error::parse(&*path, e))?;
            writeln!(w, "{line}").and_then(|_| w.flush()).map_err(|e| Error::io(&*path, e))?;
        }
        Ok(())
    }
}

/// Train one learner with master seed `seed`.
///
/// With `run_dir`, the config, the record stream, timings and the final
/// checkpoint are written there. Records are flushed as they are produced, so
/// a diverged run keeps everything up to the failure. `on_record` sees each
/// record as it is emitted.
pub fn train(
    cfg: &TrainConfig,
    seed: u64,
    run_dir: Option<&Path>,
    on_record: &mut dyn FnMut(&RunRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let env_cfg = cfg.env_config()?;
    let hash = cfg.hash()?;
    if let Some(dir) = run_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = dir.join(CONFIG_FILE);
        std::fs::write(&p, cfg.to_toml()).map_err(|e| Error::io(&p, e))?;
    }
    let mut sink = Sink::open(run_dir)?;
    let mut records = Vec::new();
    let mut emit = |rec: RunRecord, sink: &mut Sink| -> Result<()> {
        Sink::write(&mut sink.records, &rec)?;
        on_record(&rec);
        records.push(rec);
        Ok(())
    };

    emit(
        RunRecord::Meta {
            schema: RUN_SCHEMA.into(),
            config_hash: hash.clone(),
            seed,
            code_version: env!("CARGO_PKG_VERSION").into(),
            feature_dim: env_cfg.feature_dim(),
            n_targets: env_cfg.n_targets,
            trajectories: cfg.trajectories,
        },
        &mut sink,
    )?;

    let mut env = TrackingEnv::new(env_cfg.clone())?;
    let mut init_rng = stream(seed, Stream::Init, 0);
    let mut explore_rng = stream(seed, Stream::Explore, 0);
    let mut replay_rng = stream(seed, Stream::Replay, 0);
    let mut agent = DqnAgent::new(env_cfg.feature_dim(), env.num_actions(), cfg.dqn_config(), &mut init_rng)?;
    let schedule = cfg.epsilon_schedule();
    let clip = cfg.reward_clip.unwrap_or(f64::INFINITY);

    let started = Instant::now();
    let mut env_steps = 0u64;
    let mut raw_means = Vec::new();
    let (mut loss_sum, mut loss_n) = (0.0, 0u64);

    for m in 0..cfg.trajectories {
        let mut env_rng = stream(seed, Stream::TrainEnv, m as u32);
        let mut state = env.reset(&mut env_rng)?.into_inner();
        while !env.is_done() {
            let epsilon = schedule.value(env_steps);
            let action = agent.select_action(&state, epsilon, &mut explore_rng)?;
            let step = env.step(action, &mut env_rng)?;
            let next = step.features.into_inner();
            // The horizon is a time limit, not a terminal state, so the
            // bootstrap is kept on the last transition too.
            let t = Transition {
                state: std::mem::replace(&mut state, next.clone()),
                action,
                reward: step.reward.clamp(-clip, clip),
                next_state: next,
                done: false,
            };
            match agent.record(t, &mut replay_rng) {
                Ok(Some(loss)) => {
                    loss_sum += loss;
                    loss_n += 1;
                }
                Ok(None) => {}
                Err(AgentError::Network(NnError::NonFiniteLoss)) => {
                    return Err(Error::Divergence { trajectory: m });
                }
                Err(e) => return Err(e.into()),
            }
            env_steps += 1;
        }

        let done = m + 1;
        if done % cfg.eval_every == 0 || done == cfg.trajectories {
            let policy = Policy::Network {
                net: agent.network(),
                epsilon: cfg.eval_epsilon,
            };
            let summary = evaluate(&policy, &env_cfg, cfg.eval_episodes, seed, &hash, None)?;
            raw_means.push(summary.mean);
            let smoothed = *moving_average(&raw_means, SMOOTHING_WINDOW).last().unwrap();
            let scores: Vec<f64> = summary.outcomes.iter().map(|o| o.cumulative_neg_log_det).collect();
            let (mean, std) = mean_std(&scores);
            emit(
                RunRecord::Eval {
                    trajectory: done,
                    env_steps,
                    train_steps: agent.train_steps(),
                    target_syncs: agent.target_syncs(),
                    epsilon: schedule.value(env_steps),
                    mean,
                    std,
                    smoothed,
                    mean_per_step: mean / cfg.horizon as f64,
                    train_loss: (loss_n > 0).then(|| loss_sum / loss_n as f64),
                },
                &mut sink,
            )?;
            Sink::write(
                &mut sink.timing,
                &TimingRecord {
                    trajectory: done,
                    wall_seconds: started.elapsed().as_secs_f64(),
                },
            )?;
            loss_sum = 0.0;
            loss_n = 0;
        }
    }

    if let Some(dir) = run_dir {
        checkpoint::save(agent.network(), &dir.join(CHECKPOINT_FILE))?;
    }
    Ok(TrainOutcome {
        records,
        network: agent.network().clone(),
        run_dir: run_dir.map(Path::to_path_buf),
    })
}

/// Read a record stream back.
pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let rec: RunRecord = serde_json::from_str(line).map_err(|e| Error::parse(path, e))?;
        if let RunRecord::Meta { schema, .. } = &rec {
            if schema != RUN_SCHEMA {
                return Err(Error::SchemaVersionMismatch {
                    path: path.to_path_buf(),
                    expected: RUN_SCHEMA.into(),
                    found: schema.clone(),
                });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// One point of a multi-seed learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub trajectory: usize,
    /// Mean over seeds of the per-seed evaluation means.
    pub mean: f64,
    /// Population std over seeds.
    pub std: f64,
    pub smoothed: f64,
    pub seeds: usize,
}

/// Combine the eval records of several runs point by point.
pub fn aggregate(runs: &[Vec<RunRecord>]) -> Vec<SweepPoint> {
    let curves: Vec<Vec<(usize, f64)>> = runs
        .iter()
        .map(|r| {
            r.iter()
                .filter_map(|rec| match rec {
                    RunRecord::Eval { trajectory, mean, .. } => Some((*trajectory, *mean)),
                    RunRecord::Meta { .. } => None,
                })
                .collect()
        })
        .collect();
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    let mut points: Vec<SweepPoint> = (0..len)
        .map(|i| {
            let vals: Vec<f64> = curves.iter().map(|c| c[i].1).collect();
            let (mean, std) = mean_std(&vals);
            SweepPoint {
                trajectory: curves[0][i].0,
                mean,
                std,
                smoothed: mean,
                seeds: vals.len(),
            }
        })
        .collect();
    let means: Vec<f64> = points.iter().map(|p| p.mean).collect();
    for (p, s) in points.iter_mut().zip(moving_average(&means, SMOOTHING_WINDOW)) {
        p.smoothed = s;
    }
    points
}
