use std::path::{Path, PathBuf};
use std::process::ExitCode;

use activetrack::checkpoint;
use activetrack::config::{output_root, TrainConfig};
use activetrack::episode::read_episode;
use activetrack::evaluate::{evaluate, EvalSummary, Policy};
use activetrack::render::render;
use activetrack::train::{aggregate, train, RunRecord, CONFIG_FILE};
use activetrack::{Error, Result};
use activetrack_core::agent::TdMode;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "activetrack", version, about = "Active target tracking: train, evaluate and render")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a Q-network for each configured seed.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Run directory (default: $ACTIVETRACK_OUT/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "train")]
        name: String,
    },
    /// Score a checkpoint or a named policy on fixed evaluation seeds.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        eval: EvalArgs,
        /// Q-network checkpoint; a config.toml next to it is used when no
        /// --config is given.
        #[arg(long, conflicts_with = "policy")]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum)]
        policy: Option<NamedPolicy>,
        /// ε of the ε-greedy network policy.
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
    },
    /// Score the tree-search baseline planner.
    Baseline {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 5.0)]
        prune_eps: f64,
    },
    /// Draw SVG frames and a CSV table from an episode log.
    Render {
        #[arg(long)]
        log: PathBuf,
        /// Steps to draw, comma separated (default: the last step).
        #[arg(long, value_delimiter = ',')]
        frames: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train over several seeds and aggregate the learning curves.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3, 4, 5])]
        sweep_seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "sweep")]
        name: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum NamedPolicy {
    Random,
    Baseline,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Single,
    Multi,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Dqn,
    DoubleDqn,
}

/// Config file, preset and per-field overrides.
#[derive(Args)]
struct ConfigArgs {
    /// TOML config; fields it leaves out take the preset's values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "single")]
    preset: Preset,
    /// Built-in map name or map file.
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    targets: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    hidden_width: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    trajectories: Option<usize>,
    /// Comma-separated master seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    #[arg(long)]
    normalize_features: Option<bool>,
    /// Training reward clip; 0 disables clipping.
    #[arg(long)]
    reward_clip: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self, fallback: Option<&Path>) -> Result<TrainConfig> {
        let file = self.config.as_deref().or(fallback.filter(|p| p.exists()));
        let mut c = match (file, self.preset) {
            (Some(p), _) => TrainConfig::from_toml_file(p)?,
            (None, Preset::Single) => TrainConfig::single_target(),
            (None, Preset::Multi) => TrainConfig::multi_target(self.targets.unwrap_or(2)),
        };
        if let Some(v) = &self.map {
            c.map = v.clone();
        }
        if let Some(v) = self.targets {
            c.n_targets = v;
        }
        if let Some(v) = self.horizon {
            c.horizon = v;
        }
        if let Some(v) = self.q {
            c.q = v;
        }
        if let Some(v) = self.mode {
            c.mode = match v {
                Mode::Dqn => TdMode::Dqn,
                Mode::DoubleDqn => TdMode::DoubleDqn,
            };
        }
        if let Some(v) = self.hidden_width {
            c.hidden_width = v;
        }
        if let Some(v) = self.lr {
            c.lr = v;
        }
        if let Some(v) = self.gamma {
            c.gamma = v;
        }
        if let Some(v) = self.trajectories {
            c.trajectories = v;
        }
        if let Some(v) = &self.seeds {
            c.seeds = v.clone();
        }
        if let Some(v) = self.eval_every {
            c.eval_every = v;
        }
        if let Some(v) = self.eval_episodes {
            c.eval_episodes = v;
        }
        if let Some(v) = self.normalize_features {
            c.normalize_features = v;
        }
        if let Some(v) = self.reward_clip {
            c.reward_clip = (v > 0.0).then_some(v);
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, default_value_t = 20)]
    episodes: usize,
    /// Master seed of the evaluation episodes.
    #[arg(long = "eval-seed", default_value_t = 2024)]
    eval_seed: u64,
    /// Directory for summary.json and per-episode logs.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn default_dir(out: Option<PathBuf>, name: &str) -> PathBuf {
    out.unwrap_or_else(|| output_root().join(name))
}

fn print_record(rec: &RunRecord) {
    if let RunRecord::Eval {
        trajectory,
        mean,
        smoothed,
        epsilon,
        ..
    } = rec
    {
        eprintln!("trajectory {trajectory:>4}  eps {epsilon:.3}  eval {mean:>10.2}  smoothed {smoothed:>10.2}");
    }
}

fn run_eval(policy: &Policy<'_>, cfg: &TrainConfig, args: &EvalArgs, name: &str) -> Result<()> {
    let dir = default_dir(args.out.clone(), name);
    let summary: EvalSummary = evaluate(
        policy,
        &cfg.env_config()?,
        args.episodes,
        args.eval_seed,
        &cfg.hash()?,
        Some(&dir.join("episodes")),
    )?;
    let json = serde_json::to_string_pretty(&summary).expect("summary serialises");
    let p = dir.join("summary.json");
    std::fs::write(&p, &json).map_err(|e| Error::io(&p, e))?;
    println!(
        "{}: mean {:.3} std {:.3} min {:.3} max {:.3} over {} episodes (feature dim {})",
        summary.policy, summary.mean, summary.std, summary.min, summary.max, summary.episodes, summary.feature_dim
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { cfg, out, name } => {
            let cfg = cfg.resolve(None)?;
            let dir = default_dir(out, &name);
            for &seed in &cfg.seeds {
                let run_dir = dir.join(format!("seed-{seed}"));
                eprintln!("seed {seed} -> {}", run_dir.display());
                train(&cfg, seed, Some(&run_dir), &mut print_record)?;
            }
            Ok(())
        }
        Command::Evaluate {
            cfg,
            eval,
            checkpoint: ckpt,
            policy,
            epsilon,
        } => {
            let fallback = ckpt.as_deref().and_then(Path::parent).map(|p| p.join(CONFIG_FILE));
            let cfg = cfg.resolve(fallback.as_deref())?;
            match (ckpt, policy) {
                (Some(path), _) => {
                    let net = checkpoint::load(&path)?;
                    let dim = cfg.env_config()?.feature_dim();
                    if net.input_dim() != dim {
                        return Err(Error::Config(format!(
                            "checkpoint expects {} features, environment produces {dim}",
                            net.input_dim()
                        )));
                    }
                    run_eval(&Policy::Network { net: &net, epsilon }, &cfg, &eval, "evaluate")
                }
                (None, Some(NamedPolicy::Random)) => run_eval(&Policy::Random, &cfg, &eval, "evaluate-random"),
                (None, Some(NamedPolicy::Baseline)) => {
                    run_eval(&Policy::Baseline(cfg.planner_config()), &cfg, &eval, "evaluate-baseline")
                }
                (None, None) => Err(Error::Config("give --checkpoint or --policy".into())),
            }
        }
        Command::Baseline {
            cfg,
            eval,
            depth,
            prune_eps,
        } => {
            let cfg = cfg.resolve(None)?;
            if depth == 0 {
                return Err(Error::Config("planner depth must be at least 1".into()));
            }
            let mut p = cfg.planner_config();
            p.horizon = depth;
            p.prune_eps = prune_eps;
            run_eval(&Policy::Baseline(p), &cfg, &eval, "baseline")
        }
        Command::Render { log, frames, out } => {
            let episode = read_episode(&log)?;
            let dir = out.unwrap_or_else(|| log.with_extension(""));
            for p in render(&episode, &frames, &dir)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Sweep {
            cfg,
            sweep_seeds,
            out,
            name,
        } => {
            let mut cfg = cfg.resolve(None)?;
            cfg.seeds = sweep_seeds;
            cfg.validate()?;
            let dir = default_dir(out, &name);
            let mut runs = Vec::new();
            for &seed in &cfg.seeds {
                let run_dir = dir.join(format!("seed-{seed}"));
                eprintln!("seed {seed} -> {}", run_dir.display());
                runs.push(train(&cfg, seed, Some(&run_dir), &mut print_record)?.records);
            }
            let p = dir.join("sweep.jsonl");
            let mut text = String::new();
            for point in aggregate(&runs) {
                text.push_str(&serde_json::to_string(&point).expect("point serialises"));
                text.push('\n');
            }
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
            println!("{}", p.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
