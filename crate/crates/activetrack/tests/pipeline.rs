use activetrack::checkpoint::{self, CheckpointError};
use activetrack::config::TrainConfig;
use activetrack::episode::{read_episode, EpisodeHeader, EpisodeLog, StepRecord, EPISODE_SCHEMA};
use activetrack::evaluate::{evaluate, Policy};
use activetrack::render::{frame_svg, render, CovEllipse};
use activetrack::train::{
    moving_average, read_records, train, RunRecord, CHECKPOINT_FILE, CONFIG_FILE, RECORDS_FILE, SMOOTHING_WINDOW,
};
use activetrack::Error;
use activetrack_core::planner::PlannerConfig;
use proptest::prelude::*;

fn smoke() -> TrainConfig {
    TrainConfig {
        trajectories: 2,
        horizon: 10,
        batch_size: 8,
        hidden_width: 16,
        eval_episodes: 2,
        ..TrainConfig::single_target()
    }
}

fn evals(records: &[RunRecord]) -> Vec<(usize, f64, f64)> {
    records
        .iter()
        .filter_map(|r| match r {
            RunRecord::Eval {
                trajectory,
                mean,
                smoothed,
                ..
            } => Some((*trajectory, *mean, *smoothed)),
            RunRecord::Meta { .. } => None,
        })
        .collect()
}

#[test]
fn smoke_run_writes_two_evaluations() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(&smoke(), 7, Some(dir.path()), &mut |_| {}).unwrap();
    assert_eq!(evals(&out.records).len(), 2);
    for f in [CHECKPOINT_FILE, CONFIG_FILE, RECORDS_FILE] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert_eq!(read_records(&dir.path().join(RECORDS_FILE)).unwrap(), out.records);
    assert_eq!(checkpoint::load(&dir.path().join(CHECKPOINT_FILE)).unwrap(), out.network);
    let reread = TrainConfig::from_toml_file(&dir.path().join(CONFIG_FILE)).unwrap();
    assert_eq!(reread, smoke());
    match &out.records[0] {
        RunRecord::Meta {
            config_hash,
            feature_dim,
            ..
        } => {
            assert_eq!(config_hash, &smoke().hash().unwrap());
            assert_eq!(*feature_dim, 8);
        }
        other => panic!("first record {other:?}"),
    }
}

#[test]
fn reruns_are_bit_identical() {
    let cfg = TrainConfig {
        trajectories: 4,
        horizon: 30,
        ..smoke()
    };
    let a = train(&cfg, 3, None, &mut |_| {}).unwrap();
    let b = train(&cfg, 3, None, &mut |_| {}).unwrap();
    assert_eq!(serde_json::to_string(&a.records).unwrap(), serde_json::to_string(&b.records).unwrap());
    assert_eq!(a.network, b.network);
    let c = train(&cfg, 4, None, &mut |_| {}).unwrap();
    assert_ne!(a.records, c.records);
}

#[test]
fn smoothed_curve_is_the_window_four_average() {
    let cfg = TrainConfig {
        trajectories: 7,
        horizon: 10,
        ..smoke()
    };
    let out = train(&cfg, 5, None, &mut |_| {}).unwrap();
    let e = evals(&out.records);
    assert_eq!(e.len(), 7);
    let raw: Vec<f64> = e.iter().map(|x| x.1).collect();
    // Independent trailing average.
    for (i, x) in e.iter().enumerate() {
        let lo = i.saturating_sub(SMOOTHING_WINDOW - 1);
        let w = &raw[lo..=i];
        assert!((x.2 - w.iter().sum::<f64>() / w.len() as f64).abs() < 1e-12);
    }
    assert_eq!(moving_average(&raw, SMOOTHING_WINDOW).last().copied(), e.last().map(|x| x.2));
}

#[test]
fn multi_target_evaluates_every_two_trajectories() {
    let cfg = TrainConfig {
        trajectories: 5,
        horizon: 10,
        batch_size: 8,
        hidden_width: 16,
        eval_episodes: 1,
        ..TrainConfig::multi_target(2)
    };
    let out = train(&cfg, 1, None, &mut |_| {}).unwrap();
    let t: Vec<usize> = evals(&out.records).iter().map(|x| x.0).collect();
    assert_eq!(t, vec![2, 4, 5]);
}

#[test]
fn any_config_change_changes_the_hash() {
    let base = TrainConfig::single_target();
    let h = base.hash().unwrap();
    let variants = [
        TrainConfig { lr: 0.002, ..base.clone() },
        TrainConfig { horizon: 101, ..base.clone() },
        TrainConfig { map: "obstacle-30".into(), ..base.clone() },
        TrainConfig { reward_clip: None, ..base.clone() },
        TrainConfig { seeds: vec![2], ..base.clone() },
    ];
    for v in variants {
        assert_ne!(v.hash().unwrap(), h);
    }
    assert_eq!(base.clone().hash().unwrap(), h);
}

#[test]
fn random_is_worse_than_the_baseline() {
    let cfg = TrainConfig::single_target();
    let env = cfg.env_config().unwrap();
    let random = evaluate(&Policy::Random, &env, 20, 2024, "h", None).unwrap();
    let baseline = evaluate(&Policy::Baseline(cfg.planner_config()), &env, 20, 2024, "h", None).unwrap();
    assert!(random.mean < baseline.mean, "random {} baseline {}", random.mean, baseline.mean);
}

#[test]
fn evaluation_is_repeatable_and_reports_feature_dims() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(&smoke(), 1, Some(dir.path()), &mut |_| {}).unwrap();
    let net = checkpoint::load(&dir.path().join(CHECKPOINT_FILE)).unwrap();
    let policy = Policy::Network { net: &net, epsilon: 0.05 };
    let env = smoke().env_config().unwrap();
    let a = evaluate(&policy, &env, 3, 11, "h", None).unwrap();
    let b = evaluate(&policy, &env, 3, 11, "h", None).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.feature_dim, 8);
    assert_eq!(out.network, net);

    let three = TrainConfig {
        n_targets: 3,
        horizon: 5,
        ..TrainConfig::single_target()
    };
    let s = evaluate(&Policy::Random, &three.env_config().unwrap(), 1, 1, "h", None).unwrap();
    assert_eq!((s.n_targets, s.feature_dim), (3, 20));
}

#[test]
fn corrupted_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(&smoke(), 1, Some(dir.path()), &mut |_| {}).unwrap();
    let path = dir.path().join(CHECKPOINT_FILE);
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x01;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(checkpoint::load(&path), Err(CheckpointError::ChecksumMismatch)));
    std::fs::write(&path, checkpoint::encode(&out.network)).unwrap();
    assert_eq!(checkpoint::load(&path).unwrap(), out.network);
}

fn header(map: activetrack::config::MapFile) -> EpisodeHeader {
    EpisodeHeader {
        schema: EPISODE_SCHEMA.into(),
        policy: "random".into(),
        episode: 0,
        seed: 1,
        config_hash: "h".into(),
        n_targets: 1,
        horizon: 0,
        map,
    }
}

#[test]
fn empty_log_renders_the_map_only() {
    let map = activetrack::config::MapFile {
        bounds: [0.0, 0.0, 30.0, 30.0],
        obstacles: vec![[5.0, 5.0, 10.0, 11.0]],
    };
    let log = EpisodeLog {
        header: header(map),
        steps: vec![],
    };
    let dir = tempfile::tempdir().unwrap();
    let files = render(&log, &[], dir.path()).unwrap();
    let svg = std::fs::read_to_string(&files[0]).unwrap();
    assert_eq!(svg.matches("<rect").count(), 2);
    for shape in ["<ellipse", "<polyline", "<polygon", "<circle"] {
        assert!(!svg.contains(shape), "{shape}");
    }
    let csv = std::fs::read_to_string(dir.path().join("episode.csv")).unwrap();
    assert!(csv.lines().count() <= 1);
}

#[test]
fn logged_episode_renders_and_round_trips() {
    let cfg = TrainConfig {
        horizon: 12,
        ..TrainConfig::single_target()
    };
    let dir = tempfile::tempdir().unwrap();
    let logs = dir.path().join("episodes");
    evaluate(&Policy::Baseline(PlannerConfig::default()), &cfg.env_config().unwrap(), 1, 3, "h", Some(&logs)).unwrap();
    let log = read_episode(&logs.join("episode_000.jsonl")).unwrap();
    assert_eq!(log.steps.len(), 13);
    assert_eq!(log.steps[0].action, None);
    assert!(log.steps[1..].iter().all(|s| s.action.is_some() && s.reward.is_some()));
    // Initial belief: 30·I, so a circle of radius √30.
    let p = log.steps[0].pos_cov[0];
    let e = CovEllipse::from_cov(p[0], p[1], p[2]);
    assert!((e.semi_major - 5.477).abs() < 1e-3 && (e.semi_minor - 5.477).abs() < 1e-3);

    let out = dir.path().join("fig");
    let files = render(&log, &[0, 6, 12], &out).unwrap();
    assert_eq!(files.len(), 4);
    let svg = std::fs::read_to_string(out.join("frame_0012.svg")).unwrap();
    assert_eq!(svg.matches("<ellipse").count(), 1);
    assert!(svg.contains("<polygon"));
    let mut reader = csv::Reader::from_path(out.join("episode.csv")).unwrap();
    let rows = reader.records().count();
    // Robot, one target and one belief per step.
    assert_eq!(rows, 13 * 3);
    assert!(frame_svg(&log, Some(6)).contains("t = 6"));
}

#[test]
fn schema_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("old.jsonl");
    let mut h = serde_json::to_value(header(activetrack::config::MapFile {
        bounds: [0.0, 0.0, 10.0, 10.0],
        obstacles: vec![],
    }))
    .unwrap();
    h["schema"] = "activetrack.episode/0".into();
    std::fs::write(&p, format!("{h}\n")).unwrap();
    assert!(matches!(read_episode(&p), Err(Error::SchemaVersionMismatch { .. })));

    let r = dir.path().join("records.jsonl");
    std::fs::write(
        &r,
        r#"{"kind":"meta","schema":"activetrack.run/0","config_hash":"x","seed":1,"code_version":"0","feature_dim":8,"n_targets":1,"trajectories":1}"#,
    )
    .unwrap();
    assert!(matches!(read_records(&r), Err(Error::SchemaVersionMismatch { .. })));
}

fn step_with_cov(a: f64, b: f64, c: f64) -> StepRecord {
    StepRecord {
        t: 0,
        pose: [1.0, 1.0, 0.0],
        targets: vec![[2.0, 2.0, 0.0, 0.0]],
        means: vec![[2.0, 2.0, 0.0, 0.0]],
        pos_cov: vec![[a, b, c]],
        log_dets: vec![0.0],
        observed: vec![false],
        action: None,
        reward: None,
    }
}

proptest! {
    #[test]
    fn ellipse_axes_are_eigenvectors(l1 in 0.01..50.0f64, l2 in 0.01..50.0f64, phi in -1.5..1.5f64) {
        // Σ = R diag(l1, l2) Rᵀ
        let (c, s) = (phi.cos(), phi.sin());
        let a = l1 * c * c + l2 * s * s;
        let b = (l1 - l2) * c * s;
        let d = l1 * s * s + l2 * c * c;
        let e = CovEllipse::from_cov(a, b, d);
        let (big, small) = (l1.max(l2), l1.min(l2));
        prop_assert!((e.semi_major - big.sqrt()).abs() < 1e-9);
        prop_assert!((e.semi_minor - small.sqrt()).abs() < 1e-9);
        // Σu = λ₁u for the major-axis direction.
        let (ux, uy) = (e.angle.cos(), e.angle.sin());
        let (vx, vy) = (a * ux + b * uy, b * ux + d * uy);
        prop_assert!((vx - big * ux).abs() < 1e-8 && (vy - big * uy).abs() < 1e-8);
    }
}

#[test]
fn csv_carries_ellipse_geometry() {
    let log = EpisodeLog {
        header: header(activetrack::config::MapFile {
            bounds: [0.0, 0.0, 10.0, 10.0],
            obstacles: vec![],
        }),
        steps: vec![step_with_cov(4.0, 0.0, 1.0)],
    };
    let dir = tempfile::tempdir().unwrap();
    render(&log, &[], dir.path()).unwrap();
    let mut reader = csv::Reader::from_path(dir.path().join("episode.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let major = headers.iter().position(|h| h == "semi_major").unwrap();
    let kind = headers.iter().position(|h| h == "kind").unwrap();
    let belief = reader
        .records()
        .map(|r| r.unwrap())
        .find(|r| &r[kind] == "belief")
        .unwrap();
    assert_eq!(belief[major].parse::<f64>().unwrap(), 2.0);
}
