//! Line-delimited JSON episode logs.
//!
//! The first line is an [`EpisodeHeader`]; each following line is a
//! [`StepRecord`]. The record at `t = 0` describes the state right after the
//! reset and has no action or reward.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use activetrack_core::env::TrackingEnv;
use serde::{Deserialize, Serialize};

use crate::config::MapFile;
use crate::error::{Error, Result};

pub const EPISODE_SCHEMA: &str = "activetrack.episode/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub schema: String,
    pub policy: String,
    pub episode: u32,
    pub seed: u64,
    pub config_hash: String,
    pub n_targets: usize,
    pub horizon: usize,
    pub map: MapFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    /// `[x, y, theta]`
    pub pose: [f64; 3],
    /// True target states `[px, py, vx, vy]`.
    pub targets: Vec<[f64; 4]>,
    /// Belief means `[px, py, vx, vy]`.
    pub means: Vec<[f64; 4]>,
    /// Position block of each covariance as `[σxx, σxy, σyy]`.
    pub pos_cov: Vec<[f64; 3]>,
    pub log_dets: Vec<f64>,
    pub observed: Vec<bool>,
    pub action: Option<usize>,
    pub reward: Option<f64>,
}

impl StepRecord {
    /// Snapshot of the environment after a reset or a step.
    pub fn capture(env: &TrackingEnv, action: Option<usize>, reward: Option<f64>) -> Result<Self> {
        let p = env.pose();
        let mut log_dets = Vec::with_capacity(env.beliefs().len());
        for b in env.beliefs() {
            log_dets.push(b.log_det().map_err(|e| Error::Env(e.into()))?);
        }
        Ok(Self {
            t: env.time(),
            pose: [p.x, p.y, p.theta],
            targets: env.targets().iter().map(|y| [y.px, y.py, y.vx, y.vy]).collect(),
            means: env
                .beliefs()
                .iter()
                .map(|b| [b.mean[0], b.mean[1], b.mean[2], b.mean[3]])
                .collect(),
            pos_cov: env
                .beliefs()
                .iter()
                .map(|b| [b.cov[(0, 0)], b.cov[(0, 1)], b.cov[(1, 1)]])
                .collect(),
            log_dets,
            observed: env.observed().to_vec(),
            action,
            reward,
        })
    }
}

pub struct EpisodeWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl EpisodeWriter {
    pub fn create(path: &Path, header: &EpisodeHeader) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        w.line(header)?;
        Ok(w)
    }

    fn line<T: Serialize>(&mut self, value: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, value).map_err(|e| Error::parse(&self.path, e))?;
        self.out.write_all(b"\n").map_err(|e| Error::io(&self.path, e))
    }

    pub fn step(&mut self, rec: &StepRecord) -> Result<()> {
        self.line(rec)
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub header: EpisodeHeader,
    pub steps: Vec<StepRecord>,
}

pub fn read_episode(path: &Path) -> Result<EpisodeLog> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::parse(path, "empty episode log"))?
        .map_err(|e| Error::io(path, e))?;
    let raw: serde_json::Value = serde_json::from_str(&first).map_err(|e| Error::parse(path, e))?;
    let found = raw.get("schema").and_then(|s| s.as_str()).unwrap_or("").to_string();
    if found != EPISODE_SCHEMA {
        return Err(Error::SchemaVersionMismatch {
            path: path.to_path_buf(),
            expected: EPISODE_SCHEMA.into(),
            found,
        });
    }
    let header: EpisodeHeader = serde_json::from_value(raw).map_err(|e| Error::parse(path, e))?;
    let mut steps = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        steps.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, e))?);
    }
    Ok(EpisodeLog { header, steps })
}
