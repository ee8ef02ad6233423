use std::path::PathBuf;

use activetrack_core::agent::AgentError;
use activetrack_core::env::EnvError;
use activetrack_core::nn::NnError;
use activetrack_core::world::MapError;

use crate::checkpoint::CheckpointError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("map: {0}")]
    Map(#[from] MapError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("agent: {0}")]
    Agent(#[from] AgentError),
    #[error("training diverged at trajectory {trajectory}: non-finite loss")]
    Divergence { trajectory: usize },
    #[error("{path}: schema {found:?}, expected {expected:?}")]
    SchemaVersionMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Self::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Process exit status: 2 for configuration problems, 3 for numeric
    /// divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Map(_) | Error::Parse { .. } => 2,
            Error::Env(EnvError::Config(_)) => 2,
            Error::Agent(AgentError::Config(_)) => 2,
            Error::Divergence { .. } => 3,
            Error::Agent(AgentError::Network(NnError::NonFiniteLoss)) => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
