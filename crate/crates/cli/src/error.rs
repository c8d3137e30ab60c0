use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Engine(#[from] rgcluster::Error),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("invalid config {path}: {msg}")]
    Config { path: PathBuf, msg: String },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 0 success, 1 I/O, 2 validation, 3 cap refusal, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Engine(rgcluster::Error::CapExceeded { .. }) => 3,
            CliError::Engine(rgcluster::Error::NonPositivePartition { .. }) => 4,
            CliError::Engine(_) | CliError::Config { .. } | CliError::Usage(_) => 2,
            CliError::Read { .. } | CliError::Write { .. } => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
