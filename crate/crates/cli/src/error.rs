use std::io;
use std::path::{Path, PathBuf};

use dirichlet_einstein::Error;

use crate::config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] Error),
    #[error("no solution exists: k * length = {phase} >= pi")]
    NonExistence { phase: f64 },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("i/o error: {0}")]
    Stream(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed result file: {0}")]
    Record(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 when the problem has no solution of the requested kind, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(Error::NoSolutionAtLength { .. }) | CliError::NonExistence { .. } => 2,
            _ => 1,
        }
    }
}
