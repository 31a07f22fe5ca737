use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::checkpoint::CheckpointError;
use crate::corpus::CorpusError;

/// Process exit codes.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_INCOMPATIBLE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{0}")]
    Incompatible(String),
    #[error(transparent)]
    Engine(#[from] twostage_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Corpus(_) => EXIT_USAGE,
            CliError::Checkpoint(CheckpointError::Io { .. }) => EXIT_USAGE,
            CliError::Checkpoint(_) | CliError::Incompatible(_) => EXIT_INCOMPATIBLE,
            CliError::Engine(twostage_core::Error::NonFiniteLoss { .. }) => EXIT_NUMERICAL,
            CliError::Engine(_) => EXIT_USAGE,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
