use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors that stop a scenario before any certificate verdict exists. All of
/// them map to exit status 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    ConfigParse(String),
    #[error("assumption violation: {0}")]
    AssumptionViolation(String),
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Core(#[from] sisd_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::IoFailure {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        1
    }
}
