use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] ionchain_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("missing prerequisite {}: {hint}", path.display())]
    MissingPrerequisite { path: PathBuf, hint: String },
}

impl CliError {
    /// Process exit code: 3 for a missing or stale upstream artifact, 2 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::MissingPrerequisite { .. } => 3,
            _ => 2,
        }
    }
}
