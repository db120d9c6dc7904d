use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
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
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid parameter: {0}")]
    Validation(String),
    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),
    #[error(transparent)]
    Core(#[from] macroq_core::Error),
}

impl CliError {
    /// 3 for numerical failures, 2 for everything the user can fix in the input.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Write { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn invalid(message: impl Into<String>) -> CliError {
    CliError::Validation(message.into())
}
