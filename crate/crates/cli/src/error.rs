use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] fwi_core::Error),
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    /// 0 ok, 1 usage, 2 data, 3 failed check.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Data(fwi_core::Error::Parameter(_)) => 1,
            CliError::Data(_) | CliError::OracleUnavailable(_) | CliError::Write { .. } => 2,
            CliError::CheckFailed(_) => 3,
        }
    }
}
