use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Everything that can end a run early, grouped by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    ReadConfig { path: PathBuf, source: io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    /// A flag value or config section that does not fit the schema.
    #[error("{0}")]
    Schema(String),
    /// Well-formed parameters outside the physical domain.
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] clickcraft_core::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn schema(msg: impl Into<String>) -> Self {
        CliError::Schema(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    /// 1 for unreadable or malformed input, 2 for parameters outside their
    /// domain, 3 when a numerical truncation could not be certified.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ReadConfig { .. } | CliError::Parse(_) | CliError::Schema(_) | CliError::Write { .. } => 1,
            CliError::Invalid(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
        }
    }
}
