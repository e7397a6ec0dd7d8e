use std::path::PathBuf;

use wader_core::BackendError;

/// Errors surfaced by the command line, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or malformed input data. Exit code 1.
    #[error("{0}")]
    Invalid(String),
    /// A stage input is missing, unreadable, or from a different run. Exit code 2.
    #[error("{0}")]
    Upstream(String),
    /// A translation or scoring backend could not be reached. Exit code 3.
    #[error("{context}: {source}")]
    Backend {
        context: String,
        #[source]
        source: BackendError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Upstream(_) | CliError::Io { .. } => 2,
            CliError::Backend { .. } => 3,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    pub fn upstream(msg: impl Into<String>) -> Self {
        CliError::Upstream(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
