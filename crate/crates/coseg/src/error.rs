use std::path::PathBuf;

/// Crate-wide error type.
///
/// The CLI maps variants onto its stable exit-code contract:
/// input problems exit 2, numeric failures exit 3.
#[derive(Debug, thiserror::Error)]
pub enum CosegError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("non-finite gradient in parameter '{0}'; step aborted")]
    NonFiniteGradient(String),

    #[error("training diverged: {0}")]
    Diverged(String),
}

impl CosegError {
    /// Exit code for the CLI contract: 2 for input errors, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CosegError::NonFiniteGradient(_) | CosegError::Diverged(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CosegError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, CosegError>;
