use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index {index} out of range for extent {len}")]
    Index { index: usize, len: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("tape state: {0}")]
    State(String),

    #[error("sequence length {len} exceeds max_len {max}")]
    Capacity { len: usize, max: usize },

    #[error("gradient check: {0}")]
    Check(String),

    #[error("mode: {0}")]
    Mode(String),

    #[error("non-finite gradient in parameter `{0}`; step aborted")]
    NonFiniteGradient(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("sampling: {0}")]
    Sampling(String),

    #[error("invalid batch: {0}")]
    InvalidBatch(String),

    #[error("config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (configs, files, flags) rather
    /// than failures while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::Config(_)
                | Error::Parse { .. }
                | Error::Io { .. }
                | Error::Mode(_)
                | Error::Sampling(_)
                | Error::InvalidBatch(_)
        )
    }
}
