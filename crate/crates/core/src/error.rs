use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoseError {
    #[error("pose contains a non-finite value")]
    NonFinite,
    #[error("rotation is not in SO(3): {0}")]
    NotARotation(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}:{line}: {message}")]
    FormatAt {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("sweep {got} arrived after sweep {last}; sweeps must be strictly increasing")]
    Order { last: u64, got: u64 },

    #[error("invalid pose for sweep {sweep}: {source}")]
    Pose {
        sweep: u64,
        #[source]
        source: PoseError,
    },

    #[error("evaluation input: {0}")]
    Input(String),

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

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn format_at(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::FormatAt {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
