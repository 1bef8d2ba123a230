use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("degenerate trace")]
    DegenerateTrace,

    #[error("constant trace")]
    ConstantTrace,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("class {label:?} has {count} items, need at least {needed}")]
    ClassTooSmall {
        label: String,
        count: usize,
        needed: usize,
    },

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (files, configs, arguments)
    /// rather than by a failure while running a computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Malformed { .. }
                | Error::Invalid(_)
                | Error::UnknownLabel(_)
                | Error::Json(_)
                | Error::DimensionMismatch { .. }
                | Error::ClassTooSmall { .. }
        )
    }
}
