use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solver, the file formats and the batch front end.
#[derive(Debug, Error)]
pub enum QshError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("field contains NaN/Inf after step ending at t = {t}")]
    NonFinite { t: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("missing required key `{0}`")]
    MissingKey(String),

    #[error("unknown key `{key}` (line {line})")]
    UnknownKey { key: String, line: usize },

    #[error("unknown initial-data preset `{0}`")]
    UnknownPreset(String),

    #[error("bad snapshot: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl QshError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        QshError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, QshError>;
