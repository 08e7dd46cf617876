use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("missing annotation: {0}")]
    MissingAnnotation(String),

    #[error("skill phrase {0:?} is empty after preprocessing")]
    EmptySkill(String),

    #[error("overlapping spans [{0}, {1}) and [{2}, {3})")]
    OverlappingSpans(usize, usize, usize, usize),

    #[error("span [{start}, {end}) out of bounds for sentence of length {len}")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("embedding store: {0}")]
    Store(String),

    #[error("embedding store has no vector for {0}")]
    MissingVector(String),

    #[error("sentence id mismatch: {0}")]
    IdMismatch(String),

    #[error("unknown method {name:?} (available: {available})")]
    UnknownMethod { name: String, available: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
