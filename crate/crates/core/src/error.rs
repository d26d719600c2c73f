use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero-norm vector for id {0:?}")]
    ZeroNorm(String),

    #[error("query {0:?} has no relevant documents")]
    NoRelevant(String),

    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    #[error(
        "not enough rated items: {high_available} above the high threshold and {low_available} below the low threshold, {required} required per class"
    )]
    Capacity {
        required: usize,
        high_available: usize,
        low_available: usize,
    },

    #[error("judge error: {0}")]
    Judge(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
