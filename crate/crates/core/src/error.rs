use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("Gram matrix is ill-conditioned (condition estimate {condition:.3e}); regularization ladder exhausted")]
    IllConditioned { condition: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure at iteration {iteration}: non-finite value in {field}")]
    NumericalFailure { iteration: usize, field: &'static str },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("node {index} at ({u}, {v}) lies outside the frequency grid")]
    NodeOutsideGrid { index: usize, u: f64, v: f64 },

    #[error("{path}: row {row}: {message}")]
    Parse { path: PathBuf, row: usize, message: String },

    #[error("channel {index}: {source}")]
    Channel {
        index: usize,
        #[source]
        source: Box<Error>,
    },

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

    pub(crate) fn in_channel(self, index: usize) -> Self {
        match self {
            e @ Error::Channel { .. } => e,
            e => Error::Channel {
                index,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
