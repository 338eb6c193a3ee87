use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SwagError>;

#[derive(Debug, Error)]
pub enum SwagError {
    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("malformed draws container: {0}")]
    Format(String),

    #[error("numerical breakdown in {step}: {source}")]
    Numerical {
        step: &'static str,
        #[source]
        source: Box<SwagError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SwagError {
    pub(crate) fn in_step(self, step: &'static str) -> Self {
        SwagError::Numerical {
            step,
            source: Box::new(self),
        }
    }
}
