use std::path::PathBuf;

use thiserror::Error;

use crate::data::CoefficientVector;

pub type Result<T, E = UoiError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum UoiError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error(transparent)]
    Solver(#[from] SolveError),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl UoiError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        UoiError::InvalidArgument(msg.into())
    }
}

/// Failure modes of the iterative solvers.
#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The iteration budget ran out. The last iterate is kept so callers can
    /// decide whether it is usable.
    #[error("no convergence after {iterations} iterations (max violation {violation:.3e})")]
    NotConverged {
        last_iterate: Box<CoefficientVector>,
        violation: f64,
        iterations: usize,
    },
}
