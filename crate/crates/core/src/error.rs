use thiserror::Error;

use crate::data::PointKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point kind mismatch: expected {expected:?}, found {found:?}")]
    KindMismatch {
        expected: PointKind,
        found: PointKind,
    },

    #[error("index {index} out of range for dataset of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error(
        "solver did not converge within {iterations} iterations (gradient mapping {residual:e})"
    )]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("score perturbation {change} at index {index} exceeds sensitivity {sensitivity}")]
    PerturbationExceedsSensitivity {
        index: usize,
        change: f64,
        sensitivity: f64,
    },

    #[error("unknown identifier `{0}`")]
    UnknownId(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
