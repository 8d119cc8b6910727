//! Crate-wide error type.

use thiserror::Error;

use crate::arrange::Designation;

/// Errors produced by data loading, sampling, training, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: malformed record: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("similarity undefined: both vectors are all-zero")]
    UndefinedSimilarity,

    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{axis:?} entity {id} has no key: {reason}")]
    UndefinedKey {
        axis: Designation,
        id: u32,
        reason: &'static str,
    },

    #[error("no block label for entity {id}")]
    MissingLabel { id: u32 },

    #[error("{axis:?} entity {id} has a zero-norm embedding vector")]
    ZeroNormVector { axis: Designation, id: u32 },

    #[error("trajectory '{trajectory}' never reaches quality threshold {threshold}")]
    ThresholdUnreached { trajectory: String, threshold: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
