//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input that must be finite was NaN or infinite.
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    /// A parameter violated its domain (sign, range, or ordering).
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// The covariance matrix is not usable: duplicate locations with a zero
    /// nugget, or a failed positive-definite factorization.
    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    /// The empirical variogram retained no populated distance bins.
    #[error("insufficient pairs: every variogram bin is empty")]
    InsufficientPairs,

    /// Dataset construction or validation failed.
    #[error("dataset error: {0}")]
    Dataset(String),

    /// The closed-form breakpoint solve hit a state that positive
    /// definiteness rules out; indicates a numerical or logic fault.
    #[error("breakpoint solve failed: {0}")]
    Breakpoint(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
