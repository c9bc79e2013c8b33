use thiserror::Error;

/// Failures reported by the precoding and rate models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must have full row rank")]
    RankDeficient,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("matrix has no nonzero entries")]
    ZeroMatrix,
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("error variance must be finite and non-negative, got {0}")]
    InvalidVariance(f64),
    #[error("invalid common power split {0}")]
    InvalidPowerSplit(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("feedback filter must have a unit diagonal")]
    NonUnitDiagonal,
    #[error("operation not defined for scheme {0}")]
    SchemeMismatch(&'static str),
    #[error("power split grid is empty")]
    EmptyGrid,
}

pub type Result<T> = core::result::Result<T, Error>;
