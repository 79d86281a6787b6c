use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),
    #[error("cross-check failed: deviation {deviation:e} exceeds {tolerance:e}")]
    CrossCheckFailure { deviation: f64, tolerance: f64 },
    #[error("integer overflow: {0}")]
    Overflow(String),
    #[error("series diverges: {0}")]
    Divergence(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("insufficient truncation: certified tail {achieved:e} exceeds budget {requested:e}")]
    InsufficientTruncation { achieved: f64, requested: f64 },
    #[error("enumeration of {size} index vectors exceeds budget {budget}; use bounds-only mode")]
    EnumerationTooLarge { size: u128, budget: u64 },
    #[error("constant unavailable: {0}")]
    UnavailableConstant(String),
    #[error("truncation leak: {0}")]
    TruncationLeak(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
