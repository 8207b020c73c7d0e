//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max |m_ij - m_ji| = {max_asymmetry:.3e}, tol = {tol:.3e})")]
    NonSymmetric { max_asymmetry: f64, tol: f64 },

    #[error("matrix does not have a unit diagonal (max |m_ii - 1| = {max_deviation:.3e})")]
    NonUnitDiagonal { max_deviation: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue = {min_eigenvalue:.6e})")]
    NonPositiveDefinite { min_eigenvalue: f64 },

    #[error("matrix has a non-positive diagonal entry at index {index}: {value:.6e}")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("covariance matrix is singular or indefinite: {0}")]
    SingularCovariance(String),

    #[error("symmetric factorization failed: {0}")]
    NumericalSingularity(String),

    #[error("design matrix is rank deficient (X'X factorization failed)")]
    RankDeficient,

    #[error("not enough draws: need {needed}, have {available}")]
    InsufficientDraws { needed: usize, available: usize },

    #[error("value outside the support of the prior: {0}")]
    OutOfSupport(String),

    #[error("non-finite sampling target: {0}")]
    NonFiniteTarget(String),

    #[error("metric subset is empty: {0}")]
    EmptySubset(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("paired runs do not match: {0}")]
    PairedRunMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
