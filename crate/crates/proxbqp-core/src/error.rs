use std::io;

use thiserror::Error;

/// Errors shared by the linear algebra, solver, batch, and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Input shapes do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A nonpositive pivot appeared while factorizing. The matrix is not
    /// positive definite: either A is not PSD or the shift is too small to
    /// absorb rounding in a semidefinite A.
    #[error("Cholesky factorization failed at pivot {pivot}: matrix not positive definite")]
    FactorizationFailure { pivot: usize },

    /// Every eigenvalue fell below the rank tolerance.
    #[error("matrix is numerically zero: no eigenvalue above the rank tolerance")]
    ZeroMatrix,

    /// NaN or infinity appeared where a finite value is required.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Problem data violates a construction invariant (l > u, mu <= 0, ...).
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    /// The enumeration oracle refuses dimensions above its limit.
    #[error("dimension {dim} exceeds the oracle limit of {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    /// A value lies outside its documented range.
    #[error("value out of range: {0}")]
    OutOfRange(String),

    /// A problem-set or solution file is malformed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Invariant violation that indicates a bug rather than bad input.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
