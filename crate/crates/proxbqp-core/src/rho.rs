//! Penalty parameter selection.
//!
//! The default penalty is the geometric mean of the extreme curvatures of A:
//! `rho* = sqrt(sigma_min_nonzero * sigma_max)`, where `sigma_min_nonzero` is
//! the smallest eigenvalue above the rank tolerance. Balancing the two
//! extremes keeps both the smooth update and the projection update making
//! progress; the fixed-point iteration converges for any positive penalty,
//! but iteration counts degrade away from this balance point.

use crate::error::{Error, Result};
use crate::linalg::{eigen_extremes, SymMatrix};

/// Relative tolerance handed to the eigenvalue estimator.
pub const EIGEN_TOL: f64 = 1e-6;

/// How the penalty parameter is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoPolicy {
    /// Use the given positive value as-is.
    Fixed(f64),
    /// Compute `sqrt(sigma_min_nonzero * sigma_max)` from A; 1.0 if A = 0.
    Auto,
}

impl Default for RhoPolicy {
    fn default() -> Self {
        RhoPolicy::Auto
    }
}

/// The balance-point penalty for A, or 1.0 when A is the zero matrix (every
/// positive penalty behaves identically there, since only the proximal and
/// box terms remain).
pub fn default_rho(a: &SymMatrix) -> Result<f64> {
    match eigen_extremes(a, EIGEN_TOL) {
        Ok(e) => Ok((e.sigma_min_nonzero * e.sigma_max).sqrt()),
        Err(Error::ZeroMatrix) => Ok(1.0),
        Err(e) => Err(e),
    }
}

/// Resolves a policy against a concrete matrix, validating fixed values.
pub fn resolve(policy: RhoPolicy, a: &SymMatrix) -> Result<f64> {
    match policy {
        RhoPolicy::Fixed(r) => {
            if !r.is_finite() || r <= 0.0 {
                Err(Error::OutOfRange(format!("penalty must be finite and > 0, got {r}")))
            } else {
                Ok(r)
            }
        }
        RhoPolicy::Auto => default_rho(a),
    }
}
