//! Upper-triangular Cholesky factorization of A + ρI and blocked triangular
//! solves against it. The factor is computed once and reused for every
//! right-hand side (the whole point of the shared-context batch solver), so
//! the number of factorizations is observable through a process-wide counter.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::linalg::{ColMatrix, SymMatrix};

static FACTORIZATION_COUNT: AtomicU64 = AtomicU64::new(0);

/// Number of Cholesky factorizations completed by this process. Tests use
/// deltas of this counter to assert the one-factorization-per-batch contract.
pub fn factorization_count() -> u64 {
    FACTORIZATION_COUNT.load(Ordering::Relaxed)
}

/// Cholesky factor R of A + ρI with RᵀR = A + ρI, R upper triangular with a
/// strictly positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    dim: usize,
    shift: f64,
    /// Row-major upper triangle R; entries strictly below the diagonal are 0.
    r: Vec<f64>,
    /// Row-major Rᵀ (lower triangle), kept so the backward solve walks
    /// contiguous memory. rt[k*dim + i] == r[i*dim + k].
    rt: Vec<f64>,
}

impl CholeskyFactor {
    /// Factorizes A + shift·I. The shift must be finite and nonnegative;
    /// shift = 0 is allowed when A itself is positive definite.
    pub fn compute(a: &SymMatrix, shift: f64) -> Result<Self> {
        if !shift.is_finite() || shift < 0.0 {
            return Err(Error::OutOfRange(format!(
                "cholesky shift must be finite and nonnegative, got {shift}"
            )));
        }
        let d = a.dim();
        let mut r = vec![0.0f64; d * d];
        for j in 0..d {
            for i in 0..=j {
                let mut sum = a.get(i, j);
                if i == j {
                    sum += shift;
                }
                for k in 0..i {
                    sum -= r[k * d + i] * r[k * d + j];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(Error::FactorizationFailure { pivot: j });
                    }
                    r[j * d + j] = sum.sqrt();
                } else {
                    r[i * d + j] = sum / r[i * d + i];
                }
            }
        }
        let mut rt = vec![0.0f64; d * d];
        for i in 0..d {
            for j in i..d {
                rt[j * d + i] = r[i * d + j];
            }
        }
        FACTORIZATION_COUNT.fetch_add(1, Ordering::Relaxed);
        Ok(Self { dim: d, shift, r, rt })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Row-major upper triangle, zeros strictly below the diagonal.
    pub fn upper_triangular(&self) -> &[f64] {
        &self.r
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.r[i * self.dim + j]
    }

    /// Solves (A + ρI)·W = RHS for one or more right-hand sides stored
    /// column-major in `data` (length must be a multiple of dim), in place.
    ///
    /// Every column runs the same scalar sequence regardless of how many
    /// columns share the call, so blocked and one-column solves agree
    /// bit-for-bit.
    pub fn solve_in_place(&self, data: &mut [f64]) -> Result<()> {
        let d = self.dim;
        if d == 0 || data.len() % d != 0 {
            return Err(Error::DimensionMismatch(format!(
                "rhs length {} is not a multiple of dim {d}",
                data.len()
            )));
        }
        for col in data.chunks_exact_mut(d) {
            // Forward: Rᵀ w = rhs. Row k of R holds R[k, k..].
            for k in 0..d {
                let wk = col[k] / self.r[k * d + k];
                col[k] = wk;
                let r_row = &self.r[k * d + k + 1..k * d + d];
                let tail = &mut col[k + 1..];
                for (c, &rkj) in tail.iter_mut().zip(r_row) {
                    *c -= wk * rkj;
                }
            }
            // Backward: R x = w. Row k of Rᵀ holds R[0..k, k] contiguously.
            for k in (0..d).rev() {
                let xk = col[k] / self.rt[k * d + k];
                col[k] = xk;
                let rt_row = &self.rt[k * d..k * d + k];
                for (c, &rik) in col[..k].iter_mut().zip(rt_row) {
                    *c -= xk * rik;
                }
            }
        }
        Ok(())
    }

    /// Solves for a single right-hand side vector.
    pub fn solve_vec(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "rhs length {} vs dim {}",
                rhs.len(),
                self.dim
            )));
        }
        let mut out = rhs.to_vec();
        self.solve_in_place(&mut out)?;
        Ok(out)
    }

    /// Solves for a whole column block.
    pub fn solve_matrix(&self, rhs: &ColMatrix) -> Result<ColMatrix> {
        if rhs.rows() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "rhs has {} rows, factor dim is {}",
                rhs.rows(),
                self.dim
            )));
        }
        let mut out = rhs.clone();
        self.solve_in_place(out.data_mut())?;
        Ok(out)
    }
}
