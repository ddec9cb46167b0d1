//! Dense symmetric linear algebra: Cholesky factorization with cached reuse,
//! blocked triangular solves, extreme-eigenvalue estimation, and a
//! warm-started preconditioned conjugate-gradient solver.
//!
//! Everything here is plain `f64` on contiguous storage. Matrices are small
//! (a few hundred rows at most); the expensive dimension is the number of
//! right-hand-side columns, which is why the triangular solves accept whole
//! column blocks.

mod cg;
mod cholesky;
mod eigen;

pub use cg::cg_solve;
pub use cholesky::{factorization_count, CholeskyFactor};
pub use eigen::{eigen_extremes, EigenExtremes, JACOBI_DIM_LIMIT, RANK_TOL_REL};

#[allow(unused_imports)] // consumed by tests in other modules
pub(crate) use eigen::symmetric_eigenvalues;

use crate::error::{Error, Result};

/// Relative asymmetry tolerated by `SymMatrix::new` before rejecting the
/// input; accepted matrices are mirrored from the upper triangle so the
/// stored entries are exactly symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A dense symmetric matrix with exactly symmetric storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    /// Row-major D×D entries; entries[i*D + j] == entries[j*D + i] exactly.
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds a symmetric matrix from row-major entries.
    ///
    /// Entries must be finite and symmetric within `SYMMETRY_TOL` relative to
    /// the largest magnitude; the upper triangle is mirrored into the lower
    /// one so the invariant holds bit-exactly.
    pub fn new(dim: usize, mut data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidProblem("matrix dimension must be >= 1".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {}x{} = {} entries, got {}",
                dim,
                dim,
                dim * dim,
                data.len()
            )));
        }
        let mut max_abs = 0.0f64;
        for &x in &data {
            if !x.is_finite() {
                return Err(Error::NonFinite("matrix entries".into()));
            }
            max_abs = max_abs.max(x.abs());
        }
        let tol = SYMMETRY_TOL * (1.0 + max_abs);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let upper = data[i * dim + j];
                let lower = data[j * dim + i];
                if (upper - lower).abs() > tol {
                    return Err(Error::InvalidProblem(format!(
                        "matrix not symmetric at ({i},{j}): {upper} vs {lower}"
                    )));
                }
                data[j * dim + i] = upper;
            }
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix from nested rows (convenience for tests and bindings).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "row length {} in a {}-row matrix",
                    row.len(),
                    dim
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        let dim = entries.len();
        let mut m = Self::zeros(dim);
        for (i, &x) in entries.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite("diagonal entries".into()));
            }
            m.data[i * dim + i] = x;
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    /// out = A·x.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.matvec_into(x, &mut out);
        out
    }

    /// Scales every entry by `c` (spectrum scales by the same factor).
    pub fn scaled(&self, c: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| c * x).collect() }
    }
}

/// A dense column-major matrix; column j is the contiguous slice
/// `data[j*rows .. (j+1)*rows]`. Used for right-hand-side blocks and batch
/// iterates, where per-column access dominates.
#[derive(Debug, Clone, PartialEq)]
pub struct ColMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ColMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {rows}x{cols} = {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds from per-column vectors, all of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows * cols);
        for (j, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(Error::DimensionMismatch(format!(
                    "column {j} has length {}, expected {rows}",
                    col.len()
                )));
            }
            data.extend_from_slice(col);
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[j * self.rows + i] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
