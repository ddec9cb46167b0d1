//! Extreme-eigenvalue estimation for symmetric PSD matrices.
//!
//! Small matrices (dim <= `JACOBI_DIM_LIMIT`) get a full cyclic Jacobi
//! eigendecomposition, which is exact to rounding. Larger matrices use power
//! iteration for the largest eigenvalue and shifted inverse iteration through
//! a Cholesky factor for the smallest, deflating eigenvectors that fall below
//! the rank tolerance so the reported minimum is the smallest *nonzero*
//! eigenvalue.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, CholeskyFactor, SymMatrix};

/// Eigenvalues at or below `RANK_TOL_REL * sigma_max` count as zero.
pub const RANK_TOL_REL: f64 = 1e-10;

/// Largest dimension handled by the full Jacobi path.
pub const JACOBI_DIM_LIMIT: usize = 128;

const JACOBI_MAX_SWEEPS: usize = 100;
const POWER_MAX_ITERS: usize = 20_000;
const INVERSE_MAX_ITERS: usize = 500;
const DEFLATION_CAP: usize = 32;

/// The spectral extremes used for the default penalty parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenExtremes {
    /// Smallest eigenvalue above the rank tolerance.
    pub sigma_min_nonzero: f64,
    /// Largest eigenvalue.
    pub sigma_max: f64,
}

/// Estimates the largest eigenvalue and the smallest eigenvalue above
/// `RANK_TOL_REL * sigma_max`. `tol` controls the iterative paths' stopping
/// rule (relative change of the Rayleigh quotient); the Jacobi path converges
/// to rounding regardless.
pub fn eigen_extremes(a: &SymMatrix, tol: f64) -> Result<EigenExtremes> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::OutOfRange(format!("eigen tolerance must be positive, got {tol}")));
    }
    if a.dim() <= JACOBI_DIM_LIMIT {
        extremes_from_spectrum(&symmetric_eigenvalues(a))
    } else {
        large_extremes(a, tol.max(1e-14))
    }
}

fn extremes_from_spectrum(eigs: &[f64]) -> Result<EigenExtremes> {
    let sigma_max = eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(sigma_max > 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let thresh = RANK_TOL_REL * sigma_max;
    let sigma_min_nonzero = eigs
        .iter()
        .copied()
        .filter(|&l| l > thresh)
        .fold(f64::INFINITY, f64::min);
    if !sigma_min_nonzero.is_finite() {
        return Err(Error::ZeroMatrix);
    }
    Ok(EigenExtremes { sigma_min_nonzero, sigma_max })
}

/// Full spectrum by cyclic Jacobi rotations. Exact for already-diagonal
/// input (no rotations are applied), which keeps the documented diagonal
/// examples bit-exact.
pub(crate) fn symmetric_eigenvalues(a: &SymMatrix) -> Vec<f64> {
    let d = a.dim();
    let mut m = a.as_slice().to_vec();
    if d == 1 {
        return m;
    }
    let frob = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    if frob == 0.0 {
        return vec![0.0; d];
    }
    let stop = f64::EPSILON * frob;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0f64;
        for i in 0..d {
            for j in (i + 1)..d {
                off += 2.0 * m[i * d + j] * m[i * d + j];
            }
        }
        if off.sqrt() <= stop {
            break;
        }
        for p in 0..d - 1 {
            for q in (p + 1)..d {
                let apq = m[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                // Rotation angle zeroing entry (p,q) of JᵀMJ.
                let tau = (m[q * d + q] - m[p * d + p]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (tau * tau + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let mkp = m[k * d + p];
                    let mkq = m[k * d + q];
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[p * d + k];
                    let mqk = m[q * d + k];
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..d).map(|i| m[i * d + i]).collect()
}

fn large_extremes(a: &SymMatrix, tol: f64) -> Result<EigenExtremes> {
    let sigma_max = match power_iteration_max(a, tol)? {
        Some(l) if l > 0.0 => l,
        _ => return Err(Error::ZeroMatrix),
    };
    let thresh = RANK_TOL_REL * sigma_max;

    // Factor A + eps*I; eps only steers the iteration, the Rayleigh quotient
    // is always taken on A itself.
    let mut eps = 1e-8 * sigma_max;
    let factor = loop {
        match CholeskyFactor::compute(a, eps) {
            Ok(f) => break f,
            Err(e) => {
                eps *= 100.0;
                if eps > sigma_max {
                    return Err(e);
                }
            }
        }
    };

    let d = a.dim();
    let mut y = vec![0.0f64; d];
    let mut null_basis: Vec<Vec<f64>> = Vec::new();
    for round in 0..=DEFLATION_CAP {
        let mut x = seeded_unit_vector(d, 0x1234_5678_9abc_def0 ^ (round as u64));
        project_out(&mut x, &null_basis);
        if normalize(&mut x).is_none() {
            break; // degenerate start; fall through to the exact path
        }
        let mut lambda = f64::INFINITY;
        let mut ok = false;
        for it in 0..INVERSE_MAX_ITERS {
            let mut w = x.clone();
            factor.solve_in_place(&mut w)?;
            project_out(&mut w, &null_basis);
            if normalize(&mut w).is_none() {
                break;
            }
            x = w;
            a.matvec_into(&x, &mut y);
            let new_lambda = dot(&x, &y);
            if it >= 2 && (new_lambda - lambda).abs() <= tol * new_lambda.abs().max(thresh) {
                lambda = new_lambda;
                ok = true;
                break;
            }
            lambda = new_lambda;
        }
        if ok && lambda > thresh {
            return Ok(EigenExtremes {
                sigma_min_nonzero: lambda.min(sigma_max),
                sigma_max,
            });
        }
        if !ok {
            break; // stagnated; fall through to the exact path
        }
        null_basis.push(x);
    }

    // Deflation budget exhausted (large null space) or stagnation: pay for
    // the exact decomposition rather than return a guess.
    let eigs = symmetric_eigenvalues(a);
    extremes_from_spectrum(&eigs)
}

/// Largest eigenvalue by power iteration; Ok(None) means the cap was hit
/// without the Rayleigh quotient settling (the last estimate is still
/// returned inside Some for PSD input since it only grows).
fn power_iteration_max(a: &SymMatrix, tol: f64) -> Result<Option<f64>> {
    let d = a.dim();
    let mut x = seeded_unit_vector(d, 0x9e37_79b9_7f4a_7c15);
    let mut y = vec![0.0f64; d];
    let mut lambda = f64::NEG_INFINITY;
    for it in 0..POWER_MAX_ITERS {
        a.matvec_into(&x, &mut y);
        let new_lambda = dot(&x, &y);
        let norm = norm2(&y);
        if norm == 0.0 {
            if it == 0 {
                // Start vector happened to lie in the null space; one retry.
                x = seeded_unit_vector(d, 0x6a09_e667_f3bc_c909);
                continue;
            }
            return Err(Error::ZeroMatrix);
        }
        for (xi, &yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
        if it >= 3 && (new_lambda - lambda).abs() <= tol * new_lambda.abs().max(f64::MIN_POSITIVE) {
            return Ok(Some(new_lambda));
        }
        lambda = new_lambda;
    }
    Ok(Some(lambda))
}

/// Removes the components of `x` along an orthonormal basis (two passes for
/// numerical hygiene).
fn project_out(x: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(x, q);
            for (xi, &qi) in x.iter_mut().zip(q) {
                *xi -= c * qi;
            }
        }
    }
}

fn normalize(x: &mut [f64]) -> Option<f64> {
    let n = norm2(x);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    for xi in x.iter_mut() {
        *xi /= n;
    }
    Some(n)
}

/// Deterministic dense start vector (splitmix64 stream), unit norm.
fn seeded_unit_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut state = seed;
    let mut next = move || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    let mut x: Vec<f64> = (0..dim)
        .map(|_| (next() >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        .collect();
    normalize(&mut x).expect("nonzero start vector");
    x
}
