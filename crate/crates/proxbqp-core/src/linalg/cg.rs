//! Preconditioned conjugate gradients for shifted systems (A + rho*I) x = rhs.
//!
//! The preconditioner is the diagonal of the shifted matrix (Jacobi). The
//! solver accepts a warm start and returns whatever iterate it holds when the
//! iteration budget runs out — callers that can tolerate inexact solves (an
//! outer fixed-point loop, for instance) rely on that behaviour.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, SymMatrix};

/// Solves (A + rho*I) x = rhs starting from `x0`, stopping once the residual
/// 2-norm falls to `residual_tol * max(||rhs||, tiny)` or after `max_iters`
/// steps, whichever comes first. A warm start already at the solution is
/// returned unchanged, bit for bit.
pub fn cg_solve(
    a: &SymMatrix,
    rho: f64,
    rhs: &[f64],
    x0: &[f64],
    max_iters: usize,
    residual_tol: f64,
) -> Result<Vec<f64>> {
    let d = a.dim();
    if rhs.len() != d || x0.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "cg expects rhs and x0 of length {d}, got {} and {}",
            rhs.len(),
            x0.len()
        )));
    }
    if !rho.is_finite() || rho < 0.0 {
        return Err(Error::OutOfRange(format!("cg shift must be finite and >= 0, got {rho}")));
    }
    if !residual_tol.is_finite() || residual_tol <= 0.0 {
        return Err(Error::OutOfRange(format!(
            "cg residual tolerance must be positive, got {residual_tol}"
        )));
    }

    // Jacobi preconditioner: the diagonal of A + rho*I, guarded against
    // zero/negative entries so it is always a valid scaling.
    let inv_diag: Vec<f64> = (0..d)
        .map(|i| {
            let di = a.get(i, i) + rho;
            if di > 0.0 && di.is_finite() {
                1.0 / di
            } else {
                1.0
            }
        })
        .collect();

    let mut x = x0.to_vec();
    let mut ax = vec![0.0f64; d];
    a.matvec_into(&x, &mut ax);
    let mut r: Vec<f64> = rhs
        .iter()
        .zip(ax.iter().zip(&x))
        .map(|(&bi, (&axi, &xi))| bi - (axi + rho * xi))
        .collect();

    let target = residual_tol * norm2(rhs).max(f64::MIN_POSITIVE);
    if norm2(&r) <= target {
        return Ok(x); // warm start already good enough; do not perturb it
    }

    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(&ri, &mi)| ri * mi).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0f64; d];

    for _ in 0..max_iters {
        a.matvec_into(&p, &mut ap);
        for (api, &pi) in ap.iter_mut().zip(&p) {
            *api += rho * pi;
        }
        let pap = dot(&p, &ap);
        if !pap.is_finite() {
            return Err(Error::NonFinite("cg curvature".into()));
        }
        if pap <= 0.0 {
            // Numerically lost positive definiteness along p; the current
            // iterate is the best answer available.
            break;
        }
        let alpha = rz / pap;
        for ((xi, ri), (&pi, &api)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)) {
            *xi += alpha * pi;
            *ri -= alpha * api;
        }
        if norm2(&r) <= target {
            break;
        }
        for ((zi, &ri), &mi) in z.iter_mut().zip(&r).zip(&inv_diag) {
            *zi = ri * mi;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, &zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }

    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cg iterate".into()));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CholeskyFactor;

    #[test]
    fn identity_system_converges_in_one_step() {
        // (I + I) x = (2, 2) from x0 = 0 gives x = (1, 1) after one step.
        let a = SymMatrix::identity(2);
        let x = cg_solve(&a, 1.0, &[2.0, 2.0], &[0.0, 0.0], 1, 1e-12).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
    }

    #[test]
    fn warm_start_at_solution_is_untouched() {
        let a = SymMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        // rhs = (A + I) * (1, -2)
        let rhs = vec![4.0 + 1.0 - 4.0, 2.0 - 6.0 - 2.0];
        let x0 = vec![1.0, -2.0];
        let x = cg_solve(&a, 1.0, &rhs, &x0, 50, 1e-10).unwrap();
        assert_eq!(x, x0);
    }

    #[test]
    fn agrees_with_direct_solve() {
        let a = SymMatrix::from_rows(&[
            vec![5.0, 1.0, 0.5],
            vec![1.0, 4.0, -0.25],
            vec![0.5, -0.25, 3.0],
        ])
        .unwrap();
        let rho = 0.7;
        let rhs = vec![1.0, -2.0, 0.25];
        let direct = CholeskyFactor::compute(&a, rho).unwrap().solve_vec(&rhs).unwrap();
        let iterative = cg_solve(&a, rho, &rhs, &[0.0; 3], 200, 1e-12).unwrap();
        for (d, i) in direct.iter().zip(&iterative) {
            assert!((d - i).abs() < 1e-9, "direct {d} vs cg {i}");
        }
    }

    #[test]
    fn budget_exhaustion_returns_partial_iterate() {
        let a = SymMatrix::from_rows(&[vec![100.0, 0.0], vec![0.0, 0.01]]).unwrap();
        let x = cg_solve(&a, 0.0, &[100.0, 0.01], &[0.0, 0.0], 1, 1e-14).unwrap();
        assert!(x.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = SymMatrix::identity(3);
        assert!(matches!(
            cg_solve(&a, 1.0, &[1.0, 2.0], &[0.0; 3], 10, 1e-8),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn invalid_shift_is_rejected() {
        let a = SymMatrix::identity(2);
        assert!(matches!(
            cg_solve(&a, -1.0, &[1.0, 1.0], &[0.0; 2], 10, 1e-8),
            Err(Error::OutOfRange(_))
        ));
    }
}
