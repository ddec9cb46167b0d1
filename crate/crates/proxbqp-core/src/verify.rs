//! Independent correctness oracles.
//!
//! Two checks live here: a first-order (KKT) residual for any candidate
//! solution, and an exact small-dimension solver that enumerates active
//! sets. Both are deliberately independent of the iterative solver's code
//! paths — the oracle solves its reduced systems with its own Gaussian
//! elimination rather than the `linalg` factorizations — so agreement
//! between solver and oracle is evidence, not tautology.

use crate::error::{Error, Result};
use crate::solver::ProxBQProblem;

/// A coordinate counts as sitting on a bound when within this distance.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Largest dimension `oracle_solve` accepts (the enumeration is 3^D).
pub const ORACLE_DIM_LIMIT: usize = 10;

/// First-order optimality report for a candidate z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// Max over coordinates of the stationarity violation: with
    /// g = A·z − b + μ(z − v), the violation is |g_d| at interior
    /// coordinates, max(0, −g_d) at the lower bound, max(0, g_d) at the
    /// upper bound, and 0 where the bounds pin the coordinate (l_d = u_d).
    pub stationarity_residual: f64,
    /// Max over coordinates of max(0, l_d − z_d, z_d − u_d).
    pub feasibility_violation: f64,
    /// max(stationarity_residual, feasibility_violation).
    pub max_residual: f64,
}

/// Measures how far z is from satisfying the optimality conditions.
pub fn kkt_residual(problem: &ProxBQProblem, z: &[f64]) -> Result<KktReport> {
    let d = problem.dim();
    if z.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "kkt_residual got z of length {}, expected {d}",
            z.len()
        )));
    }
    let mut g = problem.a().matvec(z);
    let mu = problem.mu();
    for i in 0..d {
        g[i] += -problem.b()[i] + mu * (z[i] - problem.v()[i]);
    }

    let mut stationarity = 0.0f64;
    let mut infeasibility = 0.0f64;
    for i in 0..d {
        let (l, u, zi, gi) = (problem.lower()[i], problem.upper()[i], z[i], g[i]);
        let at_lower = (zi - l).abs() <= BOUNDARY_TOL;
        let at_upper = (zi - u).abs() <= BOUNDARY_TOL;
        let violation = match (at_lower, at_upper) {
            (true, true) => 0.0, // pinned: any gradient is optimal
            (true, false) => (-gi).max(0.0),
            (false, true) => gi.max(0.0),
            (false, false) => gi.abs(),
        };
        stationarity = stationarity.max(violation);
        infeasibility = infeasibility.max((l - zi).max(zi - u).max(0.0));
    }
    Ok(KktReport {
        stationarity_residual: stationarity,
        feasibility_violation: infeasibility,
        max_residual: stationarity.max(infeasibility),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CoordState {
    Free,
    AtLower,
    AtUpper,
}

/// Exact solve by enumerating every assignment of coordinates to
/// {free, at lower bound, at upper bound} and keeping the assignment whose
/// reduced solve passes the feasibility and gradient-sign conditions. The
/// objective is strictly convex (μ > 0), so exactly one assignment passes on
/// nondegenerate data; degenerate ties are accepted after checking that the
/// tied candidates agree numerically.
pub fn oracle_solve(problem: &ProxBQProblem) -> Result<Vec<f64>> {
    let candidates = oracle_candidates(problem)?;
    match candidates.split_first() {
        None => Err(Error::Internal(
            "active-set enumeration found no optimal assignment".into(),
        )),
        Some((first, rest)) => {
            let scale = 1.0
                + first
                    .iter()
                    .map(|x| x.abs())
                    .fold(0.0f64, f64::max);
            for other in rest {
                let diff = first
                    .iter()
                    .zip(other)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                if diff > 1e-9 * scale {
                    return Err(Error::Internal(format!(
                        "degenerate assignments disagree by {diff:.3e}"
                    )));
                }
            }
            Ok(first.clone())
        }
    }
}

/// All assignments that pass the optimality checks (usually exactly one).
pub(crate) fn oracle_candidates(problem: &ProxBQProblem) -> Result<Vec<Vec<f64>>> {
    let d = problem.dim();
    if d > ORACLE_DIM_LIMIT {
        return Err(Error::DimensionTooLarge { dim: d, max: ORACLE_DIM_LIMIT });
    }
    let (a, b, v, l, u, mu) = (
        problem.a(),
        problem.b(),
        problem.v(),
        problem.lower(),
        problem.upper(),
        problem.mu(),
    );

    // Scale references for the sign/feasibility tolerances, so instances
    // with huge bounds or coefficients are judged proportionally.
    let data_scale = 1.0
        + a.max_abs()
        + b.iter().chain(v).chain(l).chain(u).map(|x| x.abs()).fold(0.0f64, f64::max);
    let feas_tol = 1e-9 * data_scale;

    let mut states = vec![CoordState::Free; d];
    let mut candidates = Vec::new();
    let total = 3usize.pow(d as u32);
    'assignments: for code in 0..total {
        let mut rem = code;
        for s in states.iter_mut() {
            *s = match rem % 3 {
                0 => CoordState::Free,
                1 => CoordState::AtLower,
                _ => CoordState::AtUpper,
            };
            rem /= 3;
        }

        // Fixed coordinates take their bound value; free ones solve the
        // reduced strictly convex system (A + μI)_FF x_F = (b + μv − A·fixed)_F.
        let free: Vec<usize> = (0..d).filter(|&i| states[i] == CoordState::Free).collect();
        let mut z = vec![0.0f64; d];
        for i in 0..d {
            z[i] = match states[i] {
                CoordState::AtLower => l[i],
                CoordState::AtUpper => u[i],
                CoordState::Free => 0.0,
            };
        }
        if !free.is_empty() {
            let k = free.len();
            let mut m = vec![0.0f64; k * k];
            let mut rhs = vec![0.0f64; k];
            for (r, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    m[r * k + c] = a.get(i, j) + if i == j { mu } else { 0.0 };
                }
                let mut acc = b[i] + mu * v[i];
                for j in 0..d {
                    if states[j] != CoordState::Free {
                        acc -= a.get(i, j) * z[j];
                    }
                }
                rhs[r] = acc;
            }
            match gauss_solve(&mut m, &mut rhs) {
                Some(()) => {
                    for (r, &i) in free.iter().enumerate() {
                        z[i] = rhs[r];
                    }
                }
                None => continue 'assignments, // singular reduced system
            }
        }

        // Feasibility of the free coordinates.
        for &i in &free {
            if z[i] < l[i] - feas_tol || z[i] > u[i] + feas_tol {
                continue 'assignments;
            }
        }

        // Gradient sign conditions at the fixed coordinates.
        let mut g = a.matvec(&z);
        let zmax = z.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
        let grad_tol = 1e-9 * (1.0 + a.max_abs() * zmax + data_scale);
        for i in 0..d {
            g[i] += -b[i] + mu * (z[i] - v[i]);
            let ok = match states[i] {
                CoordState::Free => true, // exact stationarity by construction
                CoordState::AtLower => {
                    // Pinned coordinates (l = u) accept any gradient.
                    l[i] == u[i] || g[i] >= -grad_tol
                }
                CoordState::AtUpper => l[i] == u[i] || g[i] <= grad_tol,
            };
            if !ok {
                continue 'assignments;
            }
        }
        candidates.push(z);
    }
    Ok(candidates)
}

/// Gaussian elimination with partial pivoting on a dense row-major k×k
/// system; `rhs` receives the solution. Returns None on a (numerically)
/// singular pivot. Private to this module so the oracle shares no solve code
/// with the implementation under test.
fn gauss_solve(m: &mut [f64], rhs: &mut [f64]) -> Option<()> {
    let k = rhs.len();
    debug_assert_eq!(m.len(), k * k);
    let scale = m.iter().map(|x| x.abs()).fold(0.0f64, f64::max).max(1.0);
    for col in 0..k {
        let pivot_row = (col..k)
            .max_by(|&r1, &r2| m[r1 * k + col].abs().total_cmp(&m[r2 * k + col].abs()))?;
        if m[pivot_row * k + col].abs() <= 1e-14 * scale {
            return None;
        }
        if pivot_row != col {
            for j in 0..k {
                m.swap(col * k + j, pivot_row * k + j);
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = m[col * k + col];
        for row in (col + 1)..k {
            let factor = m[row * k + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..k {
                m[row * k + j] -= factor * m[col * k + j];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    for col in (0..k).rev() {
        let mut acc = rhs[col];
        for j in (col + 1)..k {
            acc -= m[col * k + j] * rhs[j];
        }
        rhs[col] = acc / m[col * k + col];
    }
    Some(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;
    use std::sync::Arc;

    fn problem(
        a: SymMatrix,
        b: Vec<f64>,
        v: Vec<f64>,
        l: Vec<f64>,
        u: Vec<f64>,
        mu: f64,
    ) -> ProxBQProblem {
        ProxBQProblem::new(Arc::new(a), b, v, l, u, mu).unwrap()
    }

    fn problem_1d(a: f64, b: f64, mu: f64, v: f64, l: f64, u: f64) -> ProxBQProblem {
        problem(
            SymMatrix::diagonal(&[a]).unwrap(),
            vec![b],
            vec![v],
            vec![l],
            vec![u],
            mu,
        )
    }

    /// Closed-form scalar optimum: median(l, u, (b + mu*v)/(a + mu)).
    fn scalar_optimum(a: f64, b: f64, mu: f64, v: f64, l: f64, u: f64) -> f64 {
        ((b + mu * v) / (a + mu)).max(l).min(u)
    }

    // -- kkt_residual ----------------------------------------------------------

    #[test]
    fn boundary_point_with_zero_gradient_has_zero_residual() {
        // g = 1*1 - 0 + 1*(1 - 2) = 0 at the upper bound: degenerate-optimal.
        let p = problem_1d(1.0, 0.0, 1.0, 2.0, 0.0, 1.0);
        let r = kkt_residual(&p, &[1.0]).unwrap();
        assert_eq!(r.stationarity_residual, 0.0);
        assert_eq!(r.feasibility_violation, 0.0);
        assert_eq!(r.max_residual, 0.0);
    }

    #[test]
    fn exact_interior_optimum_has_tiny_residual() {
        // (A + mu*I) z = b + mu*v solved by hand: z = (0.5, -0.125); both
        // coordinates interior, each gradient term cancels exactly.
        let p = problem(
            SymMatrix::diagonal(&[2.0, 3.0]).unwrap(),
            vec![1.0, -1.0],
            vec![0.5, 0.5],
            vec![-1.0, -1.0],
            vec![1.0, 1.0],
            1.0,
        );
        let r = kkt_residual(&p, &[0.5, -0.125]).unwrap();
        assert!(r.stationarity_residual <= 1e-12);
        assert_eq!(r.feasibility_violation, 0.0);
    }

    #[test]
    fn infeasible_point_is_flagged() {
        let p = problem_1d(1.0, 0.0, 1.0, 0.5, 0.0, 1.0);
        let r = kkt_residual(&p, &[1.5]).unwrap();
        assert!(r.feasibility_violation > 0.0);
        assert_eq!(r.feasibility_violation, 0.5);
        assert_eq!(r.max_residual, r.max_residual.max(r.feasibility_violation));
    }

    #[test]
    fn pinned_coordinate_contributes_no_stationarity() {
        let p = problem_1d(1.0, 100.0, 1.0, -50.0, 0.25, 0.25);
        let r = kkt_residual(&p, &[0.25]).unwrap();
        assert_eq!(r.stationarity_residual, 0.0);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let p = problem_1d(1.0, 0.0, 1.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            kkt_residual(&p, &[0.0, 0.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    // -- oracle_solve -----------------------------------------------------------

    #[test]
    fn scalar_cases_match_the_closed_form() {
        let cases = [
            (2.0, 0.0, 1.0, 0.5, 0.0, 1.0),   // interior: 1/6
            (1.0, 10.0, 1.0, 0.0, 0.0, 1.0),  // clamped to upper
            (1.0, -10.0, 1.0, 0.0, 0.0, 1.0), // clamped to lower
            (0.0, 0.0, 2.0, 0.7, 0.0, 1.0),   // semidefinite A: prox of v
            (3.0, 1.0, 0.5, -4.0, -2.0, 2.0), // interior, negative side
        ];
        for (a, b, mu, v, l, u) in cases {
            let p = problem_1d(a, b, mu, v, l, u);
            let z = oracle_solve(&p).unwrap();
            let want = scalar_optimum(a, b, mu, v, l, u);
            assert!(
                (z[0] - want).abs() <= 1e-12,
                "case ({a},{b},{mu},{v},{l},{u}): {} vs {want}",
                z[0]
            );
        }
    }

    #[test]
    fn pinned_scalar_returns_the_pin() {
        let p = problem_1d(2.0, -7.0, 1.0, 3.0, 0.4, 0.4);
        assert_eq!(oracle_solve(&p).unwrap(), vec![0.4]);
    }

    #[test]
    fn huge_bounds_reduce_to_the_unconstrained_solve() {
        // (A + I) z = b + v with A = [[4,2],[2,3]]:
        // [[5,2],[2,4]] z = (1.1, -0.8)  =>  z = (0.375, -0.3875).
        let p = problem(
            SymMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap(),
            vec![1.0, -1.0],
            vec![0.1, 0.2],
            vec![-1e6, -1e6],
            vec![1e6, 1e6],
            1.0,
        );
        let z = oracle_solve(&p).unwrap();
        assert!((z[0] - 0.375).abs() <= 1e-9, "z0 = {}", z[0]);
        assert!((z[1] + 0.3875).abs() <= 1e-9, "z1 = {}", z[1]);
    }

    #[test]
    fn strong_pull_finds_the_upper_active_pair() {
        let p = problem(
            SymMatrix::identity(2),
            vec![10.0, 10.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            1.0,
        );
        assert_eq!(oracle_solve(&p).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn oracle_output_satisfies_kkt() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for trial in 0..30 {
            let d = 1 + trial % 5;
            let a = crate::synth::random_spd_cond(d, 100.0, &mut rng).unwrap();
            let b = crate::synth::gaussian_vec(d, &mut rng);
            let v = crate::synth::gaussian_vec(d, &mut rng);
            let (l, u) = crate::synth::sorted_gaussian_bounds(d, &mut rng);
            let p = problem(a, b, v, l, u, 1.0);
            let z = oracle_solve(&p).unwrap();
            let r = kkt_residual(&p, &z).unwrap();
            assert!(r.max_residual <= 1e-9, "trial {trial}: residual {}", r.max_residual);
        }
    }

    #[test]
    fn nondegenerate_instances_have_exactly_one_candidate() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for trial in 0..20 {
            let d = 1 + trial % 4;
            let a = crate::synth::random_spd_cond(d, 10.0, &mut rng).unwrap();
            let b = crate::synth::gaussian_vec(d, &mut rng);
            let v = crate::synth::gaussian_vec(d, &mut rng);
            let (l, u) = crate::synth::sorted_gaussian_bounds(d, &mut rng);
            let p = problem(a, b, v, l, u, 1.0);
            let candidates = oracle_candidates(&p).unwrap();
            assert_eq!(candidates.len(), 1, "trial {trial}");
        }
    }

    #[test]
    fn dimension_limit_is_enforced() {
        let d = ORACLE_DIM_LIMIT + 1;
        let p = problem(
            SymMatrix::identity(d),
            vec![0.0; d],
            vec![0.0; d],
            vec![0.0; d],
            vec![1.0; d],
            1.0,
        );
        assert!(matches!(
            oracle_solve(&p),
            Err(Error::DimensionTooLarge { dim, max: ORACLE_DIM_LIMIT }) if dim == d
        ));
    }

    #[test]
    fn semidefinite_rank_one_matrix_is_handled() {
        // A = [[1,1],[1,1]] is PSD rank 1; A + mu*I keeps the reduced systems
        // nonsingular for every active set.
        let p = problem(
            SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap(),
            vec![0.5, -0.5],
            vec![0.5, 0.5],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            1.0,
        );
        let z = oracle_solve(&p).unwrap();
        let r = kkt_residual(&p, &z).unwrap();
        assert!(r.max_residual <= 1e-9);
    }

    proptest::proptest! {
        /// Scalar oracle vs closed form over a broad parameter box.
        #[test]
        fn scalar_oracle_matches_closed_form(
            a in 0.0f64..10.0,
            b in -5.0f64..5.0,
            mu in 0.05f64..20.0,
            v in -5.0f64..5.0,
            l in -3.0f64..3.0,
            gap in 0.0f64..4.0,
        ) {
            let u = l + gap;
            let p = problem_1d(a, b, mu, v, l, u);
            let z = oracle_solve(&p).unwrap();
            let want = scalar_optimum(a, b, mu, v, l, u);
            proptest::prop_assert!((z[0] - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }
    }
}
