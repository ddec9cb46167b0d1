//! Fixed-point iteration for a single proximal bound-constrained QP
//!
//!   minimize  ½ xᵀA x − bᵀx + (μ/2)‖x − v‖²   subject to  l ≤ x ≤ u,
//!
//! split into a smooth update, a box-projected proximal update, and a dual
//! update, applied in order and modifying the variables immediately:
//!
//!   x ← (A + ρI)⁻¹ (b + ρ(z − ζ))
//!   z ← median(l, u, (μv + ρ(x + ζ)) / (μ + ρ))
//!   ζ ← ζ + x − z
//!
//! The iteration converges for any penalty ρ > 0 because the objective is
//! strictly convex (μ > 0); the `rho` module supplies the balance point ρ*
//! that converges fastest in practice. `z` is feasible after every update by
//! construction, so the solver can stop at any time with a usable answer.
//!
//! The elementwise update arithmetic lives in tiny shared helpers
//! ([`clamp1`], [`x_rhs1`], [`z_vertex1`]) that the batch module reuses, so a
//! batch of one reproduces this solver bit for bit.

use std::sync::Arc;

use crate::batch::{ContextBackend, SharedContext};
use crate::error::{Error, Result};
use crate::linalg::{cg_solve, SymMatrix};
use crate::rho::RhoPolicy;
use crate::verify;

/// Linear-solve strategy for the smooth update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Cached triangular factorization; exact solves.
    Cholesky,
    /// Warm-started, diagonally preconditioned conjugate gradients with a
    /// small iteration cap; inexact solves that an outer loop tolerates.
    ConjugateGradient,
}

/// Stopping rule evaluated after every iteration.
///
/// Both variants combine the iterate change max|Δz| with the consensus
/// residual max|x − z| (zero exactly at a fixed point), so a stop certifies
/// convergence rather than a single motionless iteration; z pinned at a bound
/// while the multiplier is still accumulating does not count as converged.
/// The previous iterate starts at the origin, so the first iteration is
/// compared against zero rather than the starting point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopMetric {
    /// max(max_d |z_d − z_d_prev|, max_d |x_d − z_d|) < tol.
    MaxAbsChange,
    /// The same quantity divided by (1 + max_d |z_d|).
    RelativeChange,
}

/// Solver parameters. `Default` gives the documented defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub rho: RhoPolicy,
    pub tol: f64,
    pub max_iters: usize,
    pub backend: Backend,
    pub stop_metric: StopMetric,
    /// Inner-iteration cap per smooth update (ConjugateGradient backend).
    pub cg_inner_iters: usize,
    /// Residual tolerance that can end an inner CG solve before the cap.
    pub cg_residual_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: RhoPolicy::Auto,
            tol: 1e-5,
            max_iters: 10_000,
            backend: Backend::Cholesky,
            stop_metric: StopMetric::MaxAbsChange,
            cg_inner_iters: 5,
            cg_residual_tol: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::OutOfRange(format!("tol must be finite and > 0, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::OutOfRange("max_iters must be >= 1".into()));
        }
        if self.cg_inner_iters == 0 {
            return Err(Error::OutOfRange("cg_inner_iters must be >= 1".into()));
        }
        if !self.cg_residual_tol.is_finite() || self.cg_residual_tol <= 0.0 {
            return Err(Error::OutOfRange(format!(
                "cg_residual_tol must be finite and > 0, got {}",
                self.cg_residual_tol
            )));
        }
        Ok(())
    }
}

/// How a solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxItersReached,
}

/// Result of a solve. `z` is feasible regardless of `status`.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub z: Vec<f64>,
    pub iterations: usize,
    pub status: Status,
    /// Max of the stationarity and feasibility residuals at `z`.
    pub kkt_residual: f64,
}

/// One proximal bound-constrained QP. The matrix is shared by reference so a
/// batch of problems can point at a single A.
#[derive(Debug, Clone)]
pub struct ProxBQProblem {
    a: Arc<SymMatrix>,
    b: Vec<f64>,
    v: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    mu: f64,
}

impl ProxBQProblem {
    pub fn new(
        a: Arc<SymMatrix>,
        b: Vec<f64>,
        v: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        mu: f64,
    ) -> Result<Self> {
        let d = a.dim();
        for (name, vec) in [("b", &b), ("v", &v), ("l", &lower), ("u", &upper)] {
            if vec.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has length {}, expected {d}",
                    vec.len()
                )));
            }
            if let Some(i) = vec.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidProblem(format!("{name}[{i}] is not finite")));
            }
        }
        if let Some(i) = lower.iter().zip(&upper).position(|(l, u)| l > u) {
            return Err(Error::InvalidProblem(format!(
                "lower bound exceeds upper bound at coordinate {i}: {} > {}",
                lower[i], upper[i]
            )));
        }
        if !mu.is_finite() || mu <= 0.0 {
            return Err(Error::InvalidProblem(format!("mu must be finite and > 0, got {mu}")));
        }
        Ok(ProxBQProblem { a, b, v, lower, upper, mu })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }
    pub fn a(&self) -> &SymMatrix {
        &self.a
    }
    pub fn a_arc(&self) -> &Arc<SymMatrix> {
        &self.a
    }
    pub fn b(&self) -> &[f64] {
        &self.b
    }
    pub fn v(&self) -> &[f64] {
        &self.v
    }
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// Mutable iteration state. `zeta` is the scaled dual (y/ρ); the unscaled
/// multiplier is recoverable as ρ·ζ.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub zeta: Vec<f64>,
    pub iterations_done: usize,
}

impl SolverState {
    /// Cold start: z is the proximal center clamped into the box (feasible
    /// from iteration zero even when v lies outside), ζ = 0, and x = z − ζ
    /// (the first smooth update's warm start under the CG backend).
    pub fn cold(problem: &ProxBQProblem) -> Self {
        let z: Vec<f64> = problem
            .v
            .iter()
            .zip(problem.lower.iter().zip(&problem.upper))
            .map(|(&v, (&l, &u))| clamp1(l, u, v))
            .collect();
        let zeta = vec![0.0; z.len()];
        SolverState { x: z.clone(), z, zeta, iterations_done: 0 }
    }

    /// Warm start from a previous solve's (z, ζ). z is clamped into the
    /// current box so the feasibility invariant holds even if the bounds
    /// changed between solves.
    pub fn warm(problem: &ProxBQProblem, z: &[f64], zeta: &[f64]) -> Result<Self> {
        let d = problem.dim();
        if z.len() != d || zeta.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "warm start has lengths {} and {}, expected {d}",
                z.len(),
                zeta.len()
            )));
        }
        if z.iter().chain(zeta).any(|x| !x.is_finite()) {
            return Err(Error::InvalidProblem("warm start contains non-finite values".into()));
        }
        let z: Vec<f64> = z
            .iter()
            .zip(problem.lower.iter().zip(&problem.upper))
            .map(|(&t, (&l, &u))| clamp1(l, u, t))
            .collect();
        let x: Vec<f64> = z.iter().zip(zeta).map(|(&zi, &yi)| zi - yi).collect();
        Ok(SolverState { x, z, zeta: zeta.to_vec(), iterations_done: 0 })
    }
}

// ---------------------------------------------------------------------------
// Elementwise update arithmetic, shared verbatim with the batch module so the
// blocked and per-problem paths produce identical floating-point sequences.
// ---------------------------------------------------------------------------

/// median(l, u, t) for one coordinate. With l = u this pins to that value.
#[inline]
pub(crate) fn clamp1(l: f64, u: f64, t: f64) -> f64 {
    t.max(l).min(u)
}

/// Right-hand side of the smooth update for one coordinate.
#[inline]
pub(crate) fn x_rhs1(b: f64, rho: f64, z: f64, zeta: f64) -> f64 {
    b + rho * (z - zeta)
}

/// Unconstrained minimizer of the separable z-subproblem for one coordinate
/// (the parabola vertex); the projected update is its median with the bounds.
#[inline]
pub(crate) fn z_vertex1(mu: f64, v: f64, rho: f64, x: f64, zeta: f64) -> f64 {
    (mu * v + rho * (x + zeta)) / (mu + rho)
}

/// Elementwise median of three vectors: out[d] = min(u[d], max(l[d], t[d])).
pub fn median3(lower: &[f64], upper: &[f64], t: &[f64]) -> Result<Vec<f64>> {
    if lower.len() != upper.len() || lower.len() != t.len() {
        return Err(Error::DimensionMismatch(format!(
            "median3 got lengths {}, {}, {}",
            lower.len(),
            upper.len(),
            t.len()
        )));
    }
    Ok(lower
        .iter()
        .zip(upper.iter().zip(t))
        .map(|(&l, (&u, &ti))| clamp1(l, u, ti))
        .collect())
}

/// Smooth update: x = (A + ρI)⁻¹ (b + ρ(z − ζ)), exactly (Cholesky) or
/// approximately (CG warm-started from the previous x).
pub fn x_update(
    ctx: &SharedContext,
    b: &[f64],
    z: &[f64],
    zeta: &[f64],
    x_prev: &[f64],
) -> Result<Vec<f64>> {
    let mut x = x_prev.to_vec();
    let mut scratch = Vec::new();
    x_update_in_place(ctx, b, z, zeta, &mut x, &mut scratch)?;
    Ok(x)
}

/// In-place smooth update. On entry `x` holds the previous iterate (the CG
/// warm start); on exit it holds the new one. `scratch` is reused between
/// calls to keep the hot loop allocation-free.
pub(crate) fn x_update_in_place(
    ctx: &SharedContext,
    b: &[f64],
    z: &[f64],
    zeta: &[f64],
    x: &mut [f64],
    scratch: &mut Vec<f64>,
) -> Result<()> {
    let d = ctx.a().dim();
    if b.len() != d || z.len() != d || zeta.len() != d || x.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "x_update expects vectors of length {d}, got b={}, z={}, zeta={}, x={}",
            b.len(),
            z.len(),
            zeta.len(),
            x.len()
        )));
    }
    let rho = ctx.rho();
    match ctx.backend() {
        ContextBackend::Cholesky(factor) => {
            for ((xi, &bi), (&zi, &yi)) in x.iter_mut().zip(b).zip(z.iter().zip(zeta)) {
                *xi = x_rhs1(bi, rho, zi, yi);
            }
            factor.solve_in_place(x)
        }
        ContextBackend::ConjugateGradient { inner_iters, residual_tol } => {
            scratch.clear();
            scratch.extend(
                b.iter()
                    .zip(z.iter().zip(zeta))
                    .map(|(&bi, (&zi, &yi))| x_rhs1(bi, rho, zi, yi)),
            );
            let solved = cg_solve(ctx.a(), rho, scratch, x, *inner_iters, *residual_tol)?;
            x.copy_from_slice(&solved);
            Ok(())
        }
    }
}

/// Projected proximal update: z = median(l, u, (μv + ρ(x + ζ))/(μ + ρ)).
/// The result is feasible for any input.
pub fn z_update(problem: &ProxBQProblem, rho: f64, x: &[f64], zeta: &[f64]) -> Result<Vec<f64>> {
    let d = problem.dim();
    if x.len() != d || zeta.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "z_update expects vectors of length {d}, got x={}, zeta={}",
            x.len(),
            zeta.len()
        )));
    }
    let mu = problem.mu;
    Ok((0..d)
        .map(|i| {
            clamp1(
                problem.lower[i],
                problem.upper[i],
                z_vertex1(mu, problem.v[i], rho, x[i], zeta[i]),
            )
        })
        .collect())
}

/// Dual update: ζ = ζ + x − z.
pub fn dual_update(zeta: &[f64], x: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    if x.len() != zeta.len() || z.len() != zeta.len() {
        return Err(Error::DimensionMismatch(format!(
            "dual_update expects equal lengths, got zeta={}, x={}, z={}",
            zeta.len(),
            x.len(),
            z.len()
        )));
    }
    Ok(zeta
        .iter()
        .zip(x.iter().zip(z))
        .map(|(&yi, (&xi, &zi))| yi + xi - zi)
        .collect())
}

/// One full iteration: smooth update, then the projected update using the
/// *new* x, then the dual update using the new x and z. The in-order
/// (Gauss-Seidel-style) application is essential; sweeping with stale values
/// computes a different, slower iteration.
pub fn step(problem: &ProxBQProblem, ctx: &SharedContext, state: &mut SolverState) -> Result<()> {
    let mut scratch = Vec::new();
    step_in_place(problem, ctx, state, &mut scratch)
}

pub(crate) fn step_in_place(
    problem: &ProxBQProblem,
    ctx: &SharedContext,
    state: &mut SolverState,
    scratch: &mut Vec<f64>,
) -> Result<()> {
    x_update_in_place(ctx, &problem.b, &state.z, &state.zeta, &mut state.x, scratch)?;
    let (mu, rho) = (problem.mu, ctx.rho());
    for i in 0..problem.dim() {
        let zi = clamp1(
            problem.lower[i],
            problem.upper[i],
            z_vertex1(mu, problem.v[i], rho, state.x[i], state.zeta[i]),
        );
        state.z[i] = zi;
        state.zeta[i] += state.x[i] - zi;
    }
    state.iterations_done += 1;
    Ok(())
}

/// Stop-rule value for the latest iteration.
///
/// Combines the iterate change max|z - z_prev| with the consensus residual
/// max|x - z|. At a fixed point of the iteration x equals z exactly, so the
/// consensus term vanishes at convergence; away from one it stays large even
/// when z itself is momentarily pinned at a bound, which prevents a stop on
/// an iterate that merely failed to move while the multiplier was still
/// accumulating.
pub(crate) fn stop_value(metric: StopMetric, z: &[f64], z_prev: &[f64], x: &[f64]) -> f64 {
    let dmax = z
        .iter()
        .zip(z_prev)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let cmax = z
        .iter()
        .zip(x)
        .map(|(zi, xi)| (xi - zi).abs())
        .fold(0.0f64, f64::max);
    let raw = dmax.max(cmax);
    match metric {
        StopMetric::MaxAbsChange => raw,
        StopMetric::RelativeChange => {
            let zmax = z.iter().map(|a| a.abs()).fold(0.0f64, f64::max);
            raw / (1.0 + zmax)
        }
    }
}

/// Solves one problem. Cold start (warm = None) initializes z to the clamped
/// proximal center and ζ = 0; a warm start reuses (z, ζ) from an earlier
/// solve of a nearby problem. The feasible z is returned even when the
/// iteration budget runs out.
pub fn solve(
    problem: &ProxBQProblem,
    config: &SolverConfig,
    warm: Option<(&[f64], &[f64])>,
) -> Result<Solution> {
    solve_with_state(problem, config, warm).map(|(solution, _)| solution)
}

/// Like [`solve`], but also returns the final iteration state so the caller
/// can warm-start a follow-up solve with (state.z, state.zeta).
pub fn solve_with_state(
    problem: &ProxBQProblem,
    config: &SolverConfig,
    warm: Option<(&[f64], &[f64])>,
) -> Result<(Solution, SolverState)> {
    config.validate()?;
    let rho = crate::rho::resolve(config.rho, problem.a())?;
    let ctx = SharedContext::new(Arc::clone(&problem.a), rho, config)?;
    solve_in_context(problem, &ctx, config, warm)
}

/// Solves one problem against a prebuilt shared context (the batch module's
/// per-column path). The context must have been built from the problem's A.
pub fn solve_in_context(
    problem: &ProxBQProblem,
    ctx: &SharedContext,
    config: &SolverConfig,
    warm: Option<(&[f64], &[f64])>,
) -> Result<(Solution, SolverState)> {
    config.validate()?;
    if ctx.a().dim() != problem.dim() {
        return Err(Error::DimensionMismatch(format!(
            "context was built for dimension {}, problem has {}",
            ctx.a().dim(),
            problem.dim()
        )));
    }
    debug_assert!(
        Arc::ptr_eq(ctx.a_arc(), &problem.a) || ctx.a().as_slice() == problem.a().as_slice(),
        "context matrix differs from problem matrix"
    );

    let mut state = match warm {
        None => SolverState::cold(problem),
        Some((z, zeta)) => SolverState::warm(problem, z, zeta)?,
    };
    // The comparison iterate starts at zero, not at the initial z: the first
    // iteration is compared against the origin, so a start that happens to sit
    // still for one iteration (e.g. clamped at a bound while the multiplier
    // warms up) does not trigger a spurious stop.
    let mut z_prev = vec![0.0; problem.dim()];
    let mut scratch = Vec::new();
    let mut status = Status::MaxItersReached;
    for _ in 0..config.max_iters {
        step_in_place(problem, ctx, &mut state, &mut scratch)?;
        if stop_value(config.stop_metric, &state.z, &z_prev, &state.x) < config.tol {
            status = Status::Converged;
            break;
        }
        z_prev.copy_from_slice(&state.z);
    }
    if state.z.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite("solver iterate".into()));
    }
    let kkt = verify::kkt_residual(problem, &state.z)?;
    let solution = Solution {
        z: state.z.clone(),
        iterations: state.iterations_done,
        status,
        kkt_residual: kkt.max_residual,
    };
    Ok((solution, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn problem_1d(a: f64, b: f64, mu: f64, v: f64, l: f64, u: f64) -> ProxBQProblem {
        let a = Arc::new(SymMatrix::diagonal(&[a]).unwrap());
        ProxBQProblem::new(a, vec![b], vec![v], vec![l], vec![u], mu).unwrap()
    }

    fn context_for(problem: &ProxBQProblem, rho: f64) -> SharedContext {
        SharedContext::new(Arc::clone(problem.a_arc()), rho, &SolverConfig::default()).unwrap()
    }

    // -- median3 ------------------------------------------------------------

    #[test]
    fn median3_interior_and_clamps() {
        let l = vec![0.0, 0.0, 0.0];
        let u = vec![1.0, 1.0, 1.0];
        let t = vec![0.5, -2.0, 7.0];
        assert_eq!(median3(&l, &u, &t).unwrap(), vec![0.5, 0.0, 1.0]);
    }

    #[test]
    fn median3_pins_equal_bounds() {
        assert_eq!(median3(&[0.3], &[0.3], &[-5.0]).unwrap(), vec![0.3]);
        assert_eq!(median3(&[0.3], &[0.3], &[5.0]).unwrap(), vec![0.3]);
    }

    #[test]
    fn median3_rejects_mismatched_lengths() {
        assert!(matches!(
            median3(&[0.0], &[1.0, 2.0], &[0.5]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    // -- individual updates ---------------------------------------------------

    #[test]
    fn x_update_zero_matrix_reduces_to_z_minus_zeta() {
        let p = problem_1d(0.0, 0.0, 1.0, 0.0, -1.0, 1.0);
        let ctx = context_for(&p, 1.0);
        let x = x_update(&ctx, &[0.0], &[0.3], &[0.1], &[0.0]).unwrap();
        assert_abs_diff_eq!(x[0], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn x_update_scalar_formula() {
        // (b + rho*(z - zeta)) / (a + rho) = (2 + 2*1) / (2 + 2) = 1.
        let p = problem_1d(2.0, 2.0, 1.0, 0.0, -1.0, 1.0);
        let ctx = context_for(&p, 2.0);
        let x = x_update(&ctx, &[2.0], &[1.0], &[0.0], &[0.0]).unwrap();
        assert_eq!(x[0], 1.0);
    }

    #[test]
    fn x_update_zero_rhs_gives_zero() {
        let p = problem_1d(3.0, 0.0, 1.0, 0.0, -1.0, 1.0);
        let ctx = context_for(&p, 1.5);
        let x = x_update(&ctx, &[0.0], &[0.4], &[0.4], &[0.7]).unwrap();
        assert_eq!(x[0], 0.0);
    }

    #[test]
    fn z_update_equal_weights_average_equal_values() {
        // mu = rho and v = x + zeta make the vertex equal v itself.
        let p = problem_1d(1.0, 0.0, 1.0, 0.7, 0.0, 1.0);
        let z = z_update(&p, 1.0, &[0.7], &[0.0]).unwrap();
        assert_eq!(z[0], 0.7);
    }

    #[test]
    fn z_update_interior_vertex() {
        let p = problem_1d(1.0, 0.0, 1.0, 0.0, 0.0, 1.0);
        let z = z_update(&p, 1.0, &[1.0], &[0.0]).unwrap();
        assert_eq!(z[0], 0.5);
    }

    #[test]
    fn z_update_clamps_exterior_vertex() {
        // vertex = (1*(-4) + 1*0) / 2 = -2, clamped to the lower bound 0.
        let p = problem_1d(1.0, 0.0, 1.0, -4.0, 0.0, 1.0);
        let z = z_update(&p, 1.0, &[0.0], &[0.0]).unwrap();
        assert_eq!(z[0], 0.0);
    }

    #[test]
    fn dual_update_arithmetic() {
        assert_eq!(dual_update(&[0.5], &[0.5], &[0.5]).unwrap(), vec![0.5]);
        assert_eq!(
            dual_update(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            vec![1.0, -1.0]
        );
        // Repeated application with constant x - z accumulates linearly.
        let mut zeta = vec![0.25];
        for _ in 0..4 {
            zeta = dual_update(&zeta, &[1.0], &[0.5]).unwrap();
        }
        assert_eq!(zeta, vec![0.25 + 4.0 * 0.5]);
    }

    // -- step ----------------------------------------------------------------

    #[test]
    fn step_reaches_fixed_point_immediately_on_trivial_problem() {
        // A = 0, b = 0: the optimum is v itself, already the cold start.
        let p = problem_1d(0.0, 0.0, 1.0, 0.5, 0.0, 1.0);
        let ctx = context_for(&p, 1.0);
        let mut state = SolverState::cold(&p);
        step(&p, &ctx, &mut state).unwrap();
        assert_eq!(state.x, vec![0.5]);
        assert_eq!(state.z, vec![0.5]);
        assert_eq!(state.zeta, vec![0.0]);
        assert_eq!(state.iterations_done, 1);
    }

    #[test]
    fn step_uses_fresh_values_in_order() {
        // Hand-computed single iteration:
        // x = (1 + 1*(0-0)) / (1+1) = 0.5
        // z = (1*0 + 1*(0.5+0)) / 2 = 0.25   (must use the NEW x)
        // zeta = 0 + 0.5 - 0.25 = 0.25       (must use the NEW x and z)
        // A stale-value sweep would give z = 0 and zeta ∈ {0, 0.5}, far from
        // these targets. The tolerance absorbs one ulp from the triangular
        // solve, which computes 0.5 as (1/sqrt(2))/sqrt(2).
        let p = problem_1d(1.0, 1.0, 1.0, 0.0, -10.0, 10.0);
        let ctx = context_for(&p, 1.0);
        let mut state = SolverState {
            x: vec![0.0],
            z: vec![0.0],
            zeta: vec![0.0],
            iterations_done: 0,
        };
        step(&p, &ctx, &mut state).unwrap();
        assert_abs_diff_eq!(state.x[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(state.z[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(state.zeta[0], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn step_keeps_z_feasible() {
        let p = problem_1d(1.0, 50.0, 1.0, 5.0, 0.0, 1.0);
        let ctx = context_for(&p, 1.0);
        let mut state = SolverState::cold(&p);
        for _ in 0..25 {
            step(&p, &ctx, &mut state).unwrap();
            assert!(state.z[0] >= 0.0 && state.z[0] <= 1.0);
        }
    }

    // -- solve ---------------------------------------------------------------

    #[test]
    fn scalar_interior_optimum() {
        // Unconstrained optimum (b + mu*v)/(a + mu) = 0.5/3 = 1/6, interior.
        let p = problem_1d(2.0, 0.0, 1.0, 0.5, 0.0, 1.0);
        let s = solve(&p, &SolverConfig::default(), None).unwrap();
        assert_eq!(s.status, Status::Converged);
        assert_abs_diff_eq!(s.z[0], 1.0 / 6.0, epsilon = 1e-4);

        let tight = SolverConfig { tol: 1e-9, ..SolverConfig::default() };
        let s = solve(&p, &tight, None).unwrap();
        assert_abs_diff_eq!(s.z[0], 1.0 / 6.0, epsilon = 1e-7);
        assert!(s.kkt_residual <= 1e-7);
    }

    #[test]
    fn pinned_box_returns_the_pin() {
        let a = Arc::new(SymMatrix::diagonal(&[3.0, 1.0]).unwrap());
        let p = ProxBQProblem::new(
            a,
            vec![10.0, -10.0],
            vec![5.0, 5.0],
            vec![0.3, -2.0],
            vec![0.3, -2.0],
            1.0,
        )
        .unwrap();
        let s = solve(&p, &SolverConfig::default(), None).unwrap();
        assert_eq!(s.z, vec![0.3, -2.0]);
        assert_eq!(s.status, Status::Converged);
    }

    #[test]
    fn strong_pull_saturates_upper_bounds() {
        let a = Arc::new(SymMatrix::identity(2));
        let p = ProxBQProblem::new(
            a,
            vec![10.0, 10.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            1.0,
        )
        .unwrap();
        let s = solve(&p, &SolverConfig::default(), None).unwrap();
        assert_abs_diff_eq!(s.z[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.z[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn proximal_identity_with_slack_bounds() {
        // A = 0, b = 0, huge box: the solution is the proximal center.
        let p = problem_1d(0.0, 0.0, 1.0, 0.37, -1e6, 1e6);
        let cfg = SolverConfig { tol: 1e-8, ..SolverConfig::default() };
        let s = solve(&p, &cfg, None).unwrap();
        assert_abs_diff_eq!(s.z[0], 0.37, epsilon = 1e-6);
    }

    #[test]
    fn max_iters_reached_still_returns_feasible_z() {
        // From the cold start z = 0.5 the iterate moves every step on its way
        // down to 1/6, so one iteration cannot satisfy any reasonable tol.
        let p = problem_1d(2.0, 0.0, 1.0, 0.5, 0.0, 1.0);
        let cfg = SolverConfig { max_iters: 1, ..SolverConfig::default() };
        let s = solve(&p, &cfg, None).unwrap();
        assert_eq!(s.status, Status::MaxItersReached);
        assert_eq!(s.iterations, 1);
        assert!(s.z[0] >= 0.0 && s.z[0] <= 1.0);
    }

    #[test]
    fn warm_start_at_optimum_converges_in_one_iteration() {
        let p = problem_1d(2.0, 0.0, 1.0, 0.5, 0.0, 1.0);
        let cfg = SolverConfig { tol: 1e-10, ..SolverConfig::default() };
        let (cold, state) = solve_with_state(&p, &cfg, None).unwrap();
        let warm = solve(&p, &cfg, Some((&state.z, &state.zeta))).unwrap();
        assert!(warm.iterations <= cold.iterations);
        assert!(warm.iterations <= 2);
    }

    #[test]
    fn converged_fixed_point_has_small_kkt_residual() {
        let a = Arc::new(SymMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap());
        let p = ProxBQProblem::new(
            a,
            vec![1.0, -1.0],
            vec![0.25, 0.75],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            1.0,
        )
        .unwrap();
        let cfg = SolverConfig { tol: 1e-12, max_iters: 100_000, ..SolverConfig::default() };
        let s = solve(&p, &cfg, None).unwrap();
        assert_eq!(s.status, Status::Converged);
        assert!(s.kkt_residual <= 1e-8, "kkt residual {}", s.kkt_residual);
    }

    #[test]
    fn backends_agree_on_a_dense_instance() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let a = Arc::new(crate::synth::random_spd_cond(8, 50.0, &mut rng).unwrap());
        let b = crate::synth::gaussian_vec(8, &mut rng);
        let v = crate::synth::gaussian_vec(8, &mut rng);
        let (l, u) = crate::synth::sorted_gaussian_bounds(8, &mut rng);
        let p = ProxBQProblem::new(a, b, v, l, u, 1.0).unwrap();
        let tol = 1e-8;
        let chol = SolverConfig { tol, max_iters: 100_000, ..SolverConfig::default() };
        let cg = SolverConfig { backend: Backend::ConjugateGradient, ..chol };
        let zc = solve(&p, &chol, None).unwrap().z;
        let zg = solve(&p, &cg, None).unwrap().z;
        for (c, g) in zc.iter().zip(&zg) {
            assert!((c - g).abs() <= 10.0 * tol, "{c} vs {g}");
        }
    }

    #[test]
    fn relative_change_metric_converges() {
        let p = problem_1d(2.0, 0.0, 1.0, 0.5, 0.0, 1.0);
        let cfg = SolverConfig {
            stop_metric: StopMetric::RelativeChange,
            tol: 1e-8,
            ..SolverConfig::default()
        };
        let s = solve(&p, &cfg, None).unwrap();
        assert_eq!(s.status, Status::Converged);
        assert_abs_diff_eq!(s.z[0], 1.0 / 6.0, epsilon = 1e-6);
    }

    // -- validation ----------------------------------------------------------

    #[test]
    fn crossed_bounds_are_rejected() {
        let a = Arc::new(SymMatrix::identity(1));
        let err = ProxBQProblem::new(a, vec![0.0], vec![0.0], vec![1.0], vec![0.0], 1.0);
        assert!(matches!(err, Err(Error::InvalidProblem(_))));
    }

    #[test]
    fn nonpositive_mu_is_rejected() {
        let a = Arc::new(SymMatrix::identity(1));
        for mu in [0.0, -1.0, f64::NAN] {
            let err = ProxBQProblem::new(
                Arc::clone(&a),
                vec![0.0],
                vec![0.0],
                vec![0.0],
                vec![1.0],
                mu,
            );
            assert!(matches!(err, Err(Error::InvalidProblem(_))));
        }
    }

    #[test]
    fn non_finite_data_is_rejected() {
        let a = Arc::new(SymMatrix::identity(1));
        let err = ProxBQProblem::new(a, vec![f64::NAN], vec![0.0], vec![0.0], vec![1.0], 1.0);
        assert!(matches!(err, Err(Error::InvalidProblem(_))));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let bad_tol = SolverConfig { tol: 0.0, ..SolverConfig::default() };
        assert!(bad_tol.validate().is_err());
        let bad_iters = SolverConfig { max_iters: 0, ..SolverConfig::default() };
        assert!(bad_iters.validate().is_err());
        let bad_cg = SolverConfig { cg_inner_iters: 0, ..SolverConfig::default() };
        assert!(bad_cg.validate().is_err());
    }

    proptest::proptest! {
        /// z_update output is feasible for every input, exactly — including
        /// pinned coordinates (gap = 0) and vertices far outside the box.
        #[test]
        fn z_update_is_always_feasible(
            coords in proptest::collection::vec(
                (-100.0f64..100.0, 0.0f64..50.0, -1000.0f64..1000.0, -1000.0f64..1000.0, -100.0f64..100.0),
                1..9
            ),
            mu in 0.01f64..100.0,
            rho in 0.01f64..100.0,
        ) {
            let d = coords.len();
            let l: Vec<f64> = coords.iter().map(|c| c.0).collect();
            let u: Vec<f64> = coords.iter().map(|c| c.0 + c.1).collect();
            let x: Vec<f64> = coords.iter().map(|c| c.2).collect();
            let zeta: Vec<f64> = coords.iter().map(|c| c.3).collect();
            let v: Vec<f64> = coords.iter().map(|c| c.4).collect();
            let a = Arc::new(SymMatrix::identity(d));
            let p = ProxBQProblem::new(a, vec![0.0; d], v, l.clone(), u.clone(), mu).unwrap();
            let z = z_update(&p, rho, &x, &zeta).unwrap();
            for i in 0..d {
                proptest::prop_assert!(z[i] >= l[i] && z[i] <= u[i]);
            }
        }
    }
}
