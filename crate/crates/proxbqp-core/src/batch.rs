//! Amortized solving of many QPs that share one matrix A.
//!
//! The expensive part of the iteration — factoring A + ρI — depends only on
//! (A, ρ), so a batch of N problems pays for it once ([`SharedContext`]) no
//! matter how large N is. Two drivers consume the context:
//!
//! * [`solve_batch_sync`] runs every column in lockstep with one blocked
//!   triangular solve per iteration and a single global stopping test, which
//!   reproduces the reference implementation exactly (a batch of one is
//!   bit-identical to [`solver::solve`]).
//! * [`solve_batch_async`] lets each column converge on its own iteration
//!   count, distributing columns round-robin over worker threads. Each
//!   column runs the same per-problem code path as [`solver::solve`], so
//!   results match it bit for bit and are independent of worker count.

use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::linalg::{CholeskyFactor, ColMatrix, SymMatrix};
use crate::solver::{self, clamp1, x_rhs1, z_vertex1, Backend, SolverConfig, Status};

/// Immutable per-(A, ρ) solve machinery, shared by any number of concurrent
/// column solves. Construction performs the factorization (Cholesky backend)
/// exactly once.
#[derive(Debug)]
pub struct SharedContext {
    a: Arc<SymMatrix>,
    rho: f64,
    backend: ContextBackend,
}

#[derive(Debug)]
pub(crate) enum ContextBackend {
    Cholesky(CholeskyFactor),
    ConjugateGradient { inner_iters: usize, residual_tol: f64 },
}

impl SharedContext {
    pub fn new(a: Arc<SymMatrix>, rho: f64, config: &SolverConfig) -> Result<Self> {
        if !rho.is_finite() || rho <= 0.0 {
            return Err(Error::OutOfRange(format!("penalty must be finite and > 0, got {rho}")));
        }
        config.validate()?;
        let backend = match config.backend {
            Backend::Cholesky => ContextBackend::Cholesky(CholeskyFactor::compute(&a, rho)?),
            Backend::ConjugateGradient => ContextBackend::ConjugateGradient {
                inner_iters: config.cg_inner_iters,
                residual_tol: config.cg_residual_tol,
            },
        };
        Ok(SharedContext { a, rho, backend })
    }

    pub fn a(&self) -> &SymMatrix {
        &self.a
    }
    pub fn a_arc(&self) -> &Arc<SymMatrix> {
        &self.a
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub(crate) fn backend(&self) -> &ContextBackend {
        &self.backend
    }
    /// The cached factor, when the context uses the Cholesky backend.
    pub fn cholesky_factor(&self) -> Option<&CholeskyFactor> {
        match &self.backend {
            ContextBackend::Cholesky(f) => Some(f),
            ContextBackend::ConjugateGradient { .. } => None,
        }
    }
}

/// Bounds for a batch: one box shared by all columns, or one box per column.
#[derive(Debug, Clone)]
pub enum BatchBounds {
    Shared { lower: Vec<f64>, upper: Vec<f64> },
    PerColumn { lower: ColMatrix, upper: ColMatrix },
}

/// Proximal weight for a batch: shared scalar or one value per column.
#[derive(Debug, Clone)]
pub enum BatchMu {
    Shared(f64),
    PerColumn(Vec<f64>),
}

/// N problems sharing one matrix: columns of B and V are the per-problem
/// linear terms and proximal centers.
#[derive(Debug, Clone)]
pub struct BatchProblem {
    a: Arc<SymMatrix>,
    b: ColMatrix,
    v: ColMatrix,
    bounds: BatchBounds,
    mu: BatchMu,
}

impl BatchProblem {
    pub fn new(
        a: SymMatrix,
        b: ColMatrix,
        v: ColMatrix,
        bounds: BatchBounds,
        mu: BatchMu,
    ) -> Result<Self> {
        Self::new_shared(Arc::new(a), b, v, bounds, mu)
    }

    pub fn new_shared(
        a: Arc<SymMatrix>,
        b: ColMatrix,
        v: ColMatrix,
        bounds: BatchBounds,
        mu: BatchMu,
    ) -> Result<Self> {
        let d = a.dim();
        let n = b.cols();
        if n == 0 {
            return Err(Error::InvalidProblem("batch needs at least one column".into()));
        }
        if b.rows() != d || v.rows() != d || v.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A is {d}x{d} but B is {}x{} and V is {}x{}",
                b.rows(),
                b.cols(),
                v.rows(),
                v.cols()
            )));
        }
        for (name, m) in [("B", &b), ("V", &v)] {
            if !m.data().iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidProblem(format!("{name} contains non-finite values")));
            }
        }
        match &bounds {
            BatchBounds::Shared { lower, upper } => {
                if lower.len() != d || upper.len() != d {
                    return Err(Error::DimensionMismatch(format!(
                        "shared bounds have lengths {} and {}, expected {d}",
                        lower.len(),
                        upper.len()
                    )));
                }
                if !lower.iter().chain(upper).all(|x| x.is_finite()) {
                    return Err(Error::InvalidProblem("bounds contain non-finite values".into()));
                }
                if let Some(i) = lower.iter().zip(upper).position(|(l, u)| l > u) {
                    return Err(Error::InvalidProblem(format!(
                        "lower bound exceeds upper bound at coordinate {i}"
                    )));
                }
            }
            BatchBounds::PerColumn { lower, upper } => {
                if lower.rows() != d
                    || upper.rows() != d
                    || lower.cols() != n
                    || upper.cols() != n
                {
                    return Err(Error::DimensionMismatch(format!(
                        "per-column bounds are {}x{} and {}x{}, expected {d}x{n}",
                        lower.rows(),
                        lower.cols(),
                        upper.rows(),
                        upper.cols()
                    )));
                }
                if !lower.data().iter().chain(upper.data()).all(|x| x.is_finite()) {
                    return Err(Error::InvalidProblem("bounds contain non-finite values".into()));
                }
                for j in 0..n {
                    if let Some(i) =
                        lower.col(j).iter().zip(upper.col(j)).position(|(l, u)| l > u)
                    {
                        return Err(Error::InvalidProblem(format!(
                            "lower bound exceeds upper bound at column {j}, coordinate {i}"
                        )));
                    }
                }
            }
        }
        match &mu {
            BatchMu::Shared(m) => {
                if !m.is_finite() || *m <= 0.0 {
                    return Err(Error::InvalidProblem(format!(
                        "mu must be finite and > 0, got {m}"
                    )));
                }
            }
            BatchMu::PerColumn(ms) => {
                if ms.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "per-column mu has length {}, expected {n}",
                        ms.len()
                    )));
                }
                if let Some(j) = ms.iter().position(|m| !m.is_finite() || *m <= 0.0) {
                    return Err(Error::InvalidProblem(format!(
                        "mu must be finite and > 0, got {} at column {j}",
                        ms[j]
                    )));
                }
            }
        }
        Ok(BatchProblem { a, b, v, bounds, mu })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }
    pub fn count(&self) -> usize {
        self.b.cols()
    }
    pub fn a(&self) -> &SymMatrix {
        &self.a
    }
    pub fn a_arc(&self) -> &Arc<SymMatrix> {
        &self.a
    }
    pub fn b(&self) -> &ColMatrix {
        &self.b
    }
    pub fn v(&self) -> &ColMatrix {
        &self.v
    }
    pub fn bounds(&self) -> &BatchBounds {
        &self.bounds
    }
    pub fn mu(&self) -> &BatchMu {
        &self.mu
    }

    pub fn lower_of(&self, j: usize) -> &[f64] {
        match &self.bounds {
            BatchBounds::Shared { lower, .. } => lower,
            BatchBounds::PerColumn { lower, .. } => lower.col(j),
        }
    }

    pub fn upper_of(&self, j: usize) -> &[f64] {
        match &self.bounds {
            BatchBounds::Shared { upper, .. } => upper,
            BatchBounds::PerColumn { upper, .. } => upper.col(j),
        }
    }

    pub fn mu_of(&self, j: usize) -> f64 {
        match &self.mu {
            BatchMu::Shared(m) => *m,
            BatchMu::PerColumn(ms) => ms[j],
        }
    }

    /// Column j as a standalone problem sharing this batch's A.
    pub fn column_problem(&self, j: usize) -> Result<solver::ProxBQProblem> {
        if j >= self.count() {
            return Err(Error::OutOfRange(format!(
                "column {j} out of range for batch of {}",
                self.count()
            )));
        }
        solver::ProxBQProblem::new(
            Arc::clone(&self.a),
            self.b.col(j).to_vec(),
            self.v.col(j).to_vec(),
            self.lower_of(j).to_vec(),
            self.upper_of(j).to_vec(),
            self.mu_of(j),
        )
    }
}

/// Per-column outcome of a batch solve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnStatus {
    Converged,
    MaxItersReached,
    /// The column's solve returned an error (async mode records it and keeps
    /// going); the reported z is the clamped proximal center, which is
    /// feasible but not optimized.
    Failed(String),
}

impl From<Status> for ColumnStatus {
    fn from(s: Status) -> Self {
        match s {
            Status::Converged => ColumnStatus::Converged,
            Status::MaxItersReached => ColumnStatus::MaxItersReached,
        }
    }
}

/// Solutions and bookkeeping for a whole batch. Every column of `z` is
/// feasible with respect to its own bounds.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub z: ColMatrix,
    pub iterations: Vec<usize>,
    pub statuses: Vec<ColumnStatus>,
    pub total_wall_time: Duration,
}

/// Lockstep batch solve: every column takes the same number of iterations,
/// the smooth update is one blocked multi-column solve, and the iteration
/// stops when the *maximum* stop-metric value over all columns drops below
/// tol. Resolves ρ and builds the shared context internally.
pub fn solve_batch_sync(batch: &BatchProblem, config: &SolverConfig) -> Result<BatchResult> {
    config.validate()?;
    let rho = crate::rho::resolve(config.rho, batch.a())?;
    let ctx = SharedContext::new(Arc::clone(batch.a_arc()), rho, config)?;
    solve_batch_sync_with_context(batch, &ctx, config)
}

/// Lockstep solve against a caller-provided context (so the caller can time
/// or reuse the factorization).
pub fn solve_batch_sync_with_context(
    batch: &BatchProblem,
    ctx: &SharedContext,
    config: &SolverConfig,
) -> Result<BatchResult> {
    config.validate()?;
    check_context(batch, ctx)?;
    let start = Instant::now();
    let (d, n) = (batch.dim(), batch.count());
    let rho = ctx.rho();

    // Cold start, column by column: z = clamp(v), zeta = 0, x = z.
    let mut z = ColMatrix::zeros(d, n);
    for j in 0..n {
        let (l, u) = (batch.lower_of(j), batch.upper_of(j));
        let vcol = batch.v.col(j);
        for (zi, ((&li, &ui), &vi)) in
            z.col_mut(j).iter_mut().zip(l.iter().zip(u).zip(vcol))
        {
            *zi = clamp1(li, ui, vi);
        }
    }
    let mut zeta = ColMatrix::zeros(d, n);
    let mut x = z.clone();
    let mut cg_rhs: Vec<f64> = Vec::new();

    let mut iterations_done = 0usize;
    let mut converged = false;
    for iter in 1..=config.max_iters {
        // Smooth update for all columns.
        match ctx.backend() {
            ContextBackend::Cholesky(factor) => {
                // Build all right-hand sides in place, then one blocked solve.
                for ((xi, &bi), (&zi, &yi)) in x
                    .data_mut()
                    .iter_mut()
                    .zip(batch.b.data())
                    .zip(z.data().iter().zip(zeta.data()))
                {
                    *xi = x_rhs1(bi, rho, zi, yi);
                }
                factor.solve_in_place(x.data_mut())?;
            }
            ContextBackend::ConjugateGradient { inner_iters, residual_tol } => {
                for j in 0..n {
                    cg_rhs.clear();
                    cg_rhs.extend(
                        batch
                            .b
                            .col(j)
                            .iter()
                            .zip(z.col(j).iter().zip(zeta.col(j)))
                            .map(|(&bi, (&zi, &yi))| x_rhs1(bi, rho, zi, yi)),
                    );
                    let solved = crate::linalg::cg_solve(
                        ctx.a(),
                        rho,
                        &cg_rhs,
                        x.col(j),
                        *inner_iters,
                        *residual_tol,
                    )?;
                    x.col_mut(j).copy_from_slice(&solved);
                }
            }
        }

        // Projected and dual updates, plus the global stop metric, in one
        // pass; identical scalar arithmetic to the single-problem solver.
        // The comparison iterate for the first iteration is the zero matrix,
        // not the starting z, so a start pinned at a bound cannot trigger a
        // spurious stop while the multipliers are still warming up.
        let mut global_metric = 0.0f64;
        for j in 0..n {
            let (l, u) = (batch.lower_of(j), batch.upper_of(j));
            let (vcol, xcol) = (batch.v.col(j), x.col(j));
            let mu = batch.mu_of(j);
            let mut dmax = 0.0f64;
            let mut cmax = 0.0f64;
            let mut zmax = 0.0f64;
            let zcol = z.col_mut(j);
            let zetacol = zeta.col_mut(j);
            for i in 0..d {
                let old = if iter == 1 { 0.0 } else { zcol[i] };
                let zi = clamp1(l[i], u[i], z_vertex1(mu, vcol[i], rho, xcol[i], zetacol[i]));
                zcol[i] = zi;
                zetacol[i] += xcol[i] - zi;
                dmax = dmax.max((zi - old).abs());
                cmax = cmax.max((xcol[i] - zi).abs());
                zmax = zmax.max(zi.abs());
            }
            let raw = dmax.max(cmax);
            let column_metric = match config.stop_metric {
                solver::StopMetric::MaxAbsChange => raw,
                solver::StopMetric::RelativeChange => raw / (1.0 + zmax),
            };
            global_metric = global_metric.max(column_metric);
        }

        iterations_done = iter;
        if global_metric < config.tol {
            converged = true;
            break;
        }
    }

    if z.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("batch iterate".into()));
    }
    let status = if converged { ColumnStatus::Converged } else { ColumnStatus::MaxItersReached };
    Ok(BatchResult {
        z,
        iterations: vec![iterations_done; n],
        statuses: vec![status; n],
        total_wall_time: start.elapsed(),
    })
}

/// Per-column batch solve: each column converges independently on its own
/// iteration count, using exactly the single-problem solver's code path, with
/// columns distributed round-robin over up to `workers` threads. A column
/// whose solve errors is recorded as Failed (with a feasible placeholder);
/// the others proceed.
pub fn solve_batch_async(
    batch: &BatchProblem,
    config: &SolverConfig,
    workers: usize,
) -> Result<BatchResult> {
    config.validate()?;
    let rho = crate::rho::resolve(config.rho, batch.a())?;
    let ctx = SharedContext::new(Arc::clone(batch.a_arc()), rho, config)?;
    solve_batch_async_with_context(batch, &ctx, config, workers)
}

struct ColumnOutcome {
    z: Vec<f64>,
    iterations: usize,
    status: ColumnStatus,
}

/// Per-column solve against a caller-provided context.
pub fn solve_batch_async_with_context(
    batch: &BatchProblem,
    ctx: &SharedContext,
    config: &SolverConfig,
    workers: usize,
) -> Result<BatchResult> {
    config.validate()?;
    check_context(batch, ctx)?;
    if workers == 0 {
        return Err(Error::OutOfRange("workers must be >= 1".into()));
    }
    let start = Instant::now();
    let (d, n) = (batch.dim(), batch.count());
    let nworkers = workers.min(n);

    let solve_column = |j: usize| -> ColumnOutcome {
        let solved = batch
            .column_problem(j)
            .and_then(|p| solver::solve_in_context(&p, ctx, config, None).map(|(s, _)| s));
        match solved {
            Ok(sol) => ColumnOutcome {
                z: sol.z,
                iterations: sol.iterations,
                status: sol.status.into(),
            },
            Err(e) => {
                let (l, u) = (batch.lower_of(j), batch.upper_of(j));
                let z = batch
                    .v
                    .col(j)
                    .iter()
                    .zip(l.iter().zip(u))
                    .map(|(&vi, (&li, &ui))| clamp1(li, ui, vi))
                    .collect();
                ColumnOutcome { z, iterations: 0, status: ColumnStatus::Failed(e.to_string()) }
            }
        }
    };

    let mut outcomes: Vec<Option<ColumnOutcome>> = (0..n).map(|_| None).collect();
    if nworkers <= 1 {
        for (j, slot) in outcomes.iter_mut().enumerate() {
            *slot = Some(solve_column(j));
        }
    } else {
        let buckets: Vec<Vec<(usize, ColumnOutcome)>> = thread::scope(|scope| {
            let solve_column = &solve_column;
            let handles: Vec<_> = (0..nworkers)
                .map(|w| {
                    scope.spawn(move || {
                        let mut out = Vec::new();
                        let mut j = w;
                        while j < n {
                            out.push((j, solve_column(j)));
                            j += nworkers;
                        }
                        out
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("batch worker panicked")).collect()
        });
        for bucket in buckets {
            for (j, outcome) in bucket {
                outcomes[j] = Some(outcome);
            }
        }
    }

    let mut z = ColMatrix::zeros(d, n);
    let mut iterations = vec![0usize; n];
    let mut statuses = vec![ColumnStatus::Converged; n];
    for (j, outcome) in outcomes.into_iter().enumerate() {
        let outcome = outcome.expect("every column produces an outcome");
        z.col_mut(j).copy_from_slice(&outcome.z);
        iterations[j] = outcome.iterations;
        statuses[j] = outcome.status;
    }
    Ok(BatchResult { z, iterations, statuses, total_wall_time: start.elapsed() })
}

fn check_context(batch: &BatchProblem, ctx: &SharedContext) -> Result<()> {
    if ctx.a().dim() != batch.dim() {
        return Err(Error::DimensionMismatch(format!(
            "context was built for dimension {}, batch has {}",
            ctx.a().dim(),
            batch.dim()
        )));
    }
    debug_assert!(
        Arc::ptr_eq(ctx.a_arc(), batch.a_arc()) || ctx.a().as_slice() == batch.a().as_slice(),
        "context matrix differs from batch matrix"
    );
    Ok(())
}
