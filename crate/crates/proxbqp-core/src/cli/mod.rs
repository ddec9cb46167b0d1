//! Command implementations behind the `proxbqp` binary.
//!
//! The binary is a thin argument-parsing shell; everything observable —
//! file handling, solving, report assembly, exit-code policy — lives here so
//! it can be exercised directly from tests.
//!
//! Exit codes: 0 when every problem converged, 2 when any problem hit the
//! iteration cap (the solution file is still written; iterates are always
//! feasible), 1 on any error or failed column.

pub mod files;

use std::path::Path;
use std::time::{Duration, Instant};

use crate::batch::{
    solve_batch_async_with_context, solve_batch_sync_with_context, BatchProblem, BatchResult,
    ColumnStatus, SharedContext,
};
use crate::error::Result;
use crate::hashapp;
use crate::linalg::{factorization_count, ColMatrix};
use crate::rho::{self, RhoPolicy};
use crate::solver::{Backend, SolverConfig, StopMetric};
use crate::synth;
use crate::verify;

use files::{ProblemSetFile, SolutionFile};

/// How the batch is iterated: lockstep with one multi-column solve per
/// iteration, or independent per-problem solves spread across workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sync,
    Async,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub rho: RhoPolicy,
    pub tol: f64,
    pub max_iters: usize,
    pub backend: Backend,
    pub mode: Mode,
    /// Worker threads for async mode; `None` means all available cores.
    pub workers: Option<usize>,
    /// Round the solution to {0,1} after solving (requires values in [0,1]).
    pub binarize: bool,
    pub stop_metric: StopMetric,
}

impl Default for SolveOptions {
    fn default() -> Self {
        let base = SolverConfig::default();
        SolveOptions {
            rho: base.rho,
            tol: base.tol,
            max_iters: base.max_iters,
            backend: base.backend,
            mode: Mode::Sync,
            workers: None,
            binarize: false,
            stop_metric: base.stop_metric,
        }
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn config_from(opts: &SolveOptions, rho: f64) -> SolverConfig {
    SolverConfig {
        rho: RhoPolicy::Fixed(rho),
        tol: opts.tol,
        max_iters: opts.max_iters,
        backend: opts.backend,
        stop_metric: opts.stop_metric,
        ..SolverConfig::default()
    }
}

/// Solves a parsed problem set and assembles the solution file contents.
///
/// Hashing sets are lowered to their box-QP relaxation first; the reported
/// KKT residuals always refer to the QP that was actually solved, measured
/// before any binarization.
pub fn run_solve(input: &ProblemSetFile, opts: &SolveOptions) -> Result<SolutionFile> {
    let batch: BatchProblem = match input {
        ProblemSetFile::Qp(b) => b.clone(),
        ProblemSetFile::Hashing(h) => hashapp::build_relaxed_batch(h)?,
    };
    let rho = rho::resolve(opts.rho, batch.a())?;
    let config = config_from(opts, rho);
    config.validate()?;
    let ctx = SharedContext::new(batch.a_arc().clone(), rho, &config)?;
    let result = match opts.mode {
        Mode::Sync => solve_batch_sync_with_context(&batch, &ctx, &config)?,
        Mode::Async => {
            let workers = opts.workers.unwrap_or_else(default_workers);
            solve_batch_async_with_context(&batch, &ctx, &config, workers)?
        }
    };

    let (kkt_max, kkt_median) = kkt_stats(&batch, &result)?;
    let z = if opts.binarize { binarize_columns(result.z)? } else { result.z };

    Ok(SolutionFile {
        rho,
        backend: opts.backend,
        mode: opts.mode,
        wall_time_seconds: result.total_wall_time.as_secs_f64(),
        kkt_max,
        kkt_median,
        iterations: result.iterations,
        statuses: result.statuses,
        z,
    })
}

fn kkt_stats(batch: &BatchProblem, result: &BatchResult) -> Result<(f64, f64)> {
    let mut residuals = Vec::with_capacity(batch.count());
    for j in 0..batch.count() {
        let problem = batch.column_problem(j)?;
        let report = verify::kkt_residual(&problem, result.z.col(j))?;
        residuals.push(report.max_residual);
    }
    Ok((
        residuals.iter().copied().fold(0.0, f64::max),
        median_of(&mut residuals),
    ))
}

fn median_of(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn binarize_columns(z: ColMatrix) -> Result<ColMatrix> {
    let (d, n) = (z.rows(), z.cols());
    let mut out = ColMatrix::zeros(d, n);
    for j in 0..n {
        let rounded = hashapp::binarize(z.col(j))?;
        out.col_mut(j).copy_from_slice(&rounded);
    }
    Ok(out)
}

/// Exit code implied by a set of column statuses.
pub fn exit_code_for(statuses: &[ColumnStatus]) -> i32 {
    if statuses.iter().any(|s| matches!(s, ColumnStatus::Failed(_))) {
        1
    } else if statuses.iter().any(|s| matches!(s, ColumnStatus::MaxItersReached)) {
        2
    } else {
        0
    }
}

fn worst_status_name(statuses: &[ColumnStatus]) -> &'static str {
    match exit_code_for(statuses) {
        0 => "converged",
        2 => "max-iters",
        _ => "failed",
    }
}

/// File-to-file solve: parse, solve, write, print a one-line summary.
pub fn cmd_solve(input: &Path, output: &Path, opts: &SolveOptions) -> i32 {
    let run = || -> Result<SolutionFile> {
        let set = files::read_problem_set(input)?;
        let sol = run_solve(&set, opts)?;
        files::write_solution_to(output, &sol)?;
        Ok(sol)
    };
    match run() {
        Ok(sol) => {
            let mut iters = sol.iterations.iter().map(|&k| k as f64).collect::<Vec<_>>();
            println!(
                "n={} d={} rho={} backend={} mode={} median_iters={} max_kkt={:e} wall_s={:.6} status={}",
                sol.z.cols(),
                sol.z.rows(),
                sol.rho,
                backend_name(sol.backend),
                mode_name(sol.mode),
                median_of(&mut iters),
                sol.kkt_max,
                sol.wall_time_seconds,
                worst_status_name(&sol.statuses),
            );
            exit_code_for(&sol.statuses)
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn backend_name(b: Backend) -> &'static str {
    match b {
        Backend::Cholesky => "cholesky",
        Backend::ConjugateGradient => "cg",
    }
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Sync => "sync",
        Mode::Async => "async",
    }
}

// ---------------------------------------------------------------------------
// Bench
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub backend: Backend,
    pub workers: Option<usize>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { n: 60_000, d: 32, seed: 0, backend: Backend::Cholesky, workers: None }
    }
}

#[derive(Debug)]
pub struct BenchReport {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub rho: f64,
    pub backend: Backend,
    /// End-to-end time: instance generation excluded, setup + solve included.
    pub wall: Duration,
    /// Time spent building the shared linear-system context (for the
    /// Cholesky backend this is the single factorization).
    pub setup_time: Duration,
    /// Global factorization-counter delta across the run.
    pub factorizations: u64,
    pub iterations: Vec<usize>,
    pub statuses: Vec<ColumnStatus>,
}

/// Generates the seeded benchmark batch and solves it asynchronously with a
/// fixed tolerance of 1e-5, amortizing one shared context across all columns.
pub fn run_bench(opts: &BenchOptions) -> Result<BenchReport> {
    let batch = synth::bench_batch(opts.n, opts.d, opts.seed)?;
    let config = SolverConfig { tol: 1e-5, backend: opts.backend, ..SolverConfig::default() };
    config.validate()?;

    let factorizations_before = factorization_count();
    let start = Instant::now();
    let rho = rho::resolve(RhoPolicy::Auto, batch.a())?;
    let setup_start = Instant::now();
    let ctx = SharedContext::new(batch.a_arc().clone(), rho, &config)?;
    let setup_time = setup_start.elapsed();
    let workers = opts.workers.unwrap_or_else(default_workers);
    let result = solve_batch_async_with_context(&batch, &ctx, &config, workers)?;
    let wall = start.elapsed();
    let factorizations = factorization_count() - factorizations_before;

    Ok(BenchReport {
        n: opts.n,
        d: opts.d,
        seed: opts.seed,
        rho,
        backend: opts.backend,
        wall,
        setup_time,
        factorizations,
        iterations: result.iterations,
        statuses: result.statuses,
    })
}

/// Formats the iteration histogram: up to ten equal-width buckets, one line
/// per bucket. Deterministic for a given set of counts.
pub fn iteration_histogram(iterations: &[usize]) -> String {
    if iterations.is_empty() {
        return String::new();
    }
    let min = *iterations.iter().min().unwrap();
    let max = *iterations.iter().max().unwrap();
    if min == max {
        return format!("  iters [{min}, {max}]: {}\n", iterations.len());
    }
    let span = max - min + 1;
    let width = span.div_ceil(span.min(10));
    // Recompute the bucket count from the width so a rounded-up width does
    // not leave trailing buckets that start past max.
    let buckets = span.div_ceil(width);
    let mut counts = vec![0usize; buckets];
    for &it in iterations {
        counts[((it - min) / width).min(buckets - 1)] += 1;
    }
    let mut out = String::new();
    for (k, &count) in counts.iter().enumerate() {
        let lo = min + k * width;
        let hi = (lo + width - 1).min(max);
        out.push_str(&format!("  iters [{lo}, {hi}]: {count}\n"));
    }
    out
}

pub fn cmd_bench(opts: &BenchOptions) -> i32 {
    match run_bench(opts) {
        Ok(report) => {
            let converged = report
                .statuses
                .iter()
                .filter(|s| matches!(s, ColumnStatus::Converged))
                .count();
            let capped = report
                .statuses
                .iter()
                .filter(|s| matches!(s, ColumnStatus::MaxItersReached))
                .count();
            let mut iters = report.iterations.iter().map(|&k| k as f64).collect::<Vec<_>>();
            print!("{}", iteration_histogram(&report.iterations));
            println!(
                "n={} d={} seed={} backend={} rho={} median_iters={} converged={} max_iters_reached={} factorizations={} setup_s={:.6} wall_s={:.6}",
                report.n,
                report.d,
                report.seed,
                backend_name(report.backend),
                report.rho,
                median_of(&mut iters),
                converged,
                capped,
                report.factorizations,
                report.setup_time.as_secs_f64(),
                report.wall.as_secs_f64(),
            );
            exit_code_for(&report.statuses)
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
