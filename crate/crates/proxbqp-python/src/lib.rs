//! Python bindings for the batch proximal box-QP solver.
//!
//! The module mirrors the Rust API in a small, copy-based surface: matrices
//! come in as row-major lists of lists, vectors as flat lists. Solutions come
//! back as plain attribute objects. All validation errors surface as
//! `ValueError` with the library's message text.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use proxbqp_core::batch::{
    solve_batch_async, solve_batch_sync, BatchBounds, BatchMu, BatchProblem, ColumnStatus,
};
use proxbqp_core::hashapp;
use proxbqp_core::linalg::{ColMatrix, SymMatrix};
use proxbqp_core::rho::{self, RhoPolicy};
use proxbqp_core::solver::{self, Backend, ProxBQProblem, SolverConfig, Status, StopMetric};
use proxbqp_core::verify;

fn value_error(e: proxbqp_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn sym_matrix(rows: Vec<Vec<f64>>) -> PyResult<SymMatrix> {
    SymMatrix::from_rows(&rows).map_err(value_error)
}

fn parse_backend(name: &str) -> PyResult<Backend> {
    match name {
        "cholesky" => Ok(Backend::Cholesky),
        "cg" => Ok(Backend::ConjugateGradient),
        other => Err(PyValueError::new_err(format!(
            "unknown backend {other:?} (expected \"cholesky\" or \"cg\")"
        ))),
    }
}

fn parse_stop_metric(name: &str) -> PyResult<StopMetric> {
    match name {
        "abs" => Ok(StopMetric::MaxAbsChange),
        "rel" => Ok(StopMetric::RelativeChange),
        other => Err(PyValueError::new_err(format!(
            "unknown stop metric {other:?} (expected \"abs\" or \"rel\")"
        ))),
    }
}

fn config_from(
    rho: Option<f64>,
    tol: f64,
    max_iters: usize,
    backend: &str,
    stop_metric: &str,
) -> PyResult<SolverConfig> {
    let config = SolverConfig {
        rho: match rho {
            None => RhoPolicy::Auto,
            Some(value) => RhoPolicy::Fixed(value),
        },
        tol,
        max_iters,
        backend: parse_backend(backend)?,
        stop_metric: parse_stop_metric(stop_metric)?,
        ..SolverConfig::default()
    };
    config.validate().map_err(value_error)?;
    Ok(config)
}

/// One proximal bound-constrained QP:
/// minimize 0.5*x'Ax - b'x + (mu/2)*||x - v||^2 subject to l <= x <= u.
#[pyclass]
struct Problem {
    inner: ProxBQProblem,
}

#[pymethods]
impl Problem {
    #[new]
    fn new(
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        v: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        mu: f64,
    ) -> PyResult<Self> {
        let a = Arc::new(sym_matrix(a)?);
        let inner = ProxBQProblem::new(a, b, v, lower, upper, mu).map_err(value_error)?;
        Ok(Problem { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __repr__(&self) -> String {
        format!("Problem(dim={}, mu={})", self.inner.dim(), self.inner.mu())
    }
}

/// Result of a single solve.
#[pyclass]
struct Solution {
    #[pyo3(get)]
    z: Vec<f64>,
    #[pyo3(get)]
    iterations: usize,
    /// "converged" or "max-iters".
    #[pyo3(get)]
    status: String,
    #[pyo3(get)]
    kkt_residual: f64,
    /// Final consensus iterate and multiplier, reusable as a warm start.
    #[pyo3(get)]
    warm_z: Vec<f64>,
    #[pyo3(get)]
    warm_zeta: Vec<f64>,
}

#[pymethods]
impl Solution {
    fn __repr__(&self) -> String {
        format!(
            "Solution(status={:?}, iterations={}, kkt_residual={:.3e})",
            self.status, self.iterations, self.kkt_residual
        )
    }
}

fn status_name(status: Status) -> &'static str {
    match status {
        Status::Converged => "converged",
        Status::MaxItersReached => "max-iters",
    }
}

/// Result of a batch solve: one column per problem.
#[pyclass]
struct BatchSolution {
    /// z[j] is the solution of problem j.
    #[pyo3(get)]
    z: Vec<Vec<f64>>,
    #[pyo3(get)]
    iterations: Vec<usize>,
    /// Per problem: "converged", "max-iters", or "failed: <message>".
    #[pyo3(get)]
    statuses: Vec<String>,
    #[pyo3(get)]
    wall_time_seconds: f64,
}

#[pymethods]
impl BatchSolution {
    fn __repr__(&self) -> String {
        format!("BatchSolution(count={}, wall_time_seconds={:.6})", self.z.len(), self.wall_time_seconds)
    }
}

/// Solves one problem. `rho=None` picks the spectral balance point; pass
/// `warm_z`/`warm_zeta` from a previous `Solution` to warm-start.
#[pyfunction]
#[pyo3(signature = (
    problem,
    *,
    rho = None,
    tol = 1e-5,
    max_iters = 10_000,
    backend = "cholesky",
    stop_metric = "abs",
    warm_z = None,
    warm_zeta = None,
))]
#[allow(clippy::too_many_arguments)]
fn solve(
    problem: &Problem,
    rho: Option<f64>,
    tol: f64,
    max_iters: usize,
    backend: &str,
    stop_metric: &str,
    warm_z: Option<Vec<f64>>,
    warm_zeta: Option<Vec<f64>>,
) -> PyResult<Solution> {
    let config = config_from(rho, tol, max_iters, backend, stop_metric)?;
    let warm = match (&warm_z, &warm_zeta) {
        (None, None) => None,
        (Some(z), Some(zeta)) => Some((z.as_slice(), zeta.as_slice())),
        _ => {
            return Err(PyValueError::new_err(
                "warm_z and warm_zeta must be provided together",
            ))
        }
    };
    let (solution, state) =
        solver::solve_with_state(&problem.inner, &config, warm).map_err(value_error)?;
    Ok(Solution {
        z: solution.z,
        iterations: solution.iterations,
        status: status_name(solution.status).to_string(),
        kkt_residual: solution.kkt_residual,
        warm_z: state.z,
        warm_zeta: state.zeta,
    })
}

/// Solves N problems sharing one matrix `a` with a single cached
/// factorization. `b` and `v` are lists of columns (one per problem); bounds
/// and `mu` are shared across the batch.
#[pyfunction]
#[pyo3(signature = (
    a,
    b,
    v,
    lower,
    upper,
    mu,
    *,
    mode = "async",
    workers = None,
    rho = None,
    tol = 1e-5,
    max_iters = 10_000,
    backend = "cholesky",
    stop_metric = "abs",
))]
#[allow(clippy::too_many_arguments)]
fn solve_batch(
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    mu: f64,
    mode: &str,
    workers: Option<usize>,
    rho: Option<f64>,
    tol: f64,
    max_iters: usize,
    backend: &str,
    stop_metric: &str,
) -> PyResult<BatchSolution> {
    let config = config_from(rho, tol, max_iters, backend, stop_metric)?;
    let a = sym_matrix(a)?;
    let b = ColMatrix::from_columns(&b).map_err(value_error)?;
    let v = ColMatrix::from_columns(&v).map_err(value_error)?;
    let batch = BatchProblem::new(
        a,
        b,
        v,
        BatchBounds::Shared { lower, upper },
        BatchMu::Shared(mu),
    )
    .map_err(value_error)?;
    let result = match mode {
        "sync" => solve_batch_sync(&batch, &config).map_err(value_error)?,
        "async" => {
            let workers = workers
                .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
            solve_batch_async(&batch, &config, workers).map_err(value_error)?
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown mode {other:?} (expected \"sync\" or \"async\")"
            )))
        }
    };
    let columns = (0..batch.count()).map(|j| result.z.col(j).to_vec()).collect();
    let statuses = result
        .statuses
        .iter()
        .map(|s| match s {
            ColumnStatus::Converged => "converged".to_string(),
            ColumnStatus::MaxItersReached => "max-iters".to_string(),
            ColumnStatus::Failed(msg) => format!("failed: {msg}"),
        })
        .collect();
    Ok(BatchSolution {
        z: columns,
        iterations: result.iterations,
        statuses,
        wall_time_seconds: result.total_wall_time.as_secs_f64(),
    })
}

/// The spectral balance point sqrt(sigma_min_nonzero * sigma_max) of `a`,
/// used when no penalty is given (1.0 for the zero matrix).
#[pyfunction]
fn default_rho(a: Vec<Vec<f64>>) -> PyResult<f64> {
    rho::default_rho(&sym_matrix(a)?).map_err(value_error)
}

/// Maximum KKT residual of `z` for `problem` (stationarity with active-bound
/// sign conditions, plus any bound violation).
#[pyfunction]
fn kkt_residual(problem: &Problem, z: Vec<f64>) -> PyResult<f64> {
    verify::kkt_residual(&problem.inner, &z)
        .map(|report| report.max_residual)
        .map_err(value_error)
}

/// Reference solution by exhaustive active-set enumeration (dimension <= 10).
#[pyfunction]
fn oracle_solve(problem: &Problem) -> PyResult<Vec<f64>> {
    verify::oracle_solve(&problem.inner).map_err(value_error)
}

/// Rounds a relaxed solution in [0,1]^D to the nearest binary vector
/// (ties go up). Values outside [0,1] are rejected.
#[pyfunction]
fn binarize(z: Vec<f64>) -> PyResult<Vec<f64>> {
    hashapp::binarize(&z).map_err(value_error)
}

#[pymodule]
fn proxbqp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<Solution>()?;
    m.add_class::<BatchSolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_batch, m)?)?;
    m.add_function(wrap_pyfunction!(default_rho, m)?)?;
    m.add_function(wrap_pyfunction!(kkt_residual, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_solve, m)?)?;
    m.add_function(wrap_pyfunction!(binarize, m)?)?;
    Ok(())
}
