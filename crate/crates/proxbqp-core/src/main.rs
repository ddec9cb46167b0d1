//! Command-line front end for the batch proximal box-QP solver.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use proxbqp_core::cli::{self, BenchOptions, Mode, SolveOptions};
use proxbqp_core::rho::RhoPolicy;
use proxbqp_core::solver::{Backend, StopMetric};

#[derive(Parser)]
#[command(name = "proxbqp", version, about = "Batch proximal box-constrained QP solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem-set file and write a solution file.
    Solve {
        /// Input problem-set path.
        input: PathBuf,
        /// Output solution path.
        output: PathBuf,
        /// Penalty parameter: `auto` or a positive number.
        #[arg(long, value_parser = parse_rho, default_value = "auto")]
        rho: RhoPolicy,
        /// Stopping tolerance on the iterate change.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        /// Iteration cap per problem.
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
        /// Linear-system backend.
        #[arg(long, value_enum, default_value_t = BackendArg::Cholesky)]
        backend: BackendArg,
        /// Lockstep multi-column iteration or independent per-problem solves.
        #[arg(long, value_enum, default_value_t = ModeArg::Sync)]
        mode: ModeArg,
        /// Worker threads for async mode (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Round the solution to {0,1} after solving (hashing sets).
        #[arg(long)]
        binarize: bool,
        /// Convergence metric: absolute or relative iterate change.
        #[arg(long, value_enum, default_value_t = StopMetricArg::Abs)]
        stop_metric: StopMetricArg,
    },
    /// Generate a seeded random batch and time the solver on it.
    Bench {
        /// Number of problems in the batch.
        #[arg(long, default_value_t = 60_000)]
        n: usize,
        /// Problem dimension.
        #[arg(long, default_value_t = 32)]
        d: usize,
        /// RNG seed; the iteration counts are reproducible per seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Linear-system backend.
        #[arg(long, value_enum, default_value_t = BackendArg::Cholesky)]
        backend: BackendArg,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Cholesky,
    Cg,
}

impl From<BackendArg> for Backend {
    fn from(arg: BackendArg) -> Backend {
        match arg {
            BackendArg::Cholesky => Backend::Cholesky,
            BackendArg::Cg => Backend::ConjugateGradient,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sync,
    Async,
}

#[derive(Clone, Copy, ValueEnum)]
enum StopMetricArg {
    Abs,
    Rel,
}

fn parse_rho(s: &str) -> Result<RhoPolicy, String> {
    if s == "auto" {
        return Ok(RhoPolicy::Auto);
    }
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(RhoPolicy::Fixed(x)),
        _ => Err(format!("`{s}` is neither `auto` nor a positive number")),
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve {
            input,
            output,
            rho,
            tol,
            max_iters,
            backend,
            mode,
            workers,
            binarize,
            stop_metric,
        } => {
            let opts = SolveOptions {
                rho,
                tol,
                max_iters,
                backend: backend.into(),
                mode: match mode {
                    ModeArg::Sync => Mode::Sync,
                    ModeArg::Async => Mode::Async,
                },
                workers,
                binarize,
                stop_metric: match stop_metric {
                    StopMetricArg::Abs => StopMetric::MaxAbsChange,
                    StopMetricArg::Rel => StopMetric::RelativeChange,
                },
            };
            cli::cmd_solve(&input, &output, &opts)
        }
        Command::Bench { n, d, seed, backend, workers } => {
            let opts = BenchOptions { n, d, seed, backend: backend.into(), workers };
            cli::cmd_bench(&opts)
        }
    };
    std::process::exit(code);
}
