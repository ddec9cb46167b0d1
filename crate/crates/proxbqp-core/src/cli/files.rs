//! Problem-set and solution file formats.
//!
//! Both formats are versioned, line-oriented text: `#` starts a comment that
//! runs to end of line, blank lines are ignored, tokens are whitespace-
//! separated, and matrices are written row-major (one matrix row per line).
//! Floats are written with Rust's shortest round-trip formatting, so
//! parse ∘ write ∘ parse = parse holds exactly.
//!
//! # Problem sets (`proxbqp-problemset v1`)
//!
//! QP form — N problems sharing one D×D matrix:
//!
//! ```text
//! proxbqp-problemset v1
//! form qp
//! dim 2
//! count 3
//! bounds shared        # or: percolumn
//! mu shared            # or: percolumn
//! A                    # D rows of D entries
//! 4 2
//! 2 3
//! MU                   # one value (shared) or N values (percolumn)
//! 1
//! L                    # one row of D (shared) or D rows of N (percolumn)
//! 0 0
//! U
//! 1 1
//! B                    # D rows of N entries: row i holds coordinate i
//! 1 0.5 0
//! -1 2 1
//! V                    # same layout as B
//! 0.2 0.8 0.5
//! 0.9 0.1 0.5
//! ```
//!
//! Hashing form — N least-squares subproblems sharing an M×D map C, with
//! the box fixed to [0,1] (so no bounds lines):
//!
//! ```text
//! proxbqp-problemset v1
//! form hashing
//! dim 2                # D: columns of C
//! count 3              # N: subproblems
//! rows 2               # M: rows of C
//! mu shared
//! MU
//! 1
//! C                    # M rows of D entries
//! 1 0
//! 0 1
//! D                    # M rows of N entries: targets
//! 0.1 0.9 0.4
//! 0.6 0.2 0.7
//! V                    # D rows of N entries: prox centers
//! 1 0 1
//! 0 1 1
//! ```
//!
//! # Solutions (`proxbqp-solution v1`)
//!
//! ```text
//! proxbqp-solution v1
//! dim 2
//! count 3
//! rho 2.5
//! backend cholesky     # cholesky | cg
//! mode sync            # sync | async
//! wall-time-seconds 0.0123
//! kkt-max 1.2e-6
//! kkt-median 3.4e-7
//! iterations 12 12 12
//! statuses converged converged max-iters
//! Z                    # D rows of N entries
//! 0.1 0.2 0.3
//! 0.4 0.5 0.6
//! ```
//!
//! Status tokens are `converged`, `max-iters`, and `failed` (the failure
//! message is not persisted).

use std::path::Path;

use crate::batch::{BatchBounds, BatchMu, BatchProblem, ColumnStatus};
use crate::error::{Error, Result};
use crate::hashapp::HashSubproblemSet;
use crate::linalg::{ColMatrix, SymMatrix};
use crate::solver::Backend;

use super::Mode;

/// A parsed problem-set file: either the direct QP form or the hashing form
/// that still needs lowering through `hashapp::build_relaxed_batch`.
#[derive(Debug, Clone)]
pub enum ProblemSetFile {
    Qp(BatchProblem),
    Hashing(HashSubproblemSet),
}

impl ProblemSetFile {
    pub fn count(&self) -> usize {
        match self {
            ProblemSetFile::Qp(b) => b.count(),
            ProblemSetFile::Hashing(h) => h.count(),
        }
    }
    pub fn dim(&self) -> usize {
        match self {
            ProblemSetFile::Qp(b) => b.dim(),
            ProblemSetFile::Hashing(h) => h.dim(),
        }
    }
}

/// A parsed or to-be-written solution file.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFile {
    pub rho: f64,
    pub backend: Backend,
    pub mode: Mode,
    pub wall_time_seconds: f64,
    pub kkt_max: f64,
    pub kkt_median: f64,
    pub iterations: Vec<usize>,
    pub statuses: Vec<ColumnStatus>,
    /// D×N solutions, one column per problem.
    pub z: ColMatrix,
}

// ---------------------------------------------------------------------------
// Line cursor
// ---------------------------------------------------------------------------

struct Cursor<'a> {
    /// (1-based line number, comment-stripped content) of nonempty lines.
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .filter_map(|(i, raw)| {
                let content = match raw.find('#') {
                    Some(cut) => &raw[..cut],
                    None => raw,
                };
                let content = content.trim();
                if content.is_empty() {
                    None
                } else {
                    Some((i + 1, content))
                }
            })
            .collect();
        Cursor { lines, pos: 0 }
    }

    fn last_line_number(&self) -> usize {
        self.lines.last().map(|(n, _)| *n).unwrap_or(0)
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.lines.get(self.pos) {
            Some(&entry) => {
                self.pos += 1;
                Ok(entry)
            }
            None => Err(Error::Parse {
                line: self.last_line_number() + 1,
                message: format!("unexpected end of file, expected {what}"),
            }),
        }
    }

    fn expect_exact(&mut self, want: &str) -> Result<()> {
        let (line, got) = self.next(&format!("`{want}`"))?;
        if got == want {
            Ok(())
        } else {
            Err(Error::Parse { line, message: format!("expected `{want}`, found `{got}`") })
        }
    }

    /// Parses a `key value` line, returning the value token.
    fn key_value(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (line, content) = self.next(&format!("`{key} ...`"))?;
        let mut it = content.split_whitespace();
        match (it.next(), it.next(), it.next()) {
            (Some(k), Some(v), None) if k == key => Ok((line, v)),
            _ => Err(Error::Parse {
                line,
                message: format!("expected `{key} <value>`, found `{content}`"),
            }),
        }
    }

    fn key_usize(&mut self, key: &str, at_least: usize) -> Result<usize> {
        let (line, v) = self.key_value(key)?;
        let n: usize = v.parse().map_err(|_| Error::Parse {
            line,
            message: format!("`{key}` value `{v}` is not a nonnegative integer"),
        })?;
        if n < at_least {
            return Err(Error::Parse {
                line,
                message: format!("`{key}` must be at least {at_least}, got {n}"),
            });
        }
        Ok(n)
    }

    fn key_f64(&mut self, key: &str) -> Result<f64> {
        let (line, v) = self.key_value(key)?;
        v.parse().map_err(|_| Error::Parse {
            line,
            message: format!("`{key}` value `{v}` is not a number"),
        })
    }

    /// Parses one line of exactly `n` floats.
    fn float_row(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let (line, content) = self.next(what)?;
        let mut out = Vec::with_capacity(n);
        for tok in content.split_whitespace() {
            let x: f64 = tok.parse().map_err(|_| Error::Parse {
                line,
                message: format!("`{tok}` in {what} is not a number"),
            })?;
            out.push(x);
        }
        if out.len() != n {
            return Err(Error::Parse {
                line,
                message: format!("{what} has {} entries, expected {n}", out.len()),
            });
        }
        Ok(out)
    }

    /// Parses `rows` lines of `cols` floats into a column-major matrix
    /// (input is row-major: line i holds row i).
    fn matrix(&mut self, rows: usize, cols: usize, name: &str) -> Result<ColMatrix> {
        let mut m = ColMatrix::zeros(rows, cols);
        for i in 0..rows {
            let row = self.float_row(cols, &format!("row {i} of {name}"))?;
            for (j, x) in row.into_iter().enumerate() {
                m.set(i, j, x);
            }
        }
        Ok(m)
    }

    fn finish(&mut self) -> Result<()> {
        match self.lines.get(self.pos) {
            None => Ok(()),
            Some(&(line, content)) => Err(Error::Parse {
                line,
                message: format!("unexpected trailing content: `{content}`"),
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// Problem sets
// ---------------------------------------------------------------------------

pub fn parse_problem_set(text: &str) -> Result<ProblemSetFile> {
    let mut cur = Cursor::new(text);
    cur.expect_exact("proxbqp-problemset v1")?;
    let (form_line, form) = cur.key_value("form")?;
    match form {
        "qp" => parse_qp_form(&mut cur),
        "hashing" => parse_hashing_form(&mut cur),
        other => Err(Error::Parse {
            line: form_line,
            message: format!("unknown form `{other}` (expected `qp` or `hashing`)"),
        }),
    }
}

fn parse_qp_form(cur: &mut Cursor) -> Result<ProblemSetFile> {
    let d = cur.key_usize("dim", 1)?;
    let n = cur.key_usize("count", 1)?;
    let (bounds_line, bounds_kind) = cur.key_value("bounds")?;
    let shared_bounds = match bounds_kind {
        "shared" => true,
        "percolumn" => false,
        other => {
            return Err(Error::Parse {
                line: bounds_line,
                message: format!("unknown bounds kind `{other}` (expected `shared` or `percolumn`)"),
            })
        }
    };
    let shared_mu = parse_mu_kind(cur)?;

    cur.expect_exact("A")?;
    let a_rows = cur.matrix(d, d, "A")?;
    let mut a_data = vec![0.0f64; d * d];
    for i in 0..d {
        for j in 0..d {
            a_data[i * d + j] = a_rows.get(i, j);
        }
    }
    let a = SymMatrix::new(d, a_data)?;

    cur.expect_exact("MU")?;
    let mu = if shared_mu {
        BatchMu::Shared(cur.float_row(1, "MU")?[0])
    } else {
        BatchMu::PerColumn(cur.float_row(n, "MU")?)
    };

    cur.expect_exact("L")?;
    let lower = if shared_bounds {
        BoundsHalf::Shared(cur.float_row(d, "L")?)
    } else {
        BoundsHalf::PerColumn(cur.matrix(d, n, "L")?)
    };
    cur.expect_exact("U")?;
    let bounds = match lower {
        BoundsHalf::Shared(l) => {
            BatchBounds::Shared { lower: l, upper: cur.float_row(d, "U")? }
        }
        BoundsHalf::PerColumn(l) => {
            BatchBounds::PerColumn { lower: l, upper: cur.matrix(d, n, "U")? }
        }
    };

    cur.expect_exact("B")?;
    let b = cur.matrix(d, n, "B")?;
    cur.expect_exact("V")?;
    let v = cur.matrix(d, n, "V")?;
    cur.finish()?;

    Ok(ProblemSetFile::Qp(BatchProblem::new(a, b, v, bounds, mu)?))
}

enum BoundsHalf {
    Shared(Vec<f64>),
    PerColumn(ColMatrix),
}

fn parse_hashing_form(cur: &mut Cursor) -> Result<ProblemSetFile> {
    let d = cur.key_usize("dim", 1)?;
    let n = cur.key_usize("count", 1)?;
    let m = cur.key_usize("rows", 1)?;
    let (mu_line, mu_kind) = cur.key_value("mu")?;
    if mu_kind != "shared" {
        return Err(Error::Parse {
            line: mu_line,
            message: format!("hashing form supports only `mu shared`, found `{mu_kind}`"),
        });
    }
    cur.expect_exact("MU")?;
    let mu = cur.float_row(1, "MU")?[0];
    cur.expect_exact("C")?;
    let c = cur.matrix(m, d, "C")?;
    cur.expect_exact("D")?;
    let dcols = cur.matrix(m, n, "D")?;
    cur.expect_exact("V")?;
    let vcols = cur.matrix(d, n, "V")?;
    cur.finish()?;
    Ok(ProblemSetFile::Hashing(HashSubproblemSet::new(c, dcols, vcols, mu)?))
}

fn parse_mu_kind(cur: &mut Cursor) -> Result<bool> {
    let (line, kind) = cur.key_value("mu")?;
    match kind {
        "shared" => Ok(true),
        "percolumn" => Ok(false),
        other => Err(Error::Parse {
            line,
            message: format!("unknown mu kind `{other}` (expected `shared` or `percolumn`)"),
        }),
    }
}

pub fn write_problem_set(file: &ProblemSetFile) -> String {
    let mut out = String::new();
    out.push_str("proxbqp-problemset v1\n");
    match file {
        ProblemSetFile::Qp(batch) => {
            let (d, n) = (batch.dim(), batch.count());
            out.push_str("form qp\n");
            out.push_str(&format!("dim {d}\ncount {n}\n"));
            let shared_bounds = matches!(batch.bounds(), BatchBounds::Shared { .. });
            out.push_str(if shared_bounds { "bounds shared\n" } else { "bounds percolumn\n" });
            let shared_mu = matches!(batch.mu(), BatchMu::Shared(_));
            out.push_str(if shared_mu { "mu shared\n" } else { "mu percolumn\n" });

            out.push_str("A\n");
            for i in 0..d {
                push_row(&mut out, (0..d).map(|j| batch.a().get(i, j)));
            }
            out.push_str("MU\n");
            match batch.mu() {
                BatchMu::Shared(m) => push_row(&mut out, std::iter::once(*m)),
                BatchMu::PerColumn(ms) => push_row(&mut out, ms.iter().copied()),
            }
            match batch.bounds() {
                BatchBounds::Shared { lower, upper } => {
                    out.push_str("L\n");
                    push_row(&mut out, lower.iter().copied());
                    out.push_str("U\n");
                    push_row(&mut out, upper.iter().copied());
                }
                BatchBounds::PerColumn { lower, upper } => {
                    out.push_str("L\n");
                    push_matrix(&mut out, lower);
                    out.push_str("U\n");
                    push_matrix(&mut out, upper);
                }
            }
            out.push_str("B\n");
            push_matrix(&mut out, batch.b());
            out.push_str("V\n");
            push_matrix(&mut out, batch.v());
        }
        ProblemSetFile::Hashing(set) => {
            out.push_str("form hashing\n");
            out.push_str(&format!(
                "dim {}\ncount {}\nrows {}\nmu shared\n",
                set.dim(),
                set.count(),
                set.c().rows()
            ));
            out.push_str("MU\n");
            push_row(&mut out, std::iter::once(set.mu()));
            out.push_str("C\n");
            push_matrix(&mut out, set.c());
            out.push_str("D\n");
            push_matrix(&mut out, set.dcols());
            out.push_str("V\n");
            push_matrix(&mut out, set.vcols());
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Solutions
// ---------------------------------------------------------------------------

pub fn write_solution(sol: &SolutionFile) -> String {
    let (d, n) = (sol.z.rows(), sol.z.cols());
    let mut out = String::new();
    out.push_str("proxbqp-solution v1\n");
    out.push_str(&format!("dim {d}\ncount {n}\n"));
    out.push_str(&format!("rho {}\n", sol.rho));
    out.push_str(&format!(
        "backend {}\n",
        match sol.backend {
            Backend::Cholesky => "cholesky",
            Backend::ConjugateGradient => "cg",
        }
    ));
    out.push_str(&format!(
        "mode {}\n",
        match sol.mode {
            Mode::Sync => "sync",
            Mode::Async => "async",
        }
    ));
    out.push_str(&format!("wall-time-seconds {}\n", sol.wall_time_seconds));
    out.push_str(&format!("kkt-max {}\n", sol.kkt_max));
    out.push_str(&format!("kkt-median {}\n", sol.kkt_median));
    out.push_str("iterations");
    for it in &sol.iterations {
        out.push_str(&format!(" {it}"));
    }
    out.push('\n');
    out.push_str("statuses");
    for s in &sol.statuses {
        out.push_str(match s {
            ColumnStatus::Converged => " converged",
            ColumnStatus::MaxItersReached => " max-iters",
            ColumnStatus::Failed(_) => " failed",
        });
    }
    out.push('\n');
    out.push_str("Z\n");
    push_matrix(&mut out, &sol.z);
    out
}

pub fn parse_solution(text: &str) -> Result<SolutionFile> {
    let mut cur = Cursor::new(text);
    cur.expect_exact("proxbqp-solution v1")?;
    let d = cur.key_usize("dim", 1)?;
    let n = cur.key_usize("count", 1)?;
    let rho = cur.key_f64("rho")?;
    let (backend_line, backend) = cur.key_value("backend")?;
    let backend = match backend {
        "cholesky" => Backend::Cholesky,
        "cg" => Backend::ConjugateGradient,
        other => {
            return Err(Error::Parse {
                line: backend_line,
                message: format!("unknown backend `{other}` (expected `cholesky` or `cg`)"),
            })
        }
    };
    let (mode_line, mode) = cur.key_value("mode")?;
    let mode = match mode {
        "sync" => Mode::Sync,
        "async" => Mode::Async,
        other => {
            return Err(Error::Parse {
                line: mode_line,
                message: format!("unknown mode `{other}` (expected `sync` or `async`)"),
            })
        }
    };
    let wall_time_seconds = cur.key_f64("wall-time-seconds")?;
    let kkt_max = cur.key_f64("kkt-max")?;
    let kkt_median = cur.key_f64("kkt-median")?;

    let (its_line, its_content) = cur.next("`iterations ...`")?;
    let mut its_tokens = its_content.split_whitespace();
    if its_tokens.next() != Some("iterations") {
        return Err(Error::Parse { line: its_line, message: "expected `iterations ...`".into() });
    }
    let iterations: Vec<usize> = its_tokens
        .map(|t| {
            t.parse().map_err(|_| Error::Parse {
                line: its_line,
                message: format!("iteration count `{t}` is not a nonnegative integer"),
            })
        })
        .collect::<Result<_>>()?;
    if iterations.len() != n {
        return Err(Error::Parse {
            line: its_line,
            message: format!("got {} iteration counts, expected {n}", iterations.len()),
        });
    }

    let (st_line, st_content) = cur.next("`statuses ...`")?;
    let mut st_tokens = st_content.split_whitespace();
    if st_tokens.next() != Some("statuses") {
        return Err(Error::Parse { line: st_line, message: "expected `statuses ...`".into() });
    }
    let statuses: Vec<ColumnStatus> = st_tokens
        .map(|t| match t {
            "converged" => Ok(ColumnStatus::Converged),
            "max-iters" => Ok(ColumnStatus::MaxItersReached),
            "failed" => Ok(ColumnStatus::Failed(String::new())),
            other => Err(Error::Parse {
                line: st_line,
                message: format!("unknown status `{other}`"),
            }),
        })
        .collect::<Result<_>>()?;
    if statuses.len() != n {
        return Err(Error::Parse {
            line: st_line,
            message: format!("got {} statuses, expected {n}", statuses.len()),
        });
    }

    cur.expect_exact("Z")?;
    let z = cur.matrix(d, n, "Z")?;
    cur.finish()?;
    Ok(SolutionFile {
        rho,
        backend,
        mode,
        wall_time_seconds,
        kkt_max,
        kkt_median,
        iterations,
        statuses,
        z,
    })
}

// ---------------------------------------------------------------------------
// Path helpers and formatting
// ---------------------------------------------------------------------------

pub fn read_problem_set(path: &Path) -> Result<ProblemSetFile> {
    parse_problem_set(&std::fs::read_to_string(path)?)
}

pub fn write_solution_to(path: &Path, sol: &SolutionFile) -> Result<()> {
    Ok(std::fs::write(path, write_solution(sol))?)
}

fn push_row(out: &mut String, row: impl Iterator<Item = f64>) {
    let mut first = true;
    for x in row {
        if !first {
            out.push(' ');
        }
        out.push_str(&format!("{x}"));
        first = false;
    }
    out.push('\n');
}

fn push_matrix(out: &mut String, m: &ColMatrix) {
    for i in 0..m.rows() {
        push_row(out, (0..m.cols()).map(|j| m.get(i, j)));
    }
}
