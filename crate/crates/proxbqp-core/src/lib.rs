//! proxbqp-core: a solver for proximal bound-constrained quadratic programs
//!
//!   minimize  ½ xᵀA x − bᵀx + (μ/2)‖x − v‖²   subject to  l ≤ x ≤ u,
//!
//! with A symmetric positive (semi)definite and μ > 0, and for *collections*
//! of such problems that share A but differ in b, v, l, u — the shape that
//! arises when a proximal or ADMM outer loop spawns one subproblem per data
//! point (binary hashing being the motivating case, see [`hashapp`]).
//!
//! The solver is a three-step fixed-point iteration (see [`solver`]) whose
//! only expensive operation is a linear solve against A + ρI. Because A and
//! ρ are fixed across iterations *and* across problems in a collection, one
//! cached Cholesky factorization (or a warm-started conjugate-gradient
//! operator) serves every solve ([`batch`]). The penalty ρ defaults to the
//! geometric mean of the extreme curvatures of A ([`rho`]), and every answer
//! can be checked against independent oracles ([`verify`]).
//!
//! Module map:
//! * [`linalg`] — dense symmetric matrices, shifted Cholesky, CG, extreme
//!   eigenvalues.
//! * [`solver`] — the per-problem iteration, warm starts, stopping rules.
//! * [`batch`] — one factorization amortized over N problems; lockstep and
//!   per-column drivers.
//! * [`rho`] — penalty selection.
//! * [`verify`] — KKT residuals and an exact active-set enumeration oracle.
//! * [`hashapp`] — the binary-hashing reduction (A = CᵀC) and binarization.
//! * [`synth`] — seeded instance generators for benchmarks and tests.
//! * [`cli`] — file formats and the `solve`/`bench` command implementations.

pub mod batch;
pub mod cli;
pub mod error;
pub mod hashapp;
pub mod linalg;
pub mod rho;
pub mod solver;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
