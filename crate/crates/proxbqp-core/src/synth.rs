//! Seeded synthetic instance generation, shared by the benchmark command and
//! the test suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::batch::{BatchBounds, BatchMu, BatchProblem};
use crate::error::{Error, Result};
use crate::linalg::{ColMatrix, SymMatrix};

/// Random orthogonal matrix (row-major, `dim * dim`) from Gram-Schmidt
/// orthonormalization of a Gaussian matrix — the Q factor of its QR
/// decomposition. Two orthogonalization passes keep the columns orthonormal
/// to machine precision.
pub fn random_orthogonal<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    assert!(dim > 0, "orthogonal matrix needs dim >= 1");
    // Columns of q are built in order; q is stored row-major.
    let mut q = vec![0.0f64; dim * dim];
    let mut col = vec![0.0f64; dim];
    for j in 0..dim {
        loop {
            for c in col.iter_mut() {
                *c = rng.sample(StandardNormal);
            }
            for _ in 0..2 {
                for k in 0..j {
                    let mut proj = 0.0;
                    for i in 0..dim {
                        proj += col[i] * q[i * dim + k];
                    }
                    for i in 0..dim {
                        col[i] -= proj * q[i * dim + k];
                    }
                }
            }
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                for i in 0..dim {
                    q[i * dim + j] = col[i] / norm;
                }
                break;
            }
            // Degenerate draw (essentially measure zero); redraw the column.
        }
    }
    q
}

/// SPD (or PSD, if the spectrum contains zeros) matrix with the given
/// eigenvalues: A = Q diag(spectrum) Qᵀ for a random orthogonal Q. The upper
/// triangle is computed once and mirrored so the result is exactly symmetric.
pub fn spd_with_spectrum<R: Rng>(spectrum: &[f64], rng: &mut R) -> Result<SymMatrix> {
    let dim = spectrum.len();
    if dim == 0 {
        return Err(Error::InvalidProblem("spectrum must be non-empty".into()));
    }
    if spectrum.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::InvalidProblem(
            "spectrum entries must be finite and >= 0".into(),
        ));
    }
    let q = random_orthogonal(dim, rng);
    let mut data = vec![0.0f64; dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let mut s = 0.0;
            for (k, &lam) in spectrum.iter().enumerate() {
                s += q[i * dim + k] * lam * q[j * dim + k];
            }
            data[i * dim + j] = s;
            data[j * dim + i] = s;
        }
    }
    SymMatrix::new(dim, data)
}

/// Spectrum drawn log-uniformly from [lo, hi].
pub fn log_uniform_spectrum<R: Rng>(dim: usize, lo: f64, hi: f64, rng: &mut R) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo, "invalid spectrum range [{lo}, {hi}]");
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    (0..dim)
        .map(|_| {
            if ln_hi > ln_lo {
                rng.random_range(ln_lo..ln_hi).exp()
            } else {
                lo
            }
        })
        .collect()
}

/// Random SPD matrix with condition number at most `cond` (eigenvalues
/// log-uniform in [1, cond]).
pub fn random_spd_cond<R: Rng>(dim: usize, cond: f64, rng: &mut R) -> Result<SymMatrix> {
    let spectrum = log_uniform_spectrum(dim, 1.0, cond, rng);
    spd_with_spectrum(&spectrum, rng)
}

/// Standard Gaussian vector.
pub fn gaussian_vec<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Bounds from sorted Gaussian pairs: each coordinate draws two standard
/// normals; the smaller becomes the lower bound, the larger the upper.
pub fn sorted_gaussian_bounds<R: Rng>(dim: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let mut lower = Vec::with_capacity(dim);
    let mut upper = Vec::with_capacity(dim);
    for _ in 0..dim {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        lower.push(a.min(b));
        upper.push(a.max(b));
    }
    (lower, upper)
}

/// The benchmark instance family: one shared A = QᵀΛQ with Λ log-uniform in
/// [1, 100] (condition ≤ 100), standard Gaussian objective columns, Gaussian
/// proximal centers clamped to the box, shared bounds [0, 1], μ = 1.
pub fn bench_batch(n: usize, d: usize, seed: u64) -> Result<BatchProblem> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidProblem(format!(
            "benchmark needs n >= 1 and d >= 1, got n={n}, d={d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spectrum = log_uniform_spectrum(d, 1.0, 100.0, &mut rng);
    let a = spd_with_spectrum(&spectrum, &mut rng)?;
    let mut b = ColMatrix::zeros(d, n);
    let mut v = ColMatrix::zeros(d, n);
    for j in 0..n {
        for i in 0..d {
            b.set(i, j, rng.sample(StandardNormal));
            let raw: f64 = rng.sample(StandardNormal);
            v.set(i, j, raw.clamp(0.0, 1.0));
        }
    }
    BatchProblem::new(
        a,
        b,
        v,
        BatchBounds::Shared { lower: vec![0.0; d], upper: vec![1.0; d] },
        BatchMu::Shared(1.0),
    )
}
