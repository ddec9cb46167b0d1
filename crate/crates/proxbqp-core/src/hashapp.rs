//! Binary-hashing application layer.
//!
//! The motivating workload is a set of least-squares subproblems over binary
//! vectors,
//!
//!   minimize  ½‖C x_n − d_n‖² + (μ/2)‖x_n − v_n‖²,   x_n ∈ {0,1}^D,
//!
//! one per data point, all sharing the map C. Relaxing {0,1}^D to [0,1]^D
//! turns each into a proximal bound-constrained QP with A = CᵀC and
//! b_n = Cᵀd_n — the exact batch shape the rest of this crate solves with a
//! single factorization. Continuous solutions are binarized a posteriori.
//! High accuracy is wasted here: these solves sit inside an outer learning
//! loop, so a loose tolerance (around 1e-3) is the sensible setting.

use crate::batch::{BatchBounds, BatchMu, BatchProblem};
use crate::error::{Error, Result};
use crate::linalg::{ColMatrix, SymMatrix};

/// Tolerance for accepting almost-in-range inputs to [`binarize`].
pub const BINARIZE_RANGE_TOL: f64 = 1e-9;

/// N least-squares subproblems sharing the linear map C.
#[derive(Debug, Clone)]
pub struct HashSubproblemSet {
    /// M×D shared linear map.
    c: ColMatrix,
    /// M×N targets, one column per subproblem.
    dcols: ColMatrix,
    /// D×N proximal centers (binary in the motivating use, any reals in
    /// [0,1] work).
    vcols: ColMatrix,
    mu: f64,
}

impl HashSubproblemSet {
    pub fn new(c: ColMatrix, dcols: ColMatrix, vcols: ColMatrix, mu: f64) -> Result<Self> {
        let (m, d) = (c.rows(), c.cols());
        if m == 0 || d == 0 {
            return Err(Error::InvalidProblem("C must have at least one row and column".into()));
        }
        let n = dcols.cols();
        if n == 0 {
            return Err(Error::InvalidProblem("need at least one subproblem column".into()));
        }
        if dcols.rows() != m {
            return Err(Error::DimensionMismatch(format!(
                "C is {m}x{d} but target columns have {} rows",
                dcols.rows()
            )));
        }
        if vcols.rows() != d || vcols.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "prox centers are {}x{}, expected {d}x{n}",
                vcols.rows(),
                vcols.cols()
            )));
        }
        for (name, mat) in [("C", &c), ("D", &dcols), ("V", &vcols)] {
            if !mat.data().iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidProblem(format!("{name} contains non-finite values")));
            }
        }
        if !mu.is_finite() || mu <= 0.0 {
            return Err(Error::InvalidProblem(format!("mu must be finite and > 0, got {mu}")));
        }
        Ok(HashSubproblemSet { c, dcols, vcols, mu })
    }

    pub fn c(&self) -> &ColMatrix {
        &self.c
    }
    pub fn dcols(&self) -> &ColMatrix {
        &self.dcols
    }
    pub fn vcols(&self) -> &ColMatrix {
        &self.vcols
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    /// Number of variables per subproblem (columns of C).
    pub fn dim(&self) -> usize {
        self.c.cols()
    }
    /// Number of subproblems.
    pub fn count(&self) -> usize {
        self.dcols.cols()
    }

    /// Full objective ½‖C x − d_n‖² + (μ/2)‖x − v_n‖² of subproblem `n` at
    /// `x` (constants included, so relaxed and binary points compare
    /// directly).
    pub fn objective(&self, n: usize, x: &[f64]) -> Result<f64> {
        let (m, d) = (self.c.rows(), self.c.cols());
        if n >= self.count() {
            return Err(Error::OutOfRange(format!(
                "subproblem {n} out of range for set of {}",
                self.count()
            )));
        }
        if x.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "x has length {}, expected {d}",
                x.len()
            )));
        }
        let dcol = self.dcols.col(n);
        let mut fit = 0.0f64;
        for row in 0..m {
            let mut cx = 0.0;
            for (j, &xj) in x.iter().enumerate() {
                cx += self.c.get(row, j) * xj;
            }
            let r = cx - dcol[row];
            fit += r * r;
        }
        let vcol = self.vcols.col(n);
        let prox: f64 = x.iter().zip(vcol).map(|(&xi, &vi)| (xi - vi) * (xi - vi)).sum();
        Ok(0.5 * fit + 0.5 * self.mu * prox)
    }
}

/// Lowers the subproblem set to the shared-matrix batch form: A = CᵀC
/// (symmetric PSD by construction), b_n = Cᵀd_n, box [0,1] shared by all
/// columns, μ passed through.
pub fn build_relaxed_batch(set: &HashSubproblemSet) -> Result<BatchProblem> {
    let (d, n) = (set.dim(), set.count());
    // A = CᵀC: entry (i,j) is the dot product of columns i and j of C.
    // Computing the upper triangle once and mirroring keeps A exactly
    // symmetric.
    let mut a = vec![0.0f64; d * d];
    for i in 0..d {
        let ci = set.c.col(i);
        for j in i..d {
            let s: f64 = ci.iter().zip(set.c.col(j)).map(|(&p, &q)| p * q).sum();
            a[i * d + j] = s;
            a[j * d + i] = s;
        }
    }
    let a = SymMatrix::new(d, a)?;

    let mut b = ColMatrix::zeros(d, n);
    for col in 0..n {
        let dcol = set.dcols.col(col);
        let bcol = b.col_mut(col);
        for i in 0..d {
            bcol[i] = set.c.col(i).iter().zip(dcol).map(|(&p, &q)| p * q).sum();
        }
    }

    BatchProblem::new(
        a,
        b,
        set.vcols.clone(),
        BatchBounds::Shared { lower: vec![0.0; d], upper: vec![1.0; d] },
        BatchMu::Shared(set.mu),
    )
}

/// Rounds a relaxed solution in [0,1] to a binary vector: 1 where z ≥ 0.5,
/// else 0. Inputs outside [0,1] by more than `BINARIZE_RANGE_TOL` are
/// rejected rather than silently rounded.
pub fn binarize(z: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = z
        .iter()
        .position(|&x| !x.is_finite() || x < -BINARIZE_RANGE_TOL || x > 1.0 + BINARIZE_RANGE_TOL)
    {
        return Err(Error::OutOfRange(format!(
            "binarize input {} at coordinate {i} lies outside [0, 1]",
            z[i]
        )));
    }
    Ok(z.iter().map(|&x| if x >= 0.5 { 1.0 } else { 0.0 }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigen_extremes;

    fn set(c: ColMatrix, dcols: ColMatrix, vcols: ColMatrix, mu: f64) -> HashSubproblemSet {
        HashSubproblemSet::new(c, dcols, vcols, mu).unwrap()
    }

    #[test]
    fn identity_map_passes_targets_through() {
        // C = I: A = I and b_n = d_n.
        let c = ColMatrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let dcols = ColMatrix::from_vec(2, 3, vec![0.1, 0.9, 0.4, 0.6, 0.25, 0.75]).unwrap();
        let vcols = ColMatrix::from_vec(2, 3, vec![0.0, 1.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
        let batch = build_relaxed_batch(&set(c, dcols.clone(), vcols, 1.0)).unwrap();
        assert_eq!(batch.a().as_slice(), SymMatrix::identity(2).as_slice());
        assert_eq!(batch.b().data(), dcols.data());
    }

    #[test]
    fn rank_one_map_builds_the_semidefinite_matrix() {
        // C = [[1, 1]]: A = CᵀC = [[1,1],[1,1]], PSD of rank 1.
        let c = ColMatrix::from_vec(1, 2, vec![1.0, 1.0]).unwrap();
        let dcols = ColMatrix::from_vec(1, 1, vec![0.5]).unwrap();
        let vcols = ColMatrix::from_vec(2, 1, vec![1.0, 0.0]).unwrap();
        let batch = build_relaxed_batch(&set(c, dcols, vcols, 1.0)).unwrap();
        assert_eq!(batch.a().as_slice(), &[1.0, 1.0, 1.0, 1.0]);
        // b = Cᵀd = (0.5, 0.5).
        assert_eq!(batch.b().data(), &[0.5, 0.5]);
    }

    #[test]
    fn built_matrix_is_psd() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        for trial in 0..10 {
            let (m, d) = (2 + trial % 4, 2 + (trial / 2) % 3);
            let c = ColMatrix::from_vec(m, d, crate::synth::gaussian_vec(m * d, &mut rng))
                .unwrap();
            let dcols = ColMatrix::from_vec(m, 1, crate::synth::gaussian_vec(m, &mut rng))
                .unwrap();
            let vcols = ColMatrix::zeros(d, 1);
            let batch = build_relaxed_batch(&set(c, dcols, vcols, 1.0)).unwrap();
            // No eigenvalue may fall below -1e-10 * sigma_max.
            let e = eigen_extremes(batch.a(), 1e-8).unwrap();
            let floor = -1e-10 * e.sigma_max;
            for lam in crate::linalg::symmetric_eigenvalues(batch.a()) {
                assert!(lam >= floor, "trial {trial}: eigenvalue {lam} below {floor}");
            }
        }
    }

    #[test]
    fn relaxed_optimum_lower_bounds_binary_points_small_case() {
        // D = 2: enumerate all four binary vectors and compare objectives.
        let c = ColMatrix::from_vec(2, 2, vec![1.0, 0.25, -0.5, 1.0]).unwrap();
        let dcols = ColMatrix::from_vec(2, 1, vec![0.3, 0.8]).unwrap();
        let vcols = ColMatrix::from_vec(2, 1, vec![1.0, 0.0]).unwrap();
        let s = set(c, dcols, vcols, 0.5);
        let batch = build_relaxed_batch(&s).unwrap();
        let cfg = crate::solver::SolverConfig {
            tol: 1e-10,
            ..crate::solver::SolverConfig::default()
        };
        let r = crate::batch::solve_batch_sync(&batch, &cfg).unwrap();
        let relaxed_obj = s.objective(0, r.z.col(0)).unwrap();
        for code in 0..4u32 {
            let candidate = [f64::from(code & 1), f64::from((code >> 1) & 1)];
            let binary_obj = s.objective(0, &candidate).unwrap();
            assert!(
                relaxed_obj <= binary_obj + 1e-9,
                "relaxed {relaxed_obj} vs binary {binary_obj} at {candidate:?}"
            );
        }
    }

    #[test]
    fn binarize_rounds_and_breaks_ties_up() {
        assert_eq!(binarize(&[0.2, 0.7]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(binarize(&[0.5]).unwrap(), vec![1.0]);
        assert_eq!(binarize(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn binarize_accepts_roundoff_but_rejects_real_violations() {
        assert_eq!(binarize(&[1.0 + 0.5e-9, -0.5e-9]).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(binarize(&[1.0 + 1e-6]), Err(Error::OutOfRange(_))));
        assert!(matches!(binarize(&[-1e-6]), Err(Error::OutOfRange(_))));
        assert!(matches!(binarize(&[f64::NAN]), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn dimension_checks_catch_mismatches() {
        let c = ColMatrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let bad_targets = ColMatrix::from_vec(3, 1, vec![0.0, 0.0, 0.0]).unwrap();
        let vcols = ColMatrix::zeros(2, 1);
        assert!(HashSubproblemSet::new(c, bad_targets, vcols, 1.0).is_err());
    }

    #[test]
    fn nonpositive_mu_is_rejected() {
        let c = ColMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        let dcols = ColMatrix::from_vec(1, 1, vec![0.0]).unwrap();
        let vcols = ColMatrix::from_vec(1, 1, vec![0.0]).unwrap();
        assert!(HashSubproblemSet::new(c, dcols, vcols, 0.0).is_err());
    }
}
