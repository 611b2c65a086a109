//! Real decomposition of complex and widely-linear maps, plus the PSD matrix
//! utilities shared by every rate computation.
//!
//! Complex matrices map to real block form
//!
//! ```text
//!     A  ->  [[Re A, -Im A],
//!             [Im A,  Re A]]
//! ```
//!
//! so that a complex vector `x` stacked as `[Re x; Im x]` satisfies
//! `stack(A x) = realdec(A) * stack(x)`. Real parts always come first; the
//! whole crate uses this one block convention.
//!
//! A widely-linear map `y = G1 x + G2 conj(x)` is linear over the reals and
//! has the real form `[[Re(G1+G2), -Im(G1-G2)], [Im(G1+G2), Re(G1-G2)]]`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::ops::Deref;

/// Dense complex matrix (channel gains, widely-linear coefficients).
pub type CMat = DMatrix<Complex64>;
/// Dense real matrix.
pub type RMat = DMatrix<f64>;
/// Dense complex vector.
pub type CVec = DVector<Complex64>;
/// Dense real vector.
pub type RVec = DVector<f64>;

/// Errors from the real-decomposition and PSD utilities.
#[derive(Debug, thiserror::Error)]
pub enum WlError {
    #[error("matrix is not positive definite after the eigenvalue floor")]
    NonPositiveDefinite,
    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Real matrix of size `2m x 2n` produced by decomposing a complex `m x n`
/// matrix (or a widely-linear map between those spaces).
#[derive(Debug, Clone, PartialEq)]
pub struct RealBlockMatrix {
    mat: RMat,
    complex_rows: usize,
    complex_cols: usize,
}

impl RealBlockMatrix {
    fn new(mat: RMat, complex_rows: usize, complex_cols: usize) -> Self {
        debug_assert_eq!(mat.nrows(), 2 * complex_rows);
        debug_assert_eq!(mat.ncols(), 2 * complex_cols);
        Self {
            mat,
            complex_rows,
            complex_cols,
        }
    }

    /// Wraps an already-assembled real block matrix (e.g. a product of
    /// decompositions, which stays in block form).
    pub fn from_raw(mat: RMat, complex_rows: usize, complex_cols: usize) -> Self {
        Self::new(mat, complex_rows, complex_cols)
    }

    /// Dimensions of the complex matrix this block matrix represents.
    pub fn complex_dims(&self) -> (usize, usize) {
        (self.complex_rows, self.complex_cols)
    }

    pub fn matrix(&self) -> &RMat {
        &self.mat
    }

    pub fn into_inner(self) -> RMat {
        self.mat
    }
}

impl Deref for RealBlockMatrix {
    type Target = RMat;

    fn deref(&self) -> &RMat {
        &self.mat
    }
}

/// Stacks a complex vector as `[Re x; Im x]`.
pub fn complex_to_real_vec(x: &CVec) -> RVec {
    let n = x.len();
    RVec::from_fn(2 * n, |i, _| if i < n { x[i].re } else { x[i - n].im })
}

/// Inverse of [`complex_to_real_vec`]; `x` must have even length.
pub fn real_to_complex_vec(x: &RVec) -> CVec {
    assert!(x.len() % 2 == 0, "real-stacked vector must have even length");
    let n = x.len() / 2;
    CVec::from_fn(n, |i, _| Complex64::new(x[i], x[i + n]))
}

/// Maps a complex matrix to its `[[Re, -Im], [Im, Re]]` real block form.
///
/// The map is a ring homomorphism: it preserves sums and products, and
/// `det(realdec(A)) == |det(A)|^2` for square `A`.
pub fn real_decompose(a: &CMat) -> RealBlockMatrix {
    let (m, n) = (a.nrows(), a.ncols());
    let mut out = RMat::zeros(2 * m, 2 * n);
    for i in 0..m {
        for j in 0..n {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + m, j)] = z.im;
            out[(i + m, j + n)] = z.re;
        }
    }
    RealBlockMatrix::new(out, m, n)
}

/// Widely-linear map `y = gamma1 * x + gamma2 * conj(x)`.
///
/// Models I/Q-imbalanced transceiver chains; `gamma1 = I, gamma2 = 0` is the
/// ideal (strictly linear) transceiver.
#[derive(Debug, Clone)]
pub struct WidelyLinearMap {
    gamma1: CMat,
    gamma2: CMat,
}

impl WidelyLinearMap {
    pub fn new(gamma1: CMat, gamma2: CMat) -> Result<Self, WlError> {
        if gamma1.shape() != gamma2.shape() {
            return Err(WlError::DimensionMismatch(format!(
                "gamma1 is {:?}, gamma2 is {:?}",
                gamma1.shape(),
                gamma2.shape()
            )));
        }
        Ok(Self { gamma1, gamma2 })
    }

    /// The ideal transceiver of the given dimension.
    pub fn identity(dim: usize) -> Self {
        Self {
            gamma1: CMat::identity(dim, dim),
            gamma2: CMat::zeros(dim, dim),
        }
    }

    pub fn gamma1(&self) -> &CMat {
        &self.gamma1
    }

    pub fn gamma2(&self) -> &CMat {
        &self.gamma2
    }

    /// Output/input dimensions as a complex map.
    pub fn dims(&self) -> (usize, usize) {
        self.gamma1.shape()
    }

    /// Evaluates `gamma1 * x + gamma2 * conj(x)` in the complex domain.
    pub fn apply(&self, x: &CVec) -> CVec {
        &self.gamma1 * x + &self.gamma2 * x.map(|z| z.conj())
    }

    /// Composition `self` after `inner`:
    /// `(G1, G2) o (L1, L2) = (G1 L1 + G2 conj(L2), G1 L2 + G2 conj(L1))`.
    pub fn compose(&self, inner: &Self) -> Result<Self, WlError> {
        if self.gamma1.ncols() != inner.gamma1.nrows() {
            return Err(WlError::DimensionMismatch(format!(
                "outer takes {} inputs, inner produces {}",
                self.gamma1.ncols(),
                inner.gamma1.nrows()
            )));
        }
        let l1c = inner.gamma1.map(|z| z.conj());
        let l2c = inner.gamma2.map(|z| z.conj());
        Ok(Self {
            gamma1: &self.gamma1 * &inner.gamma1 + &self.gamma2 * l2c,
            gamma2: &self.gamma1 * &inner.gamma2 + &self.gamma2 * l1c,
        })
    }

    /// Real-domain representation acting on `[Re x; Im x]` stacks:
    /// `[[Re(G1+G2), -Im(G1-G2)], [Im(G1+G2), Re(G1-G2)]]`.
    pub fn real_decompose(&self) -> RealBlockMatrix {
        let (m, n) = self.gamma1.shape();
        let sum = &self.gamma1 + &self.gamma2;
        let diff = &self.gamma1 - &self.gamma2;
        let mut out = RMat::zeros(2 * m, 2 * n);
        for i in 0..m {
            for j in 0..n {
                out[(i, j)] = sum[(i, j)].re;
                out[(i, j + n)] = -diff[(i, j)].im;
                out[(i + m, j)] = sum[(i, j)].im;
                out[(i + m, j + n)] = diff[(i, j)].re;
            }
        }
        RealBlockMatrix::new(out, m, n)
    }
}

/// Relative eigenvalue floor applied before log-determinants and solves.
///
/// Surrogate expansions evaluate near-singular interference covariances when
/// transmit powers approach zero; the floor keeps those factorizations
/// well-posed without moving healthy spectra.
const EIG_FLOOR_REL: f64 = 1e-12;
const SYMMETRY_REL_TOL: f64 = 1e-10;
const MIN_EIG_REL_TOL: f64 = 1e-10;

/// Real symmetric positive semidefinite matrix with a frozen
/// eigendecomposition.
///
/// Construction symmetrizes the input as `(S + S^T)/2`, rejects matrices that
/// are asymmetric or indefinite beyond tolerance, and clamps eigenvalues below
/// `1e-12 * trace / dim` up to that floor. Log-determinants, solves, and
/// square roots all reuse the stored factorization.
#[derive(Debug, Clone)]
pub struct PsdMatrix {
    mat: RMat,
    eigvals: RVec,
    eigvecs: RMat,
}

impl PsdMatrix {
    pub fn new(mat: RMat) -> Result<Self, WlError> {
        if mat.nrows() != mat.ncols() {
            return Err(WlError::DimensionMismatch(format!(
                "expected square matrix, got {:?}",
                mat.shape()
            )));
        }
        let norm = mat.norm();
        let asym = (&mat - mat.transpose()).norm();
        if asym > SYMMETRY_REL_TOL * norm.max(1e-300) && asym > 1e-300 {
            return Err(WlError::NotSymmetric);
        }
        let sym = (&mat + mat.transpose()) * 0.5;
        let dim = sym.nrows();
        let eig = sym.symmetric_eigen();
        let max_eig = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -MIN_EIG_REL_TOL * max_eig.max(1e-300) {
            return Err(WlError::NonPositiveDefinite);
        }
        let trace: f64 = eig.eigenvalues.iter().sum();
        let floor = EIG_FLOOR_REL * trace / dim as f64;
        let eigvals = eig.eigenvalues.map(|l| l.max(floor));
        let mat = &eig.eigenvectors
            * RMat::from_diagonal(&eigvals)
            * eig.eigenvectors.transpose();
        Ok(Self {
            mat,
            eigvals,
            eigvecs: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// The floored symmetric matrix.
    pub fn matrix(&self) -> &RMat {
        &self.mat
    }

    pub fn into_inner(self) -> RMat {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.eigvals.iter().sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigvals.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `log2 det(S)` of the floored matrix.
    pub fn logdet2(&self) -> Result<f64, WlError> {
        let mut acc = 0.0;
        for &l in self.eigvals.iter() {
            if l <= 0.0 {
                return Err(WlError::NonPositiveDefinite);
            }
            acc += l.log2();
        }
        Ok(acc)
    }

    /// Solves `S X = B` through the stored factorization.
    pub fn solve(&self, b: &RMat) -> Result<RMat, WlError> {
        if b.nrows() != self.dim() {
            return Err(WlError::DimensionMismatch(format!(
                "matrix is {}x{}, rhs has {} rows",
                self.dim(),
                self.dim(),
                b.nrows()
            )));
        }
        if self.eigvals.iter().any(|&l| l <= 0.0) {
            return Err(WlError::NonPositiveDefinite);
        }
        let scaled = RMat::from_fn(self.dim(), b.ncols(), |i, j| {
            (self.eigvecs.column(i).dot(&b.column(j))) / self.eigvals[i]
        });
        Ok(&self.eigvecs * scaled)
    }

    /// Inverse via the stored factorization.
    pub fn inverse(&self) -> Result<RMat, WlError> {
        self.solve(&RMat::identity(self.dim(), self.dim()))
    }

    /// Symmetric PSD square root; negative dust is clamped at zero.
    pub fn sqrt(&self) -> RMat {
        let roots = self.eigvals.map(|l| l.max(0.0).sqrt());
        &self.eigvecs * RMat::from_diagonal(&roots) * self.eigvecs.transpose()
    }
}

/// `log2 det` and inverse of a strictly PD matrix via Cholesky, falling back
/// to the floored eigendecomposition when the factorization fails.
pub(crate) fn logdet2_and_inverse(a: &RMat) -> Result<(f64, RMat), WlError> {
    if let Some(chol) = a.clone().cholesky() {
        let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.log2()).sum::<f64>();
        if logdet.is_finite() {
            return Ok((logdet, chol.inverse()));
        }
    }
    let p = PsdMatrix::new(a.clone())?;
    Ok((p.logdet2()?, p.inverse()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rng: &mut ChaCha8Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    fn random_cmat(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CMat {
        CMat::from_fn(m, n, |_, _| Complex64::new(randn(rng), randn(rng)))
    }

    fn random_rmat(rng: &mut ChaCha8Rng, m: usize, n: usize) -> RMat {
        RMat::from_fn(m, n, |_, _| randn(rng))
    }

    fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> RMat {
        let a = random_rmat(rng, n, n);
        &a * a.transpose() + RMat::identity(n, n) * 0.1
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn real_decompose_identity_scalar() {
        let a = CMat::from_element(1, 1, c(1.0, 0.0));
        let r = real_decompose(&a);
        assert_eq!(*r.matrix(), RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn real_decompose_imaginary_unit_is_quarter_rotation() {
        let a = CMat::from_element(1, 1, c(0.0, 1.0));
        let r = real_decompose(&a);
        assert_eq!(*r.matrix(), RMat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
    }

    #[test]
    fn real_decompose_is_multiplicative() {
        // Oracle: multiply in the complex domain, then decompose.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_cmat(&mut rng, 2, 3);
            let b = random_cmat(&mut rng, 3, 2);
            let direct = real_decompose(&(&a * &b));
            let split = real_decompose(&a).matrix() * real_decompose(&b).matrix();
            assert!((direct.matrix() - &split).norm() <= 1e-12 * split.norm().max(1.0));
        }
    }

    #[test]
    fn wl_ideal_map_is_identity() {
        let w = WidelyLinearMap::identity(3);
        let r = w.real_decompose();
        assert_eq!(*r.matrix(), RMat::identity(6, 6));
    }

    #[test]
    fn wl_pure_conjugation() {
        let w = WidelyLinearMap::new(
            CMat::zeros(1, 1),
            CMat::from_element(1, 1, c(1.0, 0.0)),
        )
        .unwrap();
        let r = w.real_decompose();
        assert_eq!(*r.matrix(), RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
    }

    #[test]
    fn wl_real_form_matches_complex_evaluation() {
        // Oracle: evaluate gamma1 x + gamma2 conj(x) directly in C.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = WidelyLinearMap::new(random_cmat(&mut rng, 1, 1), random_cmat(&mut rng, 1, 1))
            .unwrap();
        let wr = w.real_decompose();
        for _ in 0..100 {
            let x = CVec::from_fn(1, |_, _| c(randn(&mut rng), randn(&mut rng)));
            let direct = complex_to_real_vec(&w.apply(&x));
            let via_real = wr.matrix() * complex_to_real_vec(&x);
            assert!((direct - via_real).norm() <= 1e-12);
        }
    }

    #[test]
    fn wl_dimension_mismatch_rejected() {
        let err = WidelyLinearMap::new(CMat::zeros(2, 2), CMat::zeros(2, 3));
        assert!(matches!(err, Err(WlError::DimensionMismatch(_))));
    }

    #[test]
    fn wl_composition_matches_product_of_real_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let outer =
                WidelyLinearMap::new(random_cmat(&mut rng, 2, 3), random_cmat(&mut rng, 2, 3))
                    .unwrap();
            let inner =
                WidelyLinearMap::new(random_cmat(&mut rng, 3, 2), random_cmat(&mut rng, 3, 2))
                    .unwrap();
            let composed = outer.compose(&inner).unwrap().real_decompose();
            let product = outer.real_decompose().matrix() * inner.real_decompose().matrix();
            assert!((composed.matrix() - &product).norm() <= 1e-12 * product.norm().max(1.0));
        }
    }

    #[test]
    fn logdet2_identity_is_zero() {
        let s = PsdMatrix::new(RMat::identity(2, 2)).unwrap();
        assert_eq!(s.logdet2().unwrap(), 0.0);
    }

    #[test]
    fn logdet2_scalar_four_is_two() {
        let s = PsdMatrix::new(RMat::from_element(1, 1, 4.0)).unwrap();
        assert_relative_eq!(s.logdet2().unwrap(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn logdet2_matches_eigenvalue_sum() {
        // Oracle: sum of log2 eigenvalues computed independently here.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let raw = random_psd(&mut rng, 6);
            let expected: f64 = raw
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .map(|l| l.log2())
                .sum();
            let got = PsdMatrix::new(raw).unwrap().logdet2().unwrap();
            assert_relative_eq!(got, expected, max_relative = 1e-9, epsilon = 1e-9);
        }
    }

    #[test]
    fn logdet2_rejects_zero_matrix() {
        let s = PsdMatrix::new(RMat::zeros(3, 3)).unwrap();
        assert!(matches!(s.logdet2(), Err(WlError::NonPositiveDefinite)));
    }

    #[test]
    fn psd_rejects_indefinite() {
        let m = RMat::from_diagonal(&RVec::from_vec(vec![1.0, -0.5]));
        assert!(matches!(PsdMatrix::new(m), Err(WlError::NonPositiveDefinite)));
    }

    #[test]
    fn solve_identity_returns_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let b = random_rmat(&mut rng, 4, 2);
        let s = PsdMatrix::new(RMat::identity(4, 4)).unwrap();
        assert!((s.solve(&b).unwrap() - &b).norm() <= 1e-12);
    }

    #[test]
    fn solve_diagonal() {
        let s = PsdMatrix::new(RMat::from_diagonal(&RVec::from_vec(vec![2.0, 2.0]))).unwrap();
        let x = s.solve(&RMat::identity(2, 2)).unwrap();
        assert!((x - RMat::from_diagonal(&RVec::from_vec(vec![0.5, 0.5]))).norm() <= 1e-14);
    }

    #[test]
    fn solve_residual_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..5 {
            let s_raw = random_psd(&mut rng, 8);
            let b = random_rmat(&mut rng, 8, 3);
            let s = PsdMatrix::new(s_raw.clone()).unwrap();
            let x = s.solve(&b).unwrap();
            let resid = (&s_raw * &x - &b).norm() / b.norm();
            assert!(resid <= 1e-9, "residual {resid}");
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let raw = random_psd(&mut rng, 5);
        let s = PsdMatrix::new(raw).unwrap();
        let r = s.sqrt();
        assert!((&r * r.transpose() - s.matrix()).norm() <= 1e-10 * s.matrix().norm());
    }

    #[test]
    fn det_identity_squared_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let a = random_cmat(&mut rng, 4, 4);
            let det_c = a.clone().lu().determinant().norm();
            let det_r = real_decompose(&a).matrix().clone().lu().determinant();
            assert_relative_eq!(det_r, det_c * det_c, max_relative = 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn real_decompose_is_additive(seed in 0u64..1u64 << 48) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_cmat(&mut rng, 3, 2);
            let b = random_cmat(&mut rng, 3, 2);
            let lhs = real_decompose(&(&a + &b));
            let rhs = real_decompose(&a).matrix() + real_decompose(&b).matrix();
            prop_assert!((lhs.matrix() - &rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
        }

        #[test]
        fn logdet2_of_gram_plus_identity_is_finite(seed in 0u64..1u64 << 48) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_rmat(&mut rng, 4, 6);
            let s = PsdMatrix::new(&a * a.transpose() + RMat::identity(4, 4)).unwrap();
            prop_assert!(s.logdet2().unwrap().is_finite());
        }

        #[test]
        fn round_trip_vec(seed in 0u64..1u64 << 48) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = CVec::from_fn(5, |_, _| c(randn(&mut rng), randn(&mut rng)));
            let back = real_to_complex_vec(&complex_to_real_vec(&x));
            prop_assert!((back - &x).norm() <= 1e-15);
        }
    }
}
