//! Dense complex linear algebra: products, Hermitian solves, SVD and
//! Hermitian EVD.
//!
//! Nothing here forms an explicit inverse. Every operation is a pure
//! function of its inputs.

mod decomp;
mod matrix;

pub use decomp::{
    default_rank_tol, hermitian_evd, hermitian_solve, svd, EvdResult, LuFactors, SvdResult,
};
pub use matrix::ComplexMatrix;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{op}: dimension mismatch, expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("{op}: input contains NaN or infinite entries")]
    NonFinite { op: &'static str },
    #[error("{op}: empty matrix")]
    Empty { op: &'static str },
    #[error("{op}: matrix is not square, shape {shape:?}")]
    NotSquare {
        op: &'static str,
        shape: (usize, usize),
    },
    #[error("matrix is not Hermitian: defect {defect:e} exceeds {tol:e}")]
    NotHermitian { defect: f64, tol: f64 },
    #[error("matrix is not positive definite: pivot {pivot} = {value:e} <= {threshold:e}")]
    NotPositiveDefinite {
        pivot: usize,
        value: f64,
        threshold: f64,
    },
    #[error("matrix is singular at pivot {pivot}")]
    Singular { pivot: usize },
    #[error("{op}: Jacobi sweeps did not converge for a {rows}x{cols} input")]
    NoConvergence {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
}

/// Matrix of i.i.d. circular complex Gaussian entries with variance
/// `variance` (real and imaginary parts each carry half).
pub fn complex_gaussian<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    variance: f64,
    rng: &mut R,
) -> ComplexMatrix {
    let sd = (variance / 2.0).sqrt();
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * sd, im * sd)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn unitary_defect(u: &ComplexMatrix) -> f64 {
        let g = u.adjoint_mul(u);
        (&g - &ComplexMatrix::identity(g.rows())).max_abs()
    }

    #[test]
    fn svd_of_identity() {
        let r = svd(&ComplexMatrix::identity(2), None).unwrap();
        assert_eq!(r.s, vec![1.0, 1.0]);
        assert_eq!(r.rank, 2);
    }

    #[test]
    fn svd_of_zero_matrix() {
        let r = svd(&ComplexMatrix::zeros(2, 2), None).unwrap();
        assert_eq!(r.s, vec![0.0, 0.0]);
        assert_eq!(r.rank, 0);
        assert!(unitary_defect(&r.u) < 1e-12);
        assert!(unitary_defect(&r.vh.adjoint()) < 1e-12);
    }

    #[test]
    fn svd_random_tall() {
        let a = complex_gaussian(4, 2, 1.0, &mut rng(1));
        let r = svd(&a, None).unwrap();
        assert_eq!(r.u.shape(), (4, 4));
        assert!(unitary_defect(&r.u) < 1e-10);
        assert!((&a - &r.reconstruct()).frobenius_norm() < 1e-9 * a.frobenius_norm());
        assert!(r.s[0] >= r.s[1]);
        // The trailing left vectors are orthogonal to the column space.
        let null = r.left_null_space();
        assert_eq!(null.cols(), 2);
        assert!(null.adjoint_mul(&a).max_abs() < 1e-12 * a.frobenius_norm());
    }

    #[test]
    fn svd_wide_and_rank_deficient() {
        let b = complex_gaussian(5, 2, 1.0, &mut rng(2));
        let c = complex_gaussian(2, 7, 1.0, &mut rng(3));
        let a = &b * &c; // 5x7 rank 2
        let r = svd(&a, None).unwrap();
        assert_eq!(r.rank, 2);
        assert_eq!(r.vh.shape(), (7, 7));
        assert!(unitary_defect(&r.u) < 1e-10);
        assert!(unitary_defect(&r.vh.adjoint()) < 1e-10);
        assert!((&a - &r.reconstruct()).frobenius_norm() < 1e-9 * a.frobenius_norm());
        assert!(r.left_null_space().adjoint_mul(&a).max_abs() < 1e-12 * a.frobenius_norm());
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut a = ComplexMatrix::identity(2);
        a[(0, 1)] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(
            svd(&a, None),
            Err(NumericsError::NonFinite { .. })
        ));
    }

    #[test]
    fn evd_diagonal() {
        let r = hermitian_evd(&ComplexMatrix::from_diag(&[1.0, 3.0])).unwrap();
        assert_eq!(r.lambda, vec![3.0, 1.0]);
        // Columns are a permutation of the identity.
        assert!((r.q[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((r.q[(0, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn evd_identity() {
        let r = hermitian_evd(&ComplexMatrix::identity(5)).unwrap();
        assert!(r.lambda.iter().all(|&l| l == 1.0));
    }

    #[test]
    fn evd_gram_matrix_is_psd() {
        let h = complex_gaussian(6, 4, 1.0, &mut rng(4));
        let a = h.adjoint_mul(&h);
        let r = hermitian_evd(&a).unwrap();
        assert!(r.lambda.iter().all(|&l| l >= -1e-10));
        assert!(unitary_defect(&r.q) < 1e-10);
        let aq = &a * &r.q;
        let ql = &r.q * &ComplexMatrix::from_diag(&r.lambda);
        assert!((&aq - &ql).frobenius_norm() < 1e-9 * a.frobenius_norm());
    }

    #[test]
    fn evd_rejects_non_hermitian() {
        let mut a = ComplexMatrix::identity(2);
        a[(0, 1)] = Complex64::new(0.5, 0.0);
        assert!(matches!(
            hermitian_evd(&a),
            Err(NumericsError::NotHermitian { .. })
        ));
        assert!(matches!(
            hermitian_evd(&ComplexMatrix::zeros(2, 3)),
            Err(NumericsError::NotSquare { .. })
        ));
    }

    #[test]
    fn evd_symmetrizes_rounding_asymmetry() {
        let h = complex_gaussian(4, 3, 1.0, &mut rng(5));
        let mut a = h.adjoint_mul(&h);
        a[(0, 1)] += Complex64::new(1e-14, -1e-14);
        let r = hermitian_evd(&a).unwrap();
        assert!(unitary_defect(&r.q) < 1e-10);
    }

    #[test]
    fn solve_identity_and_scaled_identity() {
        let b = complex_gaussian(3, 2, 1.0, &mut rng(6));
        let x = hermitian_solve(&ComplexMatrix::identity(3), &b).unwrap();
        assert!((&x - &b).max_abs() < 1e-15);
        let x = hermitian_solve(
            &ComplexMatrix::identity(3).scale(2.0),
            &ComplexMatrix::identity(3),
        )
        .unwrap();
        assert!((&x - &ComplexMatrix::identity(3).scale(0.5)).max_abs() < 1e-15);
    }

    #[test]
    fn solve_random_pd_residual() {
        let h = complex_gaussian(6, 4, 1.0, &mut rng(7));
        let a = &h.adjoint_mul(&h) + &ComplexMatrix::identity(4).scale(0.1);
        let b = complex_gaussian(4, 3, 1.0, &mut rng(8));
        let x = hermitian_solve(&a, &b).unwrap();
        assert!((&(&a * &x) - &b).frobenius_norm() <= 1e-8 * b.frobenius_norm());
    }

    #[test]
    fn solve_rejects_singular() {
        let a = ComplexMatrix::from_diag(&[1.0, 0.0, 1.0]);
        match hermitian_solve(&a, &ComplexMatrix::identity(3)) {
            Err(NumericsError::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected pivot failure, got {other:?}"),
        }
        let a = ComplexMatrix::from_diag(&[1.0, -1.0]);
        assert!(hermitian_solve(&a, &ComplexMatrix::identity(2)).is_err());
    }

    #[test]
    fn lu_solves_general_system() {
        let a = complex_gaussian(5, 5, 1.0, &mut rng(9));
        let b = complex_gaussian(5, 2, 1.0, &mut rng(10));
        let x = LuFactors::new(&a).unwrap().solve(&b);
        assert!((&(&a * &x) - &b).max_abs() < 1e-12);
        assert!(LuFactors::new(&ComplexMatrix::zeros(3, 3)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn svd_reconstructs_any_shape(rows in 1usize..9, cols in 1usize..9, seed in any::<u64>()) {
            let a = complex_gaussian(rows, cols, 1.0, &mut rng(seed));
            let r = svd(&a, None).unwrap();
            prop_assert!(unitary_defect(&r.u) < 1e-10);
            prop_assert!(unitary_defect(&r.vh.adjoint()) < 1e-10);
            prop_assert!((&a - &r.reconstruct()).frobenius_norm() <= 1e-9 * a.frobenius_norm());
            prop_assert!(r.s.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn evd_reconstructs_psd(n in 1usize..10, extra in 0usize..4, seed in any::<u64>()) {
            let h = complex_gaussian(n + extra, n, 1.0, &mut rng(seed));
            let a = h.adjoint_mul(&h);
            let r = hermitian_evd(&a).unwrap();
            prop_assert!(unitary_defect(&r.q) < 1e-10);
            prop_assert!((&a - &r.reconstruct()).frobenius_norm() <= 1e-9 * a.frobenius_norm());
            prop_assert!(r.lambda.iter().all(|&l| l >= -1e-10));
        }

        #[test]
        fn solve_recovers_known_solution(n in 1usize..8, seed in any::<u64>()) {
            let mut g = rng(seed);
            let h = complex_gaussian(n + 2, n, 1.0, &mut g);
            let a = &h.adjoint_mul(&h) + &ComplexMatrix::identity(n).scale(0.5);
            let x0 = complex_gaussian(n, 2, 1.0, &mut g);
            let x = hermitian_solve(&a, &(&a * &x0)).unwrap();
            prop_assert!((&x - &x0).frobenius_norm() <= 1e-7 * x0.frobenius_norm());
        }
    }
}
