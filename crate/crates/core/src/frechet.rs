//! Krylov approximation of the Frechet derivative `Df{A}(c d^T)`.
//!
//! `Df{A} = f^[1]{A, A^T}`, so the driver is run with the divided-difference
//! kernel on the pair `(A, A^T)` with equal depths on both sides. The
//! compressed problem is the (1,2) block of `f([[G_k, c~ d~^T], [0, H_k^T]])`.

use num_complex::Complex64;

use crate::dense::{matrix_function, ComplexDenseMatrix, ScalarFunction};
use crate::driver::{approximate_rank_one, ApproximationResult, DriverOptions, TensorKrylov, Termination};
use crate::error::{Error, Result};
use crate::kernels::{divided_difference_block, BivariateFunction};
use crate::krylov::{arnoldi_extend, arnoldi_init, LinearOperator};

/// `X_k` for compressed matrices `G_k`, `H_k` and projected vectors.
pub fn frechet_reduced(
    f: &ScalarFunction,
    g: &ComplexDenseMatrix,
    h: &ComplexDenseMatrix,
    c: &[Complex64],
    d: &[Complex64],
) -> Result<ComplexDenseMatrix> {
    let rhs = ComplexDenseMatrix::outer(c, d)?;
    divided_difference_block(f, g, &h.transpose(), &rhs)
}

fn check_operators(a: &dyn LinearOperator, a_transpose: &dyn LinearOperator) -> Result<()> {
    if a.dim() != a_transpose.dim() {
        return Err(Error::DimensionMismatch(format!(
            "A has dimension {}, its transpose {}",
            a.dim(),
            a_transpose.dim()
        )));
    }
    Ok(())
}

/// Adaptive approximation of `Df{A}(c d^T)`; `a_transpose` must apply `w -> A^T w`.
pub fn frechet_apply(
    f: &ScalarFunction,
    a: &dyn LinearOperator,
    a_transpose: &dyn LinearOperator,
    c: &[Complex64],
    d: &[Complex64],
    opts: &DriverOptions,
) -> Result<ApproximationResult> {
    check_operators(a, a_transpose)?;
    let kernel = BivariateFunction::divided_difference(f.clone())?;
    let opts = DriverOptions {
        balance: false,
        l_max: opts.k_max,
        ..opts.clone()
    };
    approximate_rank_one(&kernel, a, a_transpose, c, d, &opts)
}

/// `U_k X_k V_k^T` at a fixed depth `k` (capped at invariant subspaces).
pub fn frechet_fixed(
    f: &ScalarFunction,
    a: &dyn LinearOperator,
    a_transpose: &dyn LinearOperator,
    c: &[Complex64],
    d: &[Complex64],
    k: usize,
) -> Result<ApproximationResult> {
    check_operators(a, a_transpose)?;
    let kernel = BivariateFunction::divided_difference(f.clone())?;
    let mut pair = TensorKrylov::new(&kernel, a, a_transpose, c, d)?;
    let (rk, rl) = pair.reach(k, k);
    let depth = rk.min(rl);
    let x = pair.core(depth, depth)?;
    Ok(ApproximationResult {
        u: pair.left_basis(depth),
        x: (*x).clone(),
        v: pair.right_basis(depth),
        trace: Vec::new(),
        termination: if depth < k { Termination::Breakdown } else { Termination::BudgetExhausted },
    })
}

/// Dense `Df{A}(E)` as the (1,2) block of `f([[A, E], [0, A]])`.
pub fn frechet_dense(f: &ScalarFunction, a: &ComplexDenseMatrix, e: &ComplexDenseMatrix) -> Result<ComplexDenseMatrix> {
    divided_difference_block(f, a, a, e)
}

/// Richardson-extrapolated central differences of `eps -> f(A + eps c d^T)`
/// with base step `1e-5 ||A||_F / ||c d^T||_F`.
pub fn finite_difference_frechet(
    f: &ScalarFunction,
    a: &ComplexDenseMatrix,
    c: &[Complex64],
    d: &[Complex64],
) -> Result<ComplexDenseMatrix> {
    let e = ComplexDenseMatrix::outer(c, d)?;
    if e.rows() != a.rows() || e.cols() != a.cols() {
        return Err(Error::DimensionMismatch("c d^T does not match A".into()));
    }
    let e_norm = e.frobenius_norm();
    if e_norm == 0.0 {
        return Err(Error::ZeroStartVector);
    }
    let eps = 1e-5 * a.frobenius_norm().max(f64::MIN_POSITIVE) / e_norm;
    let central = |h: f64| -> Result<ComplexDenseMatrix> {
        let step = e.scale(Complex64::new(h, 0.0));
        let plus = matrix_function(f, &(a + &step))?;
        let minus = matrix_function(f, &(a - &step))?;
        Ok((&plus - &minus).scale(Complex64::new(0.5 / h, 0.0)))
    };
    let coarse = central(eps)?;
    let fine = central(eps / 2.0)?;
    Ok((&fine.scale(Complex64::new(4.0, 0.0)) - &coarse).scale(Complex64::new(1.0 / 3.0, 0.0)))
}

/// Standard Arnoldi approximation `|c| U_k f(G_k) e_1` of `f(A) c`.
pub fn univariate_arnoldi(
    f: &ScalarFunction,
    a: &dyn LinearOperator,
    c: &[Complex64],
    k: usize,
) -> Result<Vec<Complex64>> {
    if k == 0 || k > a.dim() {
        return Err(Error::InvalidConfig(format!("depth {k} outside 1..={}", a.dim())));
    }
    let state = arnoldi_extend(a, &arnoldi_init(a, c)?, k - 1)?;
    let depth = state.depth();
    let fg = matrix_function(f, &state.hessenberg(depth))?;
    let coeffs: Vec<Complex64> = (0..depth).map(|i| fg.get(i, 0) * state.start_norm()).collect();
    Ok(state.basis(depth).matvec(&coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::vec_norm;
    use crate::kernels::hadamard_eval;
    use crate::krylov::{DenseOperator, DiagonalOperator};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn rel(a: &ComplexDenseMatrix, b: &ComplexDenseMatrix) -> f64 {
        (a - b).frobenius_norm() / b.frobenius_norm()
    }

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> ComplexDenseMatrix {
        ComplexDenseMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn reduced_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let g = random_matrix(4, &mut rng);
        let h = random_matrix(4, &mut rng);
        let (cv, dv) = (random_vec(4, &mut rng), random_vec(4, &mut rng));
        let x = frechet_reduced(&ScalarFunction::power(1), &g, &h, &cv, &dv).unwrap();
        let rhs = ComplexDenseMatrix::outer(&cv, &dv).unwrap();
        assert!(rel(&x, &rhs) < 1e-12);

        let g = ComplexDenseMatrix::from_real_diag(&[1.0, 2.0]).unwrap();
        let e1 = [c(1.0), c(0.0)];
        let x = frechet_reduced(&ScalarFunction::power(2), &g, &g.transpose(), &e1, &e1).unwrap();
        let expected = ComplexDenseMatrix::from_real_rows(&[&[2.0, 0.0], &[0.0, 0.0]]).unwrap();
        assert!((&x - &expected).frobenius_norm() < 1e-14);
    }

    #[test]
    fn reduced_matches_hadamard() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let spectrum = |offset: f64| -> Vec<Complex64> { (0..6).map(|i| Complex64::new(offset + 0.4 * i as f64, 0.1)).collect() };
        let conj_by = |s: &[Complex64], rng: &mut ChaCha8Rng| {
            let t = &random_matrix(6, rng).scale(c(0.3)) + &ComplexDenseMatrix::identity(6);
            &(&t * &ComplexDenseMatrix::from_diag(s).unwrap()) * &t.inverse().unwrap()
        };
        let g = conj_by(&spectrum(-1.0), &mut rng);
        let h = conj_by(&spectrum(-0.8), &mut rng);
        let (cv, dv) = (random_vec(6, &mut rng), random_vec(6, &mut rng));
        let x = frechet_reduced(&ScalarFunction::exp(), &g, &h, &cv, &dv).unwrap();
        let dd = BivariateFunction::divided_difference(ScalarFunction::exp()).unwrap();
        let oracle = hadamard_eval(&dd, &g, &h, &ComplexDenseMatrix::outer(&cv, &dv).unwrap()).unwrap();
        assert!(rel(&x, &oracle) < 1e-8);
    }

    #[test]
    fn square_is_exact_at_depth_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let am = random_matrix(10, &mut rng);
        let (cv, dv) = (random_vec(10, &mut rng), random_vec(10, &mut rng));
        let a = DenseOperator::new(am.clone()).unwrap();
        let at = a.transpose();
        let r = frechet_fixed(&ScalarFunction::power(2), &a, &at, &cv, &dv, 2).unwrap();
        let e = ComplexDenseMatrix::outer(&cv, &dv).unwrap();
        let exact = &(&am * &e) + &(&e * &am);
        assert!(rel(&r.to_dense(), &exact) <= 1e-10);
    }

    #[test]
    fn hermitian_case_gives_hermitian_core() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let r = random_matrix(30, &mut rng);
        let am = &(&r + &r.adjoint()).scale(c(0.5)) - &ComplexDenseMatrix::identity(30).scale(c(2.0));
        let cv = random_vec(30, &mut rng);
        let dv: Vec<Complex64> = cv.iter().map(|z| z.conj()).collect();
        let a = DenseOperator::new(am).unwrap();
        let at = a.transpose();
        let res = frechet_fixed(&ScalarFunction::exp(), &a, &at, &cv, &dv, 8).unwrap();
        let x = &res.x;
        assert!((x - &x.adjoint()).frobenius_norm() <= 1e-12 * x.frobenius_norm());
    }

    #[test]
    fn matches_finite_differences() {
        let spectrum: Vec<f64> = (0..100).map(|i| -100.0 + 99.9 * i as f64 / 99.0).collect();
        let a = DiagonalOperator::from_real(&spectrum);
        let mut rng = ChaCha8Rng::seed_from_u64(89);
        let mut cv: Vec<Complex64> = (0..100).map(|_| c(rng.random_range(-1.0..1.0))).collect();
        let norm = vec_norm(&cv);
        cv.iter_mut().for_each(|z| *z /= norm);
        let f = ScalarFunction::exp();
        let opts = DriverOptions { tol: 1e-10, k_max: 100, ..Default::default() };
        let r = frechet_apply(&f, &a, &a, &cv, &cv, &opts).unwrap();
        assert_ne!(r.termination, Termination::BudgetExhausted);
        let fd = finite_difference_frechet(&f, &a.to_dense(), &cv, &cv).unwrap();
        assert!(rel(&r.to_dense(), &fd) <= 1e-6, "{:e}", rel(&r.to_dense(), &fd));
        let block = frechet_dense(&f, &a.to_dense(), &ComplexDenseMatrix::outer(&cv, &cv).unwrap()).unwrap();
        assert!(rel(&fd, &block) <= 1e-6);
    }

    #[test]
    fn univariate_arnoldi_full_depth_is_exact() {
        let a = DiagonalOperator::from_real(&[-1.0, -2.0, -3.0, -4.0]);
        let cv = vec![c(1.0); 4];
        let y = univariate_arnoldi(&ScalarFunction::exp(), &a, &cv, 4).unwrap();
        for (i, yi) in y.iter().enumerate() {
            assert!((yi - c((-(i as f64) - 1.0).exp())).norm() < 1e-13);
        }
    }
}
