use bivkrylov::bounds::{
    bernstein_rate, chebyshev_min_error, frechet_bound, numerical_range_interval, phi_bound, phi_optimal_radius,
    theorem_bound, SpectralInterval,
};
use bivkrylov::dense::{ComplexDenseMatrix, ScalarFunction};
use bivkrylov::experiments::{frechet_errors, kernel_errors, Distribution, TestProblem};
use bivkrylov::kernels::BivariateFunction;
use bivkrylov::{Complex64, Error};
use proptest::prelude::*;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bernstein_rate_shrinks_as_the_singularity_approaches(
        lo in -50.0..-1.0f64,
        width in 0.5..40.0f64,
        gap in 0.01..10.0f64,
    ) {
        let iv = SpectralInterval::new(lo, lo + width).unwrap();
        let near = bernstein_rate(&iv, re(lo + width + gap)).unwrap();
        let far = bernstein_rate(&iv, re(lo + width + 2.0 * gap)).unwrap();
        prop_assert!(near > 1.0);
        prop_assert!(far > near);
        // symmetric about the midpoint
        let mirror = bernstein_rate(&iv, re(lo - gap)).unwrap();
        prop_assert!((mirror - near).abs() <= 1e-12 * near);
    }

    #[test]
    fn phi_bound_decreases_in_k(rho in 1.0..200.0f64, k in 2usize..300) {
        let lower = (4.0 * rho).sqrt().ceil() as usize;
        prop_assume!(k >= lower);
        prop_assert!(phi_bound(k + 1, rho).unwrap() <= phi_bound(k, rho).unwrap());
        prop_assert!(phi_optimal_radius(k, rho).unwrap() >= 1.0);
    }

    #[test]
    fn minkowski_sum_adds_endpoints(a in -10.0..0.0f64, w in 0.0..5.0f64, b in -10.0..0.0f64, v in 0.0..5.0f64) {
        let (x, y) = (SpectralInterval::new(a, a + w).unwrap(), SpectralInterval::new(b, b + v).unwrap());
        let s = x.minkowski_sum(&y);
        prop_assert_eq!((s.lo(), s.hi()), (x.lo() + y.lo(), x.hi() + y.hi()));
    }
}

#[test]
fn singularity_inside_interval_is_rejected() {
    let iv = SpectralInterval::new(-1.0, 1.0).unwrap();
    assert!(matches!(bernstein_rate(&iv, re(0.5)), Err(Error::SingularityInsideInterval(_))));
}

#[test]
fn chebyshev_error_decreases_with_degree() {
    let iv = SpectralInterval::new(-20.0, 0.0).unwrap();
    let exp = ScalarFunction::exp();
    let errs: Vec<f64> = (2..30).step_by(3).map(|d| chebyshev_min_error(&exp, &iv, d).unwrap()).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(*errs.last().unwrap() < 1e-12);
}

#[test]
fn numerical_range_of_symmetric_matrix_spans_its_spectrum() {
    let a = ComplexDenseMatrix::from_real_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
    let iv = numerical_range_interval(&a, true).unwrap();
    assert!((iv.lo() - 1.0).abs() < 1e-12 && (iv.hi() - 3.0).abs() < 1e-12);
    let n = ComplexDenseMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
    assert!(matches!(numerical_range_interval(&n, false), Err(Error::UnsupportedGeometry(_))));
}

/// Hermitian problems have `M = 1`; the bound must dominate the Frobenius error everywhere.
#[test]
fn theorem_bound_dominates_hermitian_runs() {
    let cases = [
        ((0.5, 40.0), BivariateFunction::sylvester()),
        ((-60.0, -0.5), BivariateFunction::time_limited(0.0, 2.0).unwrap()),
        ((-30.0, -1.0), BivariateFunction::time_limited(0.5, f64::INFINITY).unwrap()),
        ((-10.0, -0.1), BivariateFunction::sum_shift(ScalarFunction::exp())),
    ];
    for (seed, (interval, f)) in cases.iter().enumerate() {
        let problem = TestProblem::new(150, *interval, Distribution::Random, seed as u64);
        let iv = numerical_range_interval(&bivkrylov::krylov::DiagonalOperator::from_real(&problem.eigenvalues).to_dense(), true)
            .unwrap();
        let ks: Vec<usize> = (1..=40).step_by(3).collect();
        for s in kernel_errors(&problem, f, &problem.c, &ks).unwrap() {
            let bound = theorem_bound(f, &iv, &iv, s.k, 1.0, 1.0, 1.0).unwrap();
            assert!(s.frobenius <= bound, "{f:?} k = {}: {} > {bound}", s.k, s.frobenius);
        }
    }
}

#[test]
fn frechet_bound_dominates_hermitian_runs() {
    let problem = TestProblem::new(120, (-50.0, -0.1), Distribution::Spaced, 4);
    let iv = SpectralInterval::new(-50.0, -0.1).unwrap();
    let exp = ScalarFunction::exp();
    let ks: Vec<usize> = (2..=40).step_by(2).collect();
    for (s, _) in frechet_errors(&problem, &exp, &ks).unwrap() {
        let bound = frechet_bound(&exp, &iv, s.k, 1.0, 1.0, 1.0).unwrap();
        assert!(s.frobenius <= bound, "k = {}: {} > {bound}", s.k, s.frobenius);
    }
}
