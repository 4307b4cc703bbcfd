#![allow(dead_code)]

use bivkrylov::dense::ComplexDenseMatrix;
use bivkrylov::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Real Gaussian matrix scaled by `1/sqrt(cols)`.
pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexDenseMatrix {
    let s = 1.0 / (cols as f64).sqrt();
    ComplexDenseMatrix::try_from_fn(rows, cols, |_, _| {
        let x: f64 = StandardNormal.sample(rng);
        re(s * x)
    })
    .unwrap()
}

pub fn unit_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let raw: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    raw.iter().map(|x| re(x / norm)).collect()
}

pub fn orthogonal(n: usize, rng: &mut ChaCha8Rng) -> ComplexDenseMatrix {
    gaussian(n, n, rng).qr_thin().0
}

/// `Q diag(eigs) Q^T` with a random orthogonal `Q`.
pub fn symmetric_with_spectrum(eigs: &[f64], rng: &mut ChaCha8Rng) -> ComplexDenseMatrix {
    let q = orthogonal(eigs.len(), rng);
    let d = ComplexDenseMatrix::from_real_diag(eigs).unwrap();
    &(&q * &d) * &q.transpose()
}

/// `S diag(eigs) S^{-1}` with a well-conditioned random `S = I + 0.3 G`.
pub fn nonnormal_with_spectrum(eigs: &[f64], rng: &mut ChaCha8Rng) -> ComplexDenseMatrix {
    let n = eigs.len();
    let s = &ComplexDenseMatrix::identity(n) + &gaussian(n, n, rng).scale(re(0.3));
    let d = ComplexDenseMatrix::from_real_diag(eigs).unwrap();
    &(&s * &d) * &s.inverse().unwrap()
}

pub fn uniform(lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(lo..hi)
}

pub fn rel_diff(a: &ComplexDenseMatrix, b: &ComplexDenseMatrix) -> f64 {
    (a - b).frobenius_norm() / b.frobenius_norm()
}

/// Least-squares slope of `ln y` against `x`.
pub fn log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| {
        (a + (x - mx) * (y.ln() - my), b + (x - mx) * (x - mx))
    });
    num / den
}
