//! A-priori error bounds: norm constants, polynomial approximation errors on
//! intervals, Bernstein ellipse rates and the bounds for the `phi` function.
//!
//! Best polynomial approximation errors are measured through Chebyshev
//! interpolation, which over-estimates the infimum by at most the Lebesgue
//! constant. Everything that compares against these values treats them as
//! upper bounds.

use std::f64::consts::{E, PI, SQRT_2};
use std::thread;

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use num_complex::Complex64;

use crate::dense::{eig, ComplexDenseMatrix, ScalarFunction};
use crate::error::{Error, Result};
use crate::kernels::{eval_scalar, BivariateFunction};

/// Minimum number of grid points for sup-norm measurement.
pub const GRID_POINTS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralInterval {
    lo: f64,
    hi: f64,
}

impl SpectralInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidConfig(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// `{x + y}` for `x` in `self`, `y` in `other`.
    pub fn minkowski_sum(&self, other: &Self) -> Self {
        Self {
            lo: self.lo + other.lo,
            hi: self.hi + other.hi,
        }
    }

    fn contains(&self, z: Complex64) -> bool {
        z.im == 0.0 && z.re >= self.lo && z.re <= self.hi
    }
}

/// Axis-aligned rectangle containing the numerical range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericalRangeRectangle {
    pub real: SpectralInterval,
    pub imag: SpectralInterval,
}

/// Extreme eigenvalues of the Hermitian part `(A + A^*)/2`.
///
/// For non-Hermitian matrices the numerical range is not an interval; use
/// [`numerical_range_rectangle`] instead.
pub fn numerical_range_interval(a: &ComplexDenseMatrix, hermitian: bool) -> Result<SpectralInterval> {
    if !hermitian {
        return Err(Error::UnsupportedGeometry(
            "numerical range of a non-Hermitian matrix is not an interval; use the bounding rectangle".into(),
        ));
    }
    hermitian_extremes(&hermitian_part(a)?)
}

/// Bounding box of `W(A)` from the Hermitian and skew-Hermitian parts.
/// The box contains `W(A)` but may be much larger.
pub fn numerical_range_rectangle(a: &ComplexDenseMatrix) -> Result<NumericalRangeRectangle> {
    let real = hermitian_extremes(&hermitian_part(a)?)?;
    // (A - A^*) / (2i) is Hermitian
    let skew = (a - &a.adjoint()).scale(Complex64::new(0.0, -0.5));
    let imag = hermitian_extremes(&skew)?;
    Ok(NumericalRangeRectangle { real, imag })
}

fn hermitian_part(a: &ComplexDenseMatrix) -> Result<ComplexDenseMatrix> {
    if !a.is_square() || a.rows() == 0 {
        return Err(Error::ShapeMismatch("numerical range needs a nonempty square matrix".into()));
    }
    Ok((a + &a.adjoint()).scale(Complex64::new(0.5, 0.0)))
}

fn hermitian_extremes(h: &ComplexDenseMatrix) -> Result<SpectralInterval> {
    let n = h.rows();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || h.get(i, j) == Complex64::ZERO));
    let values: Vec<f64> = if diagonal {
        (0..n).map(|i| h.get(i, i).re).collect()
    } else {
        eig(h)?.eigvals().iter().map(|z| z.re).collect()
    };
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    SpectralInterval::new(lo, hi)
}

/// Geometry entering the norm-bound constant `M`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundParams {
    pub normal_a: bool,
    pub normal_b: bool,
    /// Boundary length of the set enclosing `W(A)`.
    pub boundary_length_a: f64,
    pub boundary_length_b: f64,
    /// Distance from that boundary to `W(A)`.
    pub distance_a: f64,
    pub distance_b: f64,
}

/// `M` with `||f{A,B}|| <= M max |f|` over the enclosing sets: 1 when both
/// matrices are normal, `1 + sqrt 2` when one is, and otherwise
/// `(1 + sqrt 2)/(2 pi) min(len_A / dist_A, len_B / dist_B)`.
pub fn m_constant(params: &BoundParams) -> Result<f64> {
    let crouzeix = 1.0 + SQRT_2;
    match (params.normal_a, params.normal_b) {
        (true, true) => Ok(1.0),
        (true, false) | (false, true) => Ok(crouzeix),
        (false, false) => {
            let mut best = f64::INFINITY;
            for (len, dist) in [
                (params.boundary_length_a, params.distance_a),
                (params.boundary_length_b, params.distance_b),
            ] {
                if !(dist > 0.0 && dist.is_finite() && len.is_finite()) {
                    continue;
                }
                if len < 2.0 * PI * dist * (1.0 - 1e-12) {
                    return Err(Error::DegenerateGeometry(format!(
                        "boundary length {len} is shorter than a circle at distance {dist}"
                    )));
                }
                best = best.min(len / dist);
            }
            if !best.is_finite() {
                return Err(Error::DegenerateGeometry(
                    "need a positive distance on at least one side".into(),
                ));
            }
            Ok(crouzeix / (2.0 * PI) * best)
        }
    }
}

/// First-kind Chebyshev nodes of degree `n` on `[lo, hi]`, with barycentric weights.
fn chebyshev_nodes(interval: &SpectralInterval, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (mid, half) = (interval.midpoint(), 0.5 * interval.width());
    (0..=n)
        .map(|j| {
            let theta = (2 * j + 1) as f64 * PI / (2 * n + 2) as f64;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            (mid + half * theta.cos(), sign * theta.sin())
        })
        .unzip()
}

/// Chebyshev-Lobatto grid with `count` points on `[lo, hi]`.
fn lobatto_point(interval: &SpectralInterval, i: usize, count: usize) -> f64 {
    if i == 0 {
        return interval.hi;
    }
    if i == count - 1 {
        return interval.lo;
    }
    interval.midpoint() + 0.5 * interval.width() * (PI * i as f64 / (count - 1) as f64).cos()
}

/// Sup of `err` over a Lobatto grid of `max(GRID_POINTS, 8(n+1))` points. The
/// grid is refined once (to `2N - 1` points) when the value on its
/// every-other-point subgrid differs by more than 1%.
fn sup_on_grid(
    interval: &SpectralInterval,
    degree: usize,
    err: &(dyn Fn(f64) -> Result<f64> + Sync),
) -> Result<f64> {
    let base = GRID_POINTS.max(8 * (degree + 1));
    let count = if base.is_multiple_of(2) { base + 1 } else { base };
    let values = parallel_map(count, |i| err(lobatto_point(interval, i, count)))?;
    let fine = values.iter().copied().fold(0.0, f64::max);
    let coarse = values.iter().step_by(2).copied().fold(0.0, f64::max);
    if (fine - coarse).abs() <= 0.01 * fine {
        return Ok(fine);
    }
    let refined = 2 * count - 1;
    let extra = parallel_map(count - 1, |i| err(lobatto_point(interval, 2 * i + 1, refined)))?;
    Ok(extra.into_iter().fold(fine, f64::max))
}

fn parallel_map(count: usize, f: impl Fn(usize) -> Result<f64> + Sync) -> Result<Vec<f64>> {
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(count.max(1));
    if workers <= 1 {
        return (0..count).map(f).collect();
    }
    let chunk = count.div_ceil(workers);
    thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let f = &f;
                s.spawn(move || (w * chunk..((w + 1) * chunk).min(count)).map(f).collect::<Result<Vec<_>>>())
            })
            .collect();
        let mut out = Vec::with_capacity(count);
        for h in handles {
            out.extend(h.join().expect("grid worker panicked")?);
        }
        Ok(out)
    })
}

/// Sup-norm error of the degree-`degree` Chebyshev interpolant of `g` on the interval.
pub fn chebyshev_min_error(g: &ScalarFunction, interval: &SpectralInterval, degree: usize) -> Result<f64> {
    if interval.width() == 0.0 {
        return Ok(0.0);
    }
    let eval = |x: f64| -> Result<Complex64> {
        g.eval_checked(Complex64::new(x, 0.0))
            .map_err(|_| Error::EvaluationFailure(format!("`{}` is not finite at {x}", g.name())))
    };
    let (nodes, weights) = chebyshev_nodes(interval, degree);
    let values = nodes.iter().map(|&x| eval(x)).collect::<Result<Vec<_>>>()?;
    let err = |x: f64| -> Result<f64> {
        let mut num = Complex64::ZERO;
        let mut den = 0.0;
        for ((&xj, &wj), &fj) in nodes.iter().zip(&weights).zip(&values) {
            if x == xj {
                return Ok(0.0);
            }
            let t = wj / (x - xj);
            num += fj * t;
            den += t;
        }
        Ok((eval(x)? - num / den).norm())
    };
    sup_on_grid(interval, degree, &err)
}

type Big = FBig<HalfEven>;

fn big(x: f64, bits: usize) -> Big {
    Big::try_from(x).expect("finite").with_precision(bits).value()
}

fn phi_big(x: &Big) -> Big {
    if x.to_f64().value() == 0.0 {
        return Big::ONE.with_precision(x.precision()).value();
    }
    x.exp_m1() / x
}

/// Interpolation error of `phi` on `[-4 rho, 0]` evaluated with `bits` of precision.
fn phi_interpolation_error_big(rho: f64, degree: usize, bits: usize) -> Result<f64> {
    let interval = SpectralInterval::new(-4.0 * rho, 0.0)?;
    let (nodes, _) = chebyshev_nodes(&interval, degree);
    // exact barycentric weights for the (rounded) node positions
    let nb: Vec<Big> = nodes.iter().map(|&x| big(x, bits)).collect();
    let weights: Vec<Big> = (0..nb.len())
        .map(|j| {
            let mut prod = big(1.0, bits);
            for (i, xi) in nb.iter().enumerate() {
                if i != j {
                    prod *= &nb[j] - xi;
                }
            }
            big(1.0, bits) / prod
        })
        .collect();
    let values: Vec<Big> = nb.iter().map(phi_big).collect();
    let err = |x: f64| -> Result<f64> {
        if nodes.contains(&x) {
            return Ok(0.0);
        }
        let xb = big(x, bits);
        let mut num = big(0.0, bits);
        let mut den = big(0.0, bits);
        for ((xj, wj), fj) in nb.iter().zip(&weights).zip(&values) {
            let t = wj / (&xb - xj);
            num += &t * fj;
            den += t;
        }
        let diff = phi_big(&xb) - num / den;
        Ok(diff.to_f64().value().abs())
    };
    sup_on_grid(&interval, degree, &err)
}

/// Sup-norm error of the Chebyshev interpolant of degree `degree` to `phi` on
/// `[-4 rho, 0]`. Double precision is used while the expected error is well
/// above rounding; below that the interpolant is built and evaluated in
/// arbitrary precision (precision raised until the result clears the floor).
pub fn phi_chebyshev_error(rho: f64, degree: usize) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidConfig(format!("rho must be positive, got {rho}")));
    }
    let expected = phi_bound(degree + 1, rho).unwrap_or(1.0);
    if expected >= 1e-9 {
        let interval = SpectralInterval::new(-4.0 * rho, 0.0)?;
        return chebyshev_min_error(&ScalarFunction::phi(), &interval, degree);
    }
    let mut bits = 64 + (-expected.max(1e-300).log2()).ceil() as usize + 64;
    loop {
        let e = phi_interpolation_error_big(rho, degree, bits)?;
        if e > 2f64.powi(-(bits as i32 - 48)) || bits >= 4096 {
            return Ok(e);
        }
        bits *= 2;
    }
}

/// `2 M |c| |d| min_p max |g - p|` over `E_A + E_B` for kernels of the form
/// `g(x + y)`; zero for polynomials of degree at most `(k-1, k-1)`.
pub fn theorem_bound(
    f: &BivariateFunction,
    ea: &SpectralInterval,
    eb: &SpectralInterval,
    k: usize,
    m: f64,
    c_norm: f64,
    d_norm: f64,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let g = match f {
        BivariateFunction::Polynomial(p) => {
            let (dx, dy) = p.effective_degrees();
            if dx < k && dy < k {
                return Ok(0.0);
            }
            return Err(Error::UnsupportedGeometry(format!(
                "polynomial of degree ({dx}, {dy}) is not reproduced at k = {k}"
            )));
        }
        BivariateFunction::Sylvester { .. } | BivariateFunction::TimeLimited { .. } => {
            let f = f.clone();
            ScalarFunction::new("g", move |s| {
                eval_scalar(&f, s, Complex64::ZERO).unwrap_or(Complex64::new(f64::NAN, f64::NAN))
            })
        }
        BivariateFunction::SumShift(g) => g.clone(),
        other => {
            return Err(Error::UnsupportedGeometry(format!(
                "{other:?} is not a function of x + y; only interval Minkowski-sum bounds are implemented"
            )))
        }
    };
    let sum = ea.minkowski_sum(eb);
    Ok(2.0 * m * c_norm * d_norm * chebyshev_min_error(&g, &sum, k - 1)?)
}

/// `2 M |c| |d| min_p max |f' - p|` over `E_A`, with `p` of degree `k - 1`:
/// the bound for the Krylov approximation of `Df{A}(c d^T)`.
pub fn frechet_bound(
    f: &ScalarFunction,
    ea: &SpectralInterval,
    k: usize,
    m: f64,
    c_norm: f64,
    d_norm: f64,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let fprime = f.derivative_function()?;
    Ok(2.0 * m * c_norm * d_norm * chebyshev_min_error(&fprime, ea, k - 1)?)
}

/// `|xi + sqrt(xi^2 - 1)|` for the image `xi` of the singularity under the
/// affine map of the interval onto `[-1, 1]`.
pub fn bernstein_rate(interval: &SpectralInterval, singularity: Complex64) -> Result<f64> {
    if interval.width() == 0.0 {
        return Err(Error::DegenerateGeometry("interval has zero width".into()));
    }
    if interval.contains(singularity) {
        return Err(Error::SingularityInsideInterval(singularity));
    }
    let xi = (2.0 * singularity - (interval.lo + interval.hi)) / interval.width();
    let root = (xi * xi - 1.0).sqrt();
    Ok((xi + root).norm().max((xi - root).norm()))
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("rho must be positive, got {rho}")))
    }
}

fn regime_check(k: usize, rho: f64) -> Result<()> {
    check_rho(rho)?;
    let min = (4.0 * rho).sqrt();
    if (k as f64) < min {
        return Err(Error::OutOfRegime { k, min });
    }
    Ok(())
}

fn at_boundary(k: f64, rho: f64) -> bool {
    (k - 2.0 * rho).abs() <= 1e-12 * rho
}

/// Bound on the error of the best polynomial approximation of degree `k - 1`
/// to `phi` on `[-4 rho, 0]`, for `k >= sqrt(4 rho)`.
pub fn phi_bound(k: usize, rho: f64) -> Result<f64> {
    regime_check(k, rho)?;
    let kf = k as f64;
    let moderate = || 40.0 * rho * rho / kf.powi(3) * (-kf * kf / (5.0 * rho)).exp();
    let large = || (8.0 / (3.0 * kf - 5.0 * rho)).ln() + kf * (E * rho / (kf + 2.0 * rho)).ln();
    if at_boundary(kf, rho) {
        Ok(moderate().min(large().exp()))
    } else if kf < 2.0 * rho {
        Ok(moderate())
    } else {
        Ok(large().exp())
    }
}

/// The radius `r = k/(2 rho) + sqrt(k^2/(4 rho^2) + 1)` minimizing the
/// Cauchy-estimate bound.
pub fn phi_optimal_radius(k: usize, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let t = k as f64 / (2.0 * rho);
    Ok(t + (t * t + 1.0).sqrt())
}

/// The classical two-regime bounds for Krylov approximation of the exponential,
/// quoted from Hochbruck and Lubich (1997) only for comparison:
/// `10 exp(-k^2/(5 rho))` for `sqrt(4 rho) <= k <= 2 rho` and
/// `(10/k) exp(-rho) (e rho / k)^k` for `k >= 2 rho`.
pub fn exp_bound_reference(k: usize, rho: f64) -> Result<f64> {
    regime_check(k, rho)?;
    let kf = k as f64;
    let moderate = || 10.0 * (-kf * kf / (5.0 * rho)).exp();
    let large = || ((10.0 / kf).ln() - rho + kf * (E * rho / kf).ln()).exp();
    if at_boundary(kf, rho) {
        Ok(moderate().min(large()))
    } else if kf < 2.0 * rho {
        Ok(moderate())
    } else {
        Ok(large())
    }
}
