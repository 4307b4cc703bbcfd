//! Bivariate functions `f(x, y)` and the evaluation of `f{A,B}(C)` on small
//! dense arguments.
//!
//! With `A = P diag(lambda) P^{-1}` and `B = Q diag(mu) Q^{-1}`,
//!
//! ```text
//! f{A,B}(C) = P (F o (P^{-1} C Q^{-T})) Q^T,   F_ij = f(lambda_i, mu_j),
//! ```
//!
//! which [`hadamard_eval`] implements directly. Specialized paths exist for
//! polynomials (no eigendecomposition), Sylvester kernels and divided differences.

use std::fmt;

use num_complex::Complex64;

use crate::dense::{eig, phi, ComplexDenseMatrix, ScalarFunction, SpectralDecomposition};
use crate::error::{Error, Result};

/// Relative distance below which removable singularities are evaluated by their limit.
pub const SIGMA_SWITCH: f64 = 1e-6;
/// Relative denominator magnitude treated as a pole.
pub const POLE_TOL: f64 = 1e-12;
/// Divided differences of points closer than this (relative) use quadrature of `f'`.
const QUADRATURE_WINDOW: f64 = 0.05;

/// Coefficients `p_ij` of `p(x, y) = sum p_ij x^i y^j`, stored as a dense grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialCoefficients {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl PolynomialCoefficients {
    /// `grid[i][j] = p_ij`; all rows must have the same length.
    pub fn new(grid: Vec<Vec<Complex64>>) -> Result<Self> {
        let rows = grid.len();
        let cols = grid.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig("polynomial coefficient grid is empty".into()));
        }
        if grid.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidConfig("polynomial coefficient grid is not rectangular".into()));
        }
        let data: Vec<Complex64> = grid.into_iter().flatten().collect();
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidConfig("polynomial coefficients must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(grid: &[&[f64]]) -> Result<Self> {
        Self::new(
            grid.iter()
                .map(|r| r.iter().map(|&v| Complex64::new(v, 0.0)).collect())
                .collect(),
        )
    }

    /// Highest power of `x` in the grid.
    pub fn degree_x(&self) -> usize {
        self.rows - 1
    }

    /// Highest power of `y` in the grid.
    pub fn degree_y(&self) -> usize {
        self.cols - 1
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    /// Degrees ignoring trailing zero rows/columns.
    pub fn effective_degrees(&self) -> (usize, usize) {
        let mut dx = 0;
        let mut dy = 0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self.get(i, j) != Complex64::ZERO {
                    dx = dx.max(i);
                    dy = dy.max(j);
                }
            }
        }
        (dx, dy)
    }

    pub fn eval(&self, x: Complex64, y: Complex64) -> Complex64 {
        // Horner in x over Horner-in-y rows.
        let mut acc = Complex64::ZERO;
        for i in (0..self.rows).rev() {
            let mut row = Complex64::ZERO;
            for j in (0..self.cols).rev() {
                row = row * y + self.get(i, j);
            }
            acc = acc * x + row;
        }
        acc
    }

    /// `sum |p_ij| |x|^i |y|^j`, the magnitude scale of `eval`.
    fn magnitude(&self, x: Complex64, y: Complex64) -> f64 {
        let (ax, ay) = (x.norm(), y.norm());
        let mut acc = 0.0;
        for i in (0..self.rows).rev() {
            let mut row = 0.0;
            for j in (0..self.cols).rev() {
                row = row * ay + self.get(i, j).norm();
            }
            acc = acc * ax + row;
        }
        acc
    }
}

/// The supported families of bivariate functions.
#[derive(Clone)]
pub enum BivariateFunction {
    /// `1 / (shift + x + y)`.
    Sylvester { shift: Complex64 },
    /// `1 / (1 - x y)`.
    Stein,
    /// `1 / p(x, y)`.
    ReciprocalPolynomial(PolynomialCoefficients),
    /// `p(x, y)`.
    Polynomial(PolynomialCoefficients),
    /// `(exp(t_end (x+y)) - exp(t_start (x+y))) / (x+y)`; `t_end` may be infinite.
    TimeLimited { t_start: f64, t_end: f64 },
    /// `-(g(x) + g(y)) / (x+y)` with `g(z) = Re((i/pi) Log((z + i w2) / (z + i w1)))`;
    /// `omega2` may be infinite.
    FrequencyLimited { omega1: f64, omega2: f64 },
    /// `f[x, y]`, the first divided difference of `f`.
    DividedDifference(ScalarFunction),
    /// `g(x + y)`.
    SumShift(ScalarFunction),
}

impl BivariateFunction {
    pub fn sylvester() -> Self {
        Self::Sylvester {
            shift: Complex64::ZERO,
        }
    }

    pub fn time_limited(t_start: f64, t_end: f64) -> Result<Self> {
        if !(t_start.is_finite() && t_start >= 0.0 && t_start < t_end) || t_end.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "time-limited kernel needs 0 <= t_start < t_end, got ({t_start}, {t_end})"
            )));
        }
        Ok(Self::TimeLimited { t_start, t_end })
    }

    pub fn frequency_limited(omega1: f64, omega2: f64) -> Result<Self> {
        if !(omega1.is_finite() && omega1 >= 0.0 && omega1 < omega2) || omega2.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "frequency-limited kernel needs 0 <= omega1 < omega2, got ({omega1}, {omega2})"
            )));
        }
        Ok(Self::FrequencyLimited { omega1, omega2 })
    }

    pub fn divided_difference(f: ScalarFunction) -> Result<Self> {
        if !f.has_derivative() {
            return Err(Error::MissingDerivative(f.name().to_string()));
        }
        Ok(Self::DividedDifference(f))
    }

    pub fn sum_shift(g: ScalarFunction) -> Self {
        Self::SumShift(g)
    }

    /// Whether evaluation goes through eigendecompositions of the arguments.
    pub fn uses_spectra(&self) -> bool {
        !matches!(self, Self::Polynomial(_))
    }

    /// `f(x, y) = f(y, x)` for every member of the family.
    pub fn is_symmetric(&self) -> bool {
        match self {
            Self::Polynomial(p) | Self::ReciprocalPolynomial(p) => {
                p.rows == p.cols
                    && (0..p.rows).all(|i| (0..p.cols).all(|j| p.get(i, j) == p.get(j, i)))
            }
            _ => true,
        }
    }

    /// Parses the textual form used by the command line and the C interface.
    ///
    /// `sylvester[:shift]`, `stein`, `time-limited:TS:TE`, `freq-limited:W1:W2`
    /// (`inf` allowed for the upper end), `divdiff:F`, `sum-shift:F` with a scalar
    /// function name `F`, and `poly:GRID` / `recip-poly:GRID` where `GRID` lists
    /// rows of real coefficients `p_i0,p_i1,...` separated by `;`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let bad = |what: &str| Error::InvalidConfig(format!("bad bivariate function `{spec}`: {what}"));
        let (head, rest) = match spec.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (spec, None),
        };
        let number = |s: &str| -> Result<f64> {
            match s.trim() {
                "inf" | "infinity" => Ok(f64::INFINITY),
                t => t.parse::<f64>().map_err(|_| bad(&format!("`{t}` is not a number"))),
            }
        };
        let pair = |r: Option<&str>| -> Result<(f64, f64)> {
            let r = r.ok_or_else(|| bad("two parameters expected"))?;
            let (a, b) = r.split_once(':').ok_or_else(|| bad("two parameters expected"))?;
            Ok((number(a)?, number(b)?))
        };
        let grid = |r: Option<&str>| -> Result<PolynomialCoefficients> {
            let r = r.ok_or_else(|| bad("coefficient grid expected"))?;
            let rows = r
                .split(';')
                .map(|row| {
                    row.split(',')
                        .map(|v| number(v).map(|x| Complex64::new(x, 0.0)))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            PolynomialCoefficients::new(rows)
        };
        match head {
            "sylvester" => Ok(Self::Sylvester {
                shift: Complex64::new(rest.map(number).transpose()?.unwrap_or(0.0), 0.0),
            }),
            "stein" if rest.is_none() => Ok(Self::Stein),
            "time-limited" => {
                let (a, b) = pair(rest)?;
                Self::time_limited(a, b)
            }
            "freq-limited" => {
                let (a, b) = pair(rest)?;
                Self::frequency_limited(a, b)
            }
            "divdiff" => Self::divided_difference(ScalarFunction::parse(
                rest.ok_or_else(|| bad("scalar function expected"))?,
            )?),
            "sum-shift" => Ok(Self::SumShift(ScalarFunction::parse(
                rest.ok_or_else(|| bad("scalar function expected"))?,
            )?)),
            "poly" => Ok(Self::Polynomial(grid(rest)?)),
            "recip-poly" => Ok(Self::ReciprocalPolynomial(grid(rest)?)),
            _ => Err(bad("unknown family")),
        }
    }
}

impl fmt::Debug for BivariateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sylvester { shift } => write!(f, "Sylvester(shift = {shift})"),
            Self::Stein => write!(f, "Stein"),
            Self::ReciprocalPolynomial(p) => write!(f, "ReciprocalPolynomial({p:?})"),
            Self::Polynomial(p) => write!(f, "Polynomial({p:?})"),
            Self::TimeLimited { t_start, t_end } => write!(f, "TimeLimited({t_start}, {t_end})"),
            Self::FrequencyLimited { omega1, omega2 } => {
                write!(f, "FrequencyLimited({omega1}, {omega2})")
            }
            Self::DividedDifference(g) => write!(f, "DividedDifference({})", g.name()),
            Self::SumShift(g) => write!(f, "SumShift({})", g.name()),
        }
    }
}

/// `C = sum_i c_i d_i^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankRhs {
    left: Vec<Vec<Complex64>>,
    right: Vec<Vec<Complex64>>,
}

impl LowRankRhs {
    pub fn new(left: Vec<Vec<Complex64>>, right: Vec<Vec<Complex64>>) -> Result<Self> {
        if left.is_empty() || left.len() != right.len() {
            return Err(Error::DimensionMismatch(format!(
                "need matching nonempty factor lists, got {} and {}",
                left.len(),
                right.len()
            )));
        }
        let (m, n) = (left[0].len(), right[0].len());
        for (i, (c, d)) in left.iter().zip(&right).enumerate() {
            if c.len() != m || d.len() != n {
                return Err(Error::DimensionMismatch(format!("factor pair {i} has inconsistent length")));
            }
            for v in [c, d] {
                if v.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                    return Err(Error::InvalidConfig(format!("factor pair {i} is not finite")));
                }
                if v.iter().all(|z| *z == Complex64::ZERO) {
                    return Err(Error::InvalidConfig(format!("factor pair {i} contains a zero vector")));
                }
            }
        }
        Ok(Self { left, right })
    }

    pub fn rank_one(c: Vec<Complex64>, d: Vec<Complex64>) -> Result<Self> {
        Self::new(vec![c], vec![d])
    }

    pub fn rank(&self) -> usize {
        self.left.len()
    }

    pub fn rows(&self) -> usize {
        self.left[0].len()
    }

    pub fn cols(&self) -> usize {
        self.right[0].len()
    }

    pub fn left(&self) -> &[Vec<Complex64>] {
        &self.left
    }

    pub fn right(&self) -> &[Vec<Complex64>] {
        &self.right
    }

    pub fn to_dense(&self) -> ComplexDenseMatrix {
        ComplexDenseMatrix::from_fn(self.rows(), self.cols(), |i, j| {
            self.left.iter().zip(&self.right).map(|(c, d)| c[i] * d[j]).sum()
        })
    }
}

fn pole_check(x: Complex64, y: Complex64, denom: Complex64, scale: f64) -> Result<()> {
    if denom.norm() <= POLE_TOL * scale || denom == Complex64::ZERO {
        return Err(Error::PoleHit {
            x,
            y,
            magnitude: denom.norm(),
        });
    }
    Ok(())
}

fn finite(v: Complex64, at: Complex64) -> Result<Complex64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::FunctionUndefined { at })
    }
}

const GAUSS_LEGENDRE_8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// Mean of `f'` over the segment `[a, b]`.
fn mean_derivative(f: &ScalarFunction, a: Complex64, b: Complex64) -> Result<Complex64> {
    let mid = (a + b) * 0.5;
    let half = (b - a) * 0.5;
    let mut acc = Complex64::ZERO;
    for &(node, weight) in &GAUSS_LEGENDRE_8 {
        acc += weight * (f.derivative_checked(mid + half * node)? + f.derivative_checked(mid - half * node)?);
    }
    Ok(acc * 0.5)
}

/// First divided difference `f[x, y]`, with `f[x, x] = f'(x)`.
pub fn divided_difference(f: &ScalarFunction, x: Complex64, y: Complex64) -> Result<Complex64> {
    let gap = (x - y).norm();
    let scale = x.norm().max(y.norm()).max(1.0);
    if gap <= SIGMA_SWITCH * scale {
        return f.derivative_checked((x + y) * 0.5);
    }
    if gap <= QUADRATURE_WINDOW * scale {
        let mid = (x + y) * 0.5;
        let whole = mean_derivative(f, y, x)?;
        let halves = (mean_derivative(f, y, mid)? + mean_derivative(f, mid, x)?) * 0.5;
        if (whole - halves).norm() <= 1e-13 * halves.norm().max(f64::MIN_POSITIVE) {
            return Ok(halves);
        }
    }
    let fx = f.eval_checked(x)?;
    let fy = f.eval_checked(y)?;
    Ok((fx - fy) / (x - y))
}

/// `Re((i/pi) Log((z + i w2)/(z + i w1)))`, principal branch, `w2 = inf` as a limit.
fn frequency_weight(z: Complex64, omega1: f64, omega2: f64) -> Complex64 {
    let i = Complex64::I;
    let value = if omega2.is_infinite() {
        -0.5 - (i / std::f64::consts::PI) * (z + i * omega1).ln()
    } else {
        (i / std::f64::consts::PI) * ((z + i * omega2) / (z + i * omega1)).ln()
    };
    Complex64::new(value.re, 0.0)
}

/// Pointwise value `f(x, y)`.
pub fn eval_scalar(f: &BivariateFunction, x: Complex64, y: Complex64) -> Result<Complex64> {
    match f {
        BivariateFunction::Sylvester { shift } => {
            let denom = shift + x + y;
            pole_check(x, y, denom, shift.norm() + x.norm() + y.norm())?;
            Ok(1.0 / denom)
        }
        BivariateFunction::Stein => {
            let denom = 1.0 - x * y;
            pole_check(x, y, denom, 1.0 + (x * y).norm())?;
            Ok(1.0 / denom)
        }
        BivariateFunction::ReciprocalPolynomial(p) => {
            let denom = p.eval(x, y);
            pole_check(x, y, denom, p.magnitude(x, y))?;
            Ok(1.0 / denom)
        }
        BivariateFunction::Polynomial(p) => Ok(p.eval(x, y)),
        BivariateFunction::TimeLimited { t_start, t_end } => {
            let s = x + y;
            if t_end.is_infinite() {
                if s.re >= 0.0 {
                    return Err(Error::FunctionUndefined { at: s });
                }
                finite(-(s * *t_start).exp() / s, s)
            } else {
                let width = t_end - t_start;
                finite((s * *t_start).exp() * width * phi(s * width), s)
            }
        }
        BivariateFunction::FrequencyLimited { omega1, omega2 } => {
            let s = x + y;
            pole_check(x, y, s, x.norm() + y.norm())?;
            let g = frequency_weight(x, *omega1, *omega2) + frequency_weight(y, *omega1, *omega2);
            finite(-g / s, s)
        }
        BivariateFunction::DividedDifference(g) => divided_difference(g, x, y),
        BivariateFunction::SumShift(g) => g.eval_checked(x + y),
    }
}

/// `P (F o (P^{-1} C R)) R^{-1}` where `left = P diag P^{-1}` and `right = R diag R^{-1}`.
fn two_sided(
    left: &SpectralDecomposition,
    right: &SpectralDecomposition,
    c: &ComplexDenseMatrix,
    mut entry: impl FnMut(Complex64, Complex64) -> Result<Complex64>,
) -> Result<ComplexDenseMatrix> {
    let transformed = &(left.eigvecs_inv() * c) * right.eigvecs();
    let (lv, rv) = (left.eigvals(), right.eigvals());
    let mut weighted = transformed;
    for (j, &y) in rv.iter().enumerate() {
        for (i, &x) in lv.iter().enumerate() {
            let w = entry(x, y)?;
            weighted.set(i, j, weighted.get(i, j) * w);
        }
    }
    Ok(&(left.eigvecs() * &weighted) * right.eigvecs_inv())
}

fn check_shapes(a: &ComplexDenseMatrix, b: &ComplexDenseMatrix, c: &ComplexDenseMatrix) -> Result<()> {
    if !a.is_square() || !b.is_square() || c.shape() != (a.rows(), b.rows()) {
        return Err(Error::ShapeMismatch(format!(
            "need square A ({:?}), square B ({:?}) and C of shape ({}, {}), got {:?}",
            a.shape(),
            b.shape(),
            a.rows(),
            b.rows(),
            c.shape()
        )));
    }
    Ok(())
}

/// Dense value of `f{A,B}(C)` through two eigendecompositions.
pub fn hadamard_eval(
    f: &BivariateFunction,
    a: &ComplexDenseMatrix,
    b: &ComplexDenseMatrix,
    c: &ComplexDenseMatrix,
) -> Result<ComplexDenseMatrix> {
    check_shapes(a, b, c)?;
    hadamard_eval_from(f, &eig(a)?, &eig(b)?, c)
}

/// [`hadamard_eval`] with precomputed decompositions of `A` and `B`.
pub fn hadamard_eval_from(
    f: &BivariateFunction,
    a: &SpectralDecomposition,
    b: &SpectralDecomposition,
    c: &ComplexDenseMatrix,
) -> Result<ComplexDenseMatrix> {
    two_sided(a, &b.transposed(), c, |x, y| eval_scalar(f, x, y))
}

/// `sum p_ij A^i C (B^T)^j` by Horner's scheme in `A`.
pub fn poly_eval_bivariate(
    p: &PolynomialCoefficients,
    a: &ComplexDenseMatrix,
    b: &ComplexDenseMatrix,
    c: &ComplexDenseMatrix,
) -> Result<ComplexDenseMatrix> {
    check_shapes(a, b, c)?;
    let bt = b.transpose();
    let mut right_powers = Vec::with_capacity(p.cols);
    right_powers.push(c.clone());
    for j in 1..p.cols {
        let next = &right_powers[j - 1] * &bt;
        right_powers.push(next);
    }
    let mut acc = ComplexDenseMatrix::zeros(c.rows(), c.cols());
    for i in (0..p.rows).rev() {
        acc = a * &acc;
        for (j, w) in right_powers.iter().enumerate() {
            let coeff = p.get(i, j);
            if coeff != Complex64::ZERO {
                acc = &acc + &w.scale(coeff);
            }
        }
    }
    Ok(acc)
}

fn sylvester_entry(shift: Complex64) -> impl Fn(Complex64, Complex64) -> Result<Complex64> {
    move |l, m| {
        let value = shift + l + m;
        if value.norm() <= POLE_TOL * (shift.norm() + l.norm() + m.norm()) || value == Complex64::ZERO {
            return Err(Error::SingularPencil { value });
        }
        Ok(1.0 / value)
    }
}

/// Solves `G X + X H^T + shift X = C` by two-sided diagonalization.
pub fn sylvester_small(
    g: &ComplexDenseMatrix,
    h: &ComplexDenseMatrix,
    c: &ComplexDenseMatrix,
    shift: Complex64,
) -> Result<ComplexDenseMatrix> {
    check_shapes(g, h, c)?;
    two_sided(&eig(g)?, &eig(h)?.transposed(), c, sylvester_entry(shift))
}

/// The (1,2) block of `f([[G, C], [0, K]])`.
///
/// The diagonal blocks are diagonalized separately, so coinciding spectra of
/// `G` and `K` (which make the full block matrix defective) are harmless.
pub fn divided_difference_block(
    f: &ScalarFunction,
    g: &ComplexDenseMatrix,
    k: &ComplexDenseMatrix,
    c: &ComplexDenseMatrix,
) -> Result<ComplexDenseMatrix> {
    check_shapes(g, k, c)?;
    divided_difference_from(f, &eig(g)?, &eig(k)?, c)
}

fn divided_difference_from(
    f: &ScalarFunction,
    g: &SpectralDecomposition,
    k: &SpectralDecomposition,
    c: &ComplexDenseMatrix,
) -> Result<ComplexDenseMatrix> {
    two_sided(g, k, c, |x, y| divided_difference(f, x, y))
}

/// `X = f{G,H}(c d^T)` for the compressed problem.
pub fn eval_compressed(
    f: &BivariateFunction,
    g: &ComplexDenseMatrix,
    h: &ComplexDenseMatrix,
    c: &[Complex64],
    d: &[Complex64],
) -> Result<ComplexDenseMatrix> {
    let rhs = ComplexDenseMatrix::outer(c, d)?;
    eval_compressed_from(f, g, h, None, None, &rhs)
}

/// [`eval_compressed`] for a general right-hand side, reusing decompositions
/// of `G` and `H` when they are supplied.
pub fn eval_compressed_from(
    f: &BivariateFunction,
    g: &ComplexDenseMatrix,
    h: &ComplexDenseMatrix,
    g_decomp: Option<&SpectralDecomposition>,
    h_decomp: Option<&SpectralDecomposition>,
    c: &ComplexDenseMatrix,
) -> Result<ComplexDenseMatrix> {
    check_shapes(g, h, c)?;
    if let BivariateFunction::Polynomial(p) = f {
        return poly_eval_bivariate(p, g, h, c);
    }
    let owned_g;
    let g_decomp = match g_decomp {
        Some(d) => d,
        None => {
            owned_g = eig(g)?;
            &owned_g
        }
    };
    let owned_h;
    let h_decomp = match h_decomp {
        Some(d) => d,
        None => {
            owned_h = eig(h)?;
            &owned_h
        }
    };
    match f {
        BivariateFunction::Sylvester { shift } => {
            two_sided(g_decomp, &h_decomp.transposed(), c, sylvester_entry(*shift))
        }
        BivariateFunction::DividedDifference(sf) => {
            divided_difference_from(sf, g_decomp, &h_decomp.transposed(), c)
        }
        _ => hadamard_eval_from(f, g_decomp, h_decomp, c),
    }
}
