//! Verification helpers that are more accurate than the quantities they check.

use num_complex::Complex64;

use crate::dense::{frobenius_norm, ComplexDenseMatrix};
use crate::error::{Error, Result};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, Default)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Dekker's exact product `a * b = p + e`. `mul_add` would be shorter, but
/// without a hardware FMA target it lowers to a software `fma` whose cost
/// swings by 50x with the operands.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    const SPLIT: f64 = 134_217_729.0; // 2^27 + 1
    let split = |x: f64| {
        let t = SPLIT * x;
        let hi = t - (t - x);
        (hi, x - hi)
    };
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

fn quick_two_sum(a: f64, b: f64) -> DoubleDouble {
    let s = a + b;
    DoubleDouble { hi: s, lo: b - (s - a) }
}

impl DoubleDouble {
    fn add(self, other: Self) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        quick_two_sum(s, e + self.lo + other.lo)
    }

    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }

    fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        quick_two_sum(p, e + self.lo * b)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ComplexDD {
    re: DoubleDouble,
    im: DoubleDouble,
}

impl ComplexDD {
    fn from_c64(z: Complex64) -> Self {
        Self {
            re: DoubleDouble { hi: z.re, lo: 0.0 },
            im: DoubleDouble { hi: z.im, lo: 0.0 },
        }
    }

    fn add(self, o: Self) -> Self {
        Self {
            re: self.re.add(o.re),
            im: self.im.add(o.im),
        }
    }

    fn sub(self, o: Self) -> Self {
        Self {
            re: self.re.add(o.re.neg()),
            im: self.im.add(o.im.neg()),
        }
    }

    fn mul_c64(self, b: Complex64) -> Self {
        Self {
            re: self.re.mul_f64(b.re).add(self.im.mul_f64(b.im).neg()),
            im: self.re.mul_f64(b.im).add(self.im.mul_f64(b.re)),
        }
    }

    fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.hi + self.re.lo, self.im.hi + self.im.lo)
    }
}

/// `U X V^T` entries in double-double precision.
fn assemble_dd(u: &ComplexDenseMatrix, x: &ComplexDenseMatrix, v: &ComplexDenseMatrix) -> Vec<ComplexDD> {
    let (m, n, k, l) = (u.rows(), v.rows(), x.rows(), x.cols());
    // W = X V^T, k x n
    let mut w = vec![ComplexDD::default(); k * n];
    for p in 0..k {
        for j in 0..n {
            let mut acc = ComplexDD::default();
            for q in 0..l {
                acc = acc.add(ComplexDD::from_c64(x.get(p, q)).mul_c64(v.get(j, q)));
            }
            w[p * n + j] = acc;
        }
    }
    let mut y = vec![ComplexDD::default(); m * n];
    for i in 0..m {
        for p in 0..k {
            let uip = u.get(i, p);
            if uip == Complex64::ZERO {
                continue;
            }
            for j in 0..n {
                y[i * n + j] = y[i * n + j].add(w[p * n + j].mul_c64(uip));
            }
        }
    }
    y
}

/// `||U_1 X_1 V_1^T - U_2 X_2 V_2^T||_F`, with both products and their
/// difference formed in double-double arithmetic so that the result is
/// accurate relative to itself even when the two terms nearly cancel.
pub fn assembled_difference_norm(
    first: (&ComplexDenseMatrix, &ComplexDenseMatrix, &ComplexDenseMatrix),
    second: (&ComplexDenseMatrix, &ComplexDenseMatrix, &ComplexDenseMatrix),
) -> Result<f64> {
    for (u, x, v) in [first, second] {
        if u.cols() != x.rows() || v.cols() != x.cols() {
            return Err(Error::ShapeMismatch("U X V^T factors do not chain".into()));
        }
    }
    let (m, n) = (first.0.rows(), first.2.rows());
    if second.0.rows() != m || second.2.rows() != n {
        return Err(Error::ShapeMismatch("assembled matrices differ in shape".into()));
    }
    let a = assemble_dd(first.0, first.1, first.2);
    let b = assemble_dd(second.0, second.1, second.2);
    let diff = ComplexDenseMatrix::from_fn(m, n, |i, j| a[i * n + j].sub(b[i * n + j]).to_c64());
    Ok(frobenius_norm(&diff))
}
