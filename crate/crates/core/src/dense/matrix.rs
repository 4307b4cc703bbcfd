use std::fmt;
use std::ops::{Add, Mul, Sub};

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix stored column-major.
///
/// Constructors reject non-finite entries; operations that cannot produce
/// non-finite values from finite inputs (products, sums, transposes) build
/// results directly.
#[derive(Clone, PartialEq)]
pub struct ComplexDenseMatrix {
    inner: Mat<Complex64>,
}

impl ComplexDenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            inner: Mat::zeros(rows, cols),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: Mat::identity(n, n),
        }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: &[Complex64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Self::try_from_fn(rows, cols, |i, j| data[i * cols + j])
    }

    /// Builds a matrix from real rows; convenient in tests and examples.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Self::try_from_fn(nrows, ncols, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    pub fn try_from_fn(
        rows: usize,
        cols: usize,
        f: impl FnMut(usize, usize) -> Complex64,
    ) -> Result<Self> {
        let m = Self::from_fn(rows, cols, f);
        m.check_finite()?;
        Ok(m)
    }

    pub(crate) fn from_fn(
        rows: usize,
        cols: usize,
        f: impl FnMut(usize, usize) -> Complex64,
    ) -> Self {
        Self {
            inner: Mat::from_fn(rows, cols, f),
        }
    }

    pub fn from_diag(diag: &[Complex64]) -> Result<Self> {
        let n = diag.len();
        Self::try_from_fn(n, n, |i, j| if i == j { diag[i] } else { Complex64::ZERO })
    }

    pub fn from_real_diag(diag: &[f64]) -> Result<Self> {
        let d: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_diag(&d)
    }

    /// Column vector (n x 1).
    pub fn column_vector(v: &[Complex64]) -> Result<Self> {
        Self::try_from_fn(v.len(), 1, |i, _| v[i])
    }

    /// Rank-one outer product `c d^T` (plain transpose, no conjugation).
    pub fn outer(c: &[Complex64], d: &[Complex64]) -> Result<Self> {
        Self::try_from_fn(c.len(), d.len(), |i, j| c[i] * d[j])
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<Complex64>], rows: usize) -> Result<Self> {
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::ShapeMismatch("column length differs from row count".into()));
        }
        Self::try_from_fn(rows, columns.len(), |i, j| columns[j][i])
    }

    pub fn from_faer(inner: Mat<Complex64>) -> Result<Self> {
        let m = Self { inner };
        m.check_finite()?;
        Ok(m)
    }

    pub(crate) fn from_faer_unchecked(inner: Mat<Complex64>) -> Self {
        Self { inner }
    }

    fn check_finite(&self) -> Result<()> {
        for j in 0..self.cols() {
            for i in 0..self.rows() {
                let z = self.inner[(i, j)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.inner[(i, j)]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.inner[(i, j)] = value;
    }

    pub fn as_faer(&self) -> MatRef<'_, Complex64> {
        self.inner.as_ref()
    }

    pub fn into_faer(self) -> Mat<Complex64> {
        self.inner
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows()).map(|i| self.inner[(i, j)]).collect()
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.inner[(i, j)]);
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self)
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for j in 0..self.cols() {
            for i in 0..self.rows() {
                m = m.max(self.inner[(i, j)].norm());
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        Self::from_faer_unchecked(self.inner.transpose().to_owned())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_faer_unchecked(self.inner.adjoint().to_owned())
    }

    pub fn conj(&self) -> Self {
        Self::from_faer_unchecked(self.inner.conjugate().to_owned())
    }

    pub fn scale(&self, alpha: Complex64) -> Self {
        Self::from_fn(self.rows(), self.cols(), |i, j| alpha * self.inner[(i, j)])
    }

    pub fn map(&self, mut f: impl FnMut(Complex64) -> Complex64) -> Self {
        Self::from_fn(self.rows(), self.cols(), |i, j| f(self.inner[(i, j)]))
    }

    /// Copy of the block starting at `(row, col)` with the given shape.
    pub fn submatrix(&self, row: usize, col: usize, rows: usize, cols: usize) -> Self {
        assert!(row + rows <= self.rows() && col + cols <= self.cols());
        Self::from_faer_unchecked(self.inner.submatrix(row, col, rows, cols).to_owned())
    }

    /// Leading `rows x cols` block.
    pub fn leading(&self, rows: usize, cols: usize) -> Self {
        self.submatrix(0, 0, rows, cols)
    }

    /// Zero-pads (or keeps) to `rows x cols`, placing `self` in the top-left corner.
    pub fn padded(&self, rows: usize, cols: usize) -> Result<Self> {
        if rows < self.rows() || cols < self.cols() {
            return Err(Error::ShapeMismatch(format!(
                "cannot pad {}x{} into {rows}x{cols}",
                self.rows(),
                self.cols()
            )));
        }
        Ok(Self::from_fn(rows, cols, |i, j| {
            if i < self.rows() && j < self.cols() {
                self.inner[(i, j)]
            } else {
                Complex64::ZERO
            }
        }))
    }

    /// `[[a, b], [c, d]]` block matrix.
    pub fn block2x2(a: &Self, b: &Self, c: &Self, d: &Self) -> Result<Self> {
        if a.rows() != b.rows()
            || c.rows() != d.rows()
            || a.cols() != c.cols()
            || b.cols() != d.cols()
        {
            return Err(Error::ShapeMismatch("inconsistent block shapes".into()));
        }
        let (r1, c1) = a.shape();
        Ok(Self::from_fn(a.rows() + c.rows(), a.cols() + b.cols(), |i, j| {
            match (i < r1, j < c1) {
                (true, true) => a.get(i, j),
                (true, false) => b.get(i, j - c1),
                (false, true) => c.get(i - r1, j),
                (false, false) => d.get(i - r1, j - c1),
            }
        }))
    }

    pub fn hstack(blocks: &[&Self]) -> Result<Self> {
        let rows = blocks.first().map_or(0, |b| b.rows());
        if blocks.iter().any(|b| b.rows() != rows) {
            return Err(Error::ShapeMismatch("hstack row counts differ".into()));
        }
        let cols: usize = blocks.iter().map(|b| b.cols()).sum();
        let mut out = Self::zeros(rows, cols);
        let mut offset = 0;
        for b in blocks {
            for j in 0..b.cols() {
                for i in 0..rows {
                    out.inner[(i, offset + j)] = b.get(i, j);
                }
            }
            offset += b.cols();
        }
        Ok(out)
    }

    /// Block-diagonal matrix.
    pub fn block_diag(blocks: &[&Self]) -> Self {
        let rows: usize = blocks.iter().map(|b| b.rows()).sum();
        let cols: usize = blocks.iter().map(|b| b.cols()).sum();
        let mut out = Self::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for j in 0..b.cols() {
                for i in 0..b.rows() {
                    out.inner[(r0 + i, c0 + j)] = b.get(i, j);
                }
            }
            r0 += b.rows();
            c0 += b.cols();
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(Self::from_faer_unchecked(&self.inner * &rhs.inner))
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols());
        let mut y = vec![Complex64::ZERO; self.rows()];
        for (j, &xj) in x.iter().enumerate() {
            if xj == Complex64::ZERO {
                continue;
            }
            let col = self.inner.col(j);
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += col[i] * xj;
            }
        }
        y
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        self.check_same_shape(rhs)?;
        Ok(Self::from_faer_unchecked(&self.inner + &rhs.inner))
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self> {
        self.check_same_shape(rhs)?;
        Ok(Self::from_faer_unchecked(&self.inner - &rhs.inner))
    }

    fn check_same_shape(&self, rhs: &Self) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(())
    }

    /// Solves `self * X = rhs` by LU with partial pivoting.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        if !self.is_square() || self.rows() != rhs.rows() {
            return Err(Error::ShapeMismatch("solve needs square system with matching rhs".into()));
        }
        let x = self.inner.partial_piv_lu().solve(&rhs.inner);
        Self::from_faer(x).map_err(|_| Error::EvaluationFailure("singular linear system".into()))
    }

    /// Solves `self^T * X = rhs`.
    pub fn solve_transpose(&self, rhs: &Self) -> Result<Self> {
        if !self.is_square() || self.rows() != rhs.rows() {
            return Err(Error::ShapeMismatch("solve needs square system with matching rhs".into()));
        }
        let x = self.inner.partial_piv_lu().solve_transpose(&rhs.inner);
        Self::from_faer(x).map_err(|_| Error::EvaluationFailure("singular linear system".into()))
    }

    pub fn inverse(&self) -> Result<Self> {
        self.solve(&Self::identity(self.rows()))
    }

    /// Singular values in nonincreasing order.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        self.inner
            .singular_values()
            .map_err(|e| Error::EvaluationFailure(format!("SVD failed: {e:?}")))
    }

    /// Thin QR: `self = Q R` with `Q` having orthonormal columns.
    pub fn qr_thin(&self) -> (Self, Self) {
        let qr = self.inner.qr();
        (
            Self::from_faer_unchecked(qr.compute_thin_Q()),
            Self::from_faer_unchecked(qr.thin_R().to_owned()),
        )
    }

    /// Thin SVD `self = U diag(s) V^*`.
    pub fn svd_thin(&self) -> Result<(Self, Vec<f64>, Self)> {
        let svd = self
            .inner
            .thin_svd()
            .map_err(|e| Error::EvaluationFailure(format!("SVD failed: {e:?}")))?;
        let s = svd.S().column_vector().iter().map(|z| z.re).collect();
        Ok((
            Self::from_faer_unchecked(svd.U().to_owned()),
            s,
            Self::from_faer_unchecked(svd.V().to_owned()),
        ))
    }

    /// Distance from Hermitian structure, `||M - M^*||_F`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                s += (self.inner[(i, j)] - self.inner[(j, i)].conj()).norm_sqr();
            }
        }
        s.sqrt()
    }
}

/// `sqrt(sum |m_ij|^2)`, accumulated with scaling so huge or tiny entries do
/// not overflow or underflow.
pub fn frobenius_norm(m: &ComplexDenseMatrix) -> f64 {
    let mut scale = 0.0f64;
    let mut ssq = 1.0f64;
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            let z = m.inner[(i, j)];
            for part in [z.re, z.im] {
                if part != 0.0 {
                    let a = part.abs();
                    if scale < a {
                        ssq = 1.0 + ssq * (scale / a) * (scale / a);
                        scale = a;
                    } else {
                        ssq += (a / scale) * (a / scale);
                    }
                }
            }
        }
    }
    scale * ssq.sqrt()
}

/// Largest singular value estimate by power iteration on `M^* M`.
///
/// Iterates until the estimate stabilises to `1e-10` relative or 300 steps.
/// The start vector is deterministic.
pub fn spectral_norm_estimate(m: &ComplexDenseMatrix) -> f64 {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let mut x: Vec<Complex64> = (0..cols)
        .map(|j| Complex64::new(1.0 + 0.5 * ((j * 7919) % 13) as f64 / 13.0, 0.0))
        .collect();
    let mt = m.adjoint();
    let mut sigma = 0.0;
    for _ in 0..300 {
        let nx = vec_norm(&x);
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let y = m.matvec(&x);
        let next = vec_norm(&y);
        x = mt.matvec(&y);
        if (next - sigma).abs() <= 1e-10 * next {
            return next;
        }
        sigma = next;
    }
    sigma
}

pub fn vec_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl fmt::Debug for ComplexDenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexDenseMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            write!(f, "  ")?;
            for j in 0..self.cols() {
                let z = self.get(i, j);
                write!(f, "{:+.6e}{:+.6e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Mul for &ComplexDenseMatrix {
    type Output = ComplexDenseMatrix;

    fn mul(self, rhs: Self) -> ComplexDenseMatrix {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

impl Add for &ComplexDenseMatrix {
    type Output = ComplexDenseMatrix;

    fn add(self, rhs: Self) -> ComplexDenseMatrix {
        self.try_add(rhs).expect("matrix sum shape mismatch")
    }
}

impl Sub for &ComplexDenseMatrix {
    type Output = ComplexDenseMatrix;

    fn sub(self, rhs: Self) -> ComplexDenseMatrix {
        self.try_sub(rhs).expect("matrix difference shape mismatch")
    }
}
