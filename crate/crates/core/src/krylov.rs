//! Arnoldi iteration over abstract linear operators.
//!
//! An [`ArnoldiState`] at depth `k` carries the orthonormal basis `U_k`, the
//! upper Hessenberg compression `G_k = U_k^* A U_k` and the residual pair
//! `(g_{k+1,k}, u_{k+1})` so that
//!
//! ```text
//! A U_k = U_k G_k + g_{k+1,k} u_{k+1} e_k^T.
//! ```
//!
//! Every new direction is orthogonalized twice with classical Gram-Schmidt.

use std::sync::Arc;

use num_complex::Complex64;

use crate::dense::{vec_norm, ComplexDenseMatrix};
use crate::error::{Error, Result};

/// Residual norms at or below this multiple of the operator norm estimate
/// signal an invariant subspace.
pub const BREAKDOWN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Dense,
    Sparse,
    Diagonal,
}

/// The action `x -> A x` of a square matrix.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `A x` into `y`; both slices have length `dim()`.
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);

    fn kind(&self) -> OperatorKind;

    fn apply_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::ZERO; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        (**self).apply(x, y)
    }

    fn kind(&self) -> OperatorKind {
        (**self).kind()
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        (**self).apply(x, y)
    }

    fn kind(&self) -> OperatorKind {
        (**self).kind()
    }
}

#[derive(Debug, Clone)]
pub struct DenseOperator {
    matrix: ComplexDenseMatrix,
}

impl DenseOperator {
    pub fn new(matrix: ComplexDenseMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::ShapeMismatch("operator matrix must be square".into()));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &ComplexDenseMatrix {
        &self.matrix
    }

    pub fn transpose(&self) -> Self {
        Self {
            matrix: self.matrix.transpose(),
        }
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.rows()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.copy_from_slice(&self.matrix.matvec(x));
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Dense
    }
}

#[derive(Debug, Clone)]
pub struct DiagonalOperator {
    diag: Vec<Complex64>,
}

impl DiagonalOperator {
    pub fn new(diag: Vec<Complex64>) -> Self {
        Self { diag }
    }

    pub fn from_real(diag: &[f64]) -> Self {
        Self::new(diag.iter().map(|&d| Complex64::new(d, 0.0)).collect())
    }

    pub fn diagonal(&self) -> &[Complex64] {
        &self.diag
    }

    pub fn to_dense(&self) -> ComplexDenseMatrix {
        ComplexDenseMatrix::from_fn(self.diag.len(), self.diag.len(), |i, j| {
            if i == j {
                self.diag[i]
            } else {
                Complex64::ZERO
            }
        })
    }
}

impl LinearOperator for DiagonalOperator {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for ((yi, &xi), &di) in y.iter_mut().zip(x).zip(&self.diag) {
            *yi = di * xi;
        }
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Diagonal
    }
}

/// Square sparse matrix in compressed sparse row form.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl SparseOperator {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, Complex64)]) -> Result<Self> {
        let mut sorted: Vec<_> = triplets.to_vec();
        if let Some(&(r, c, _)) = sorted.iter().find(|&&(r, c, _)| r >= dim || c >= dim) {
            return Err(Error::DimensionMismatch(format!(
                "entry ({r}, {c}) outside a {dim}x{dim} matrix"
            )));
        }
        if sorted.iter().any(|(_, _, v)| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidConfig("sparse entries must be finite".into()));
        }
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
                continue;
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            dim,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, Complex64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.push((r, self.col_idx[k], self.values[k]));
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.dim, &t).expect("transpose of a valid matrix")
    }

    pub fn to_dense(&self) -> ComplexDenseMatrix {
        let mut m = ComplexDenseMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m.set(r, c, v);
        }
        m
    }
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = Complex64::ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    fn kind(&self) -> OperatorKind {
        OperatorKind::Sparse
    }
}

/// Snapshot of an Arnoldi process.
#[derive(Debug, Clone)]
pub struct ArnoldiState {
    basis: Vec<Vec<Complex64>>,
    /// Column `j` of the Hessenberg matrix, entries `0..=j+1`; the last entry
    /// is the (real, nonnegative) subdiagonal.
    hess: Vec<Vec<Complex64>>,
    residual_vector: Option<Vec<Complex64>>,
    start_norm: f64,
    norm_estimate: f64,
    broken_down: bool,
}

impl ArnoldiState {
    /// Current depth `k`.
    pub fn depth(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.basis.first().map_or(0, |b| b.len())
    }

    pub fn start_norm(&self) -> f64 {
        self.start_norm
    }

    /// Largest `||A u_j||` seen so far.
    pub fn norm_estimate(&self) -> f64 {
        self.norm_estimate
    }

    pub fn broken_down(&self) -> bool {
        self.broken_down
    }

    pub fn basis_vector(&self, j: usize) -> &[Complex64] {
        &self.basis[j]
    }

    /// `U_j` for `j <= depth()`.
    pub fn basis(&self, j: usize) -> ComplexDenseMatrix {
        ComplexDenseMatrix::from_fn(self.dim(), j, |r, c| self.basis[c][r])
    }

    pub fn full_basis(&self) -> ComplexDenseMatrix {
        self.basis(self.depth())
    }

    /// Leading `j x j` block of the Hessenberg matrix, `G_j`.
    pub fn hessenberg(&self, j: usize) -> ComplexDenseMatrix {
        assert!(j <= self.depth());
        ComplexDenseMatrix::from_fn(j, j, |r, c| {
            if r <= c + 1 {
                self.hess[c][r]
            } else {
                Complex64::ZERO
            }
        })
    }

    pub fn full_hessenberg(&self) -> ComplexDenseMatrix {
        self.hessenberg(self.depth())
    }

    /// `g_{k+1,k}`; zero after breakdown.
    pub fn residual_scalar(&self) -> Complex64 {
        self.hess
            .last()
            .and_then(|col| col.get(self.depth()))
            .copied()
            .unwrap_or(Complex64::ZERO)
    }

    pub fn residual_vector(&self) -> Option<&[Complex64]> {
        self.residual_vector.as_deref()
    }

    /// `||A U_k - U_k G_k - g_{k+1,k} u_{k+1} e_k^T||_F`, recomputed with fresh products.
    pub fn decomposition_residual(&self, op: &dyn LinearOperator) -> f64 {
        let k = self.depth();
        let mut total = 0.0;
        for j in 0..k {
            let mut r = op.apply_vec(&self.basis[j]);
            for i in 0..=j.min(k - 1) {
                let h = self.hess[j][i];
                for (ri, &ui) in r.iter_mut().zip(&self.basis[i]) {
                    *ri -= h * ui;
                }
            }
            if j + 1 < k {
                let h = self.hess[j][j + 1];
                for (ri, &ui) in r.iter_mut().zip(&self.basis[j + 1]) {
                    *ri -= h * ui;
                }
            } else if let Some(u) = &self.residual_vector {
                let h = self.hess[j][j + 1];
                for (ri, &ui) in r.iter_mut().zip(u) {
                    *ri -= h * ui;
                }
            }
            total += r.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        total.sqrt()
    }

    /// `||U_k^* U_k - I||_F`.
    pub fn orthogonality_defect(&self) -> f64 {
        let k = self.depth();
        let mut total = 0.0;
        for i in 0..k {
            for j in 0..k {
                let d = dot(&self.basis[i], &self.basis[j]);
                let target = if i == j { Complex64::ONE } else { Complex64::ZERO };
                total += (d - target).norm_sqr();
            }
        }
        total.sqrt()
    }
}

/// `x^* y`.
fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Orthogonalizes `w` against `basis` twice, returning the accumulated coefficients.
fn orthogonalize(basis: &[Vec<Complex64>], w: &mut [Complex64]) -> Vec<Complex64> {
    let mut coeffs = vec![Complex64::ZERO; basis.len()];
    for _ in 0..2 {
        let pass: Vec<Complex64> = basis.iter().map(|u| dot(u, w)).collect();
        for (u, &h) in basis.iter().zip(&pass) {
            for (wi, &ui) in w.iter_mut().zip(u) {
                *wi -= h * ui;
            }
        }
        for (c, p) in coeffs.iter_mut().zip(pass) {
            *c += p;
        }
    }
    coeffs
}

/// Depth-one state: `U_1 = start / ||start||` and `G_1 = u_1^* A u_1`.
pub fn arnoldi_init(op: &dyn LinearOperator, start: &[Complex64]) -> Result<ArnoldiState> {
    if start.len() != op.dim() {
        return Err(Error::DimensionMismatch(format!(
            "start vector has length {}, operator dimension is {}",
            start.len(),
            op.dim()
        )));
    }
    let start_norm = vec_norm(start);
    if start_norm == 0.0 {
        return Err(Error::ZeroStartVector);
    }
    if !start_norm.is_finite() {
        return Err(Error::InvalidConfig("start vector must be finite".into()));
    }
    let u1: Vec<Complex64> = start.iter().map(|&z| z / start_norm).collect();
    let mut state = ArnoldiState {
        basis: vec![u1],
        hess: Vec::new(),
        residual_vector: None,
        start_norm,
        norm_estimate: 0.0,
        broken_down: false,
    };
    expand_last(op, &mut state);
    Ok(state)
}

/// Computes column `k` of the Hessenberg matrix from `A u_k` and the next residual.
fn expand_last(op: &dyn LinearOperator, state: &mut ArnoldiState) {
    let k = state.basis.len();
    let mut w = op.apply_vec(&state.basis[k - 1]);
    state.norm_estimate = state.norm_estimate.max(vec_norm(&w));
    let mut column = orthogonalize(&state.basis, &mut w);
    let beta = vec_norm(&w);
    if beta <= BREAKDOWN_TOL * state.norm_estimate || k == op.dim() {
        state.broken_down = true;
        state.residual_vector = None;
        column.push(Complex64::ZERO);
    } else {
        w.iter_mut().for_each(|z| *z /= beta);
        state.residual_vector = Some(w);
        column.push(Complex64::new(beta, 0.0));
    }
    state.hess.push(column);
}

/// Advances by up to `steps`; stops early (setting `broken_down`) on an
/// invariant subspace. A state that has already broken down is returned unchanged.
pub fn arnoldi_extend(
    op: &dyn LinearOperator,
    state: &ArnoldiState,
    steps: usize,
) -> Result<ArnoldiState> {
    if op.dim() != state.dim() {
        return Err(Error::DimensionMismatch("operator does not match Arnoldi state".into()));
    }
    let mut next = state.clone();
    if next.broken_down {
        return Ok(next);
    }
    if state.depth() + steps > op.dim() {
        return Err(Error::DimensionExceeded {
            requested: state.depth() + steps,
            dimension: op.dim(),
        });
    }
    for _ in 0..steps {
        let Some(u) = next.residual_vector.take() else {
            break;
        };
        next.basis.push(u);
        expand_last(op, &mut next);
        if next.broken_down {
            break;
        }
    }
    Ok(next)
}

/// Extends in place up to `target` depth (or breakdown), never beyond the dimension.
pub(crate) fn grow_to(op: &dyn LinearOperator, state: &mut ArnoldiState, target: usize) {
    let target = target.min(op.dim());
    while state.depth() < target && !state.broken_down {
        let u = state.residual_vector.take().expect("unbroken state has a residual");
        state.basis.push(u);
        expand_last(op, state);
    }
}
