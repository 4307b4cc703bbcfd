//! Tensorized Krylov approximation of `f{A,B}(C)` for low-rank `C`.
//!
//! For `C = c d^T` two Arnoldi processes build `U_k` (from `A`, `c`) and `V_l`
//! (from `B`, `d`), and
//!
//! ```text
//! f{A,B}(c d^T) ~ U_k X_{k,l} V_l^T,    X_{k,l} = f{G_k, H_l}(|c| e_1 (|d| e_1)^T).
//! ```
//!
//! The loop compares `X_{k,l}` with the look-ahead core `X_{k+h,l+h}`; since
//! the bases are nested and orthonormal, the Frobenius norm of the padded
//! difference equals the norm of the difference of the assembled approximations.

use std::collections::VecDeque;
use std::sync::Arc;

use num_complex::Complex64;

use crate::dense::{eig, vec_norm, ComplexDenseMatrix, SpectralDecomposition};
use crate::error::{Error, Result};
use crate::kernels::{eval_compressed_from, BivariateFunction, LowRankRhs};
use crate::krylov::{arnoldi_init, grow_to, ArnoldiState, LinearOperator};

/// Relative tolerance under which two side-selection differences count as a tie.
pub const SIDE_TIE_TOL: f64 = 1e-14;
const CACHE_SLOTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankSplit {
    /// Orthogonalize the factors and split along singular directions.
    Svd,
    /// Use the given factor pairs as the rank-one terms.
    AsGiven,
}

#[derive(Debug, Clone)]
pub struct DriverOptions {
    /// Stop when the estimate is below `tol * |c| |d|`.
    pub tol: f64,
    /// Look-ahead window.
    pub h: usize,
    /// Largest `k`; capped at the dimension of `A`.
    pub k_max: usize,
    /// Largest `l`; capped at the dimension of `B`.
    pub l_max: usize,
    /// Basis growth per round.
    pub step: usize,
    /// Grow only the side whose look-ahead changes the core more.
    pub balance: bool,
    /// Consecutive estimates below tolerance required to stop.
    pub confirmations: usize,
    pub rank_split: RankSplit,
}

impl Default for DriverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            h: 2,
            k_max: 300,
            l_max: 300,
            step: 2,
            balance: false,
            confirmations: 2,
            rank_split: RankSplit::Svd,
        }
    }
}

impl DriverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig("tol must be finite and nonnegative".into()));
        }
        if self.h == 0 || self.step == 0 || self.confirmations == 0 {
            return Err(Error::InvalidConfig("h, step and confirmations must be at least 1".into()));
        }
        if self.k_max == 0 || self.l_max == 0 {
            return Err(Error::InvalidConfig("k_max and l_max must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    BudgetExhausted,
    /// Both Krylov spaces became invariant; the core is exact up to evaluation error.
    Breakdown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    /// Index of the rank-one term this round belongs to.
    pub term: usize,
    pub k: usize,
    pub l: usize,
    pub estimate: f64,
}

/// `U X V^T` with orthonormal `U`, `V`.
#[derive(Debug, Clone)]
pub struct ApproximationResult {
    pub u: ComplexDenseMatrix,
    pub x: ComplexDenseMatrix,
    pub v: ComplexDenseMatrix,
    pub trace: Vec<TraceEntry>,
    pub termination: Termination,
}

impl ApproximationResult {
    pub fn k(&self) -> usize {
        self.u.cols()
    }

    pub fn l(&self) -> usize {
        self.v.cols()
    }

    /// The dense `m x n` approximation.
    pub fn to_dense(&self) -> ComplexDenseMatrix {
        &(&self.u * &self.x) * &self.v.transpose()
    }

    /// `(U X V^T) w`.
    pub fn apply(&self, w: &[Complex64]) -> Vec<Complex64> {
        let vt_w = self.v.transpose().matvec(w);
        self.u.matvec(&self.x.matvec(&vt_w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
    Both,
}

/// `||core_big - pad(core_small)||_F`.
pub fn error_estimate(core_small: &ComplexDenseMatrix, core_big: &ComplexDenseMatrix) -> Result<f64> {
    let padded = core_small.padded(core_big.rows(), core_big.cols())?;
    Ok((core_big - &padded).frobenius_norm())
}

/// Grow `A`'s side iff padding in `k` changes the core at least as much as padding in `l`.
pub fn side_selection(
    core_grow_k: &ComplexDenseMatrix,
    core_grow_l: &ComplexDenseMatrix,
    core: &ComplexDenseMatrix,
) -> Result<Side> {
    let da = error_estimate(core, core_grow_k)?;
    let db = error_estimate(core, core_grow_l)?;
    Ok(choose_side(da, db))
}

fn choose_side(da: f64, db: f64) -> Side {
    if (da - db).abs() <= SIDE_TIE_TOL * da.max(db) {
        Side::Both
    } else if da >= db {
        Side::A
    } else {
        Side::B
    }
}

struct KrylovSide<'a> {
    op: &'a dyn LinearOperator,
    state: ArnoldiState,
    decomps: VecDeque<(usize, Arc<SpectralDecomposition>)>,
}

impl<'a> KrylovSide<'a> {
    fn new(op: &'a dyn LinearOperator, start: &[Complex64]) -> Result<Self> {
        Ok(Self {
            op,
            state: arnoldi_init(op, start)?,
            decomps: VecDeque::new(),
        })
    }

    /// Grows towards `depth` and returns the depth actually available.
    fn reach(&mut self, depth: usize) -> usize {
        grow_to(self.op, &mut self.state, depth);
        depth.min(self.state.depth())
    }

    /// Depth beyond which the space cannot grow (invariant subspace).
    fn ceiling(&self) -> usize {
        if self.state.broken_down() {
            self.state.depth()
        } else {
            self.op.dim()
        }
    }

    fn decomposition(&mut self, depth: usize) -> Result<Arc<SpectralDecomposition>> {
        if let Some((_, d)) = self.decomps.iter().find(|(k, _)| *k == depth) {
            return Ok(d.clone());
        }
        let d = Arc::new(eig(&self.state.hessenberg(depth))?);
        if self.decomps.len() == CACHE_SLOTS {
            self.decomps.pop_front();
        }
        self.decomps.push_back((depth, d.clone()));
        Ok(d)
    }
}

/// The pair of Arnoldi processes for one rank-one term, with cached compressed cores.
pub struct TensorKrylov<'a> {
    f: BivariateFunction,
    left: KrylovSide<'a>,
    right: KrylovSide<'a>,
    cores: VecDeque<((usize, usize), Arc<ComplexDenseMatrix>)>,
}

impl<'a> TensorKrylov<'a> {
    pub fn new(
        f: &BivariateFunction,
        a: &'a dyn LinearOperator,
        b: &'a dyn LinearOperator,
        c: &[Complex64],
        d: &[Complex64],
    ) -> Result<Self> {
        Ok(Self {
            f: f.clone(),
            left: KrylovSide::new(a, c)?,
            right: KrylovSide::new(b, d)?,
            cores: VecDeque::new(),
        })
    }

    pub fn left_state(&self) -> &ArnoldiState {
        &self.left.state
    }

    pub fn right_state(&self) -> &ArnoldiState {
        &self.right.state
    }

    /// `|c| |d|`.
    pub fn rhs_scale(&self) -> f64 {
        self.left.state.start_norm() * self.right.state.start_norm()
    }

    /// Grows both sides towards `(k, l)`; returns the depths actually available.
    pub fn reach(&mut self, k: usize, l: usize) -> (usize, usize) {
        (self.left.reach(k), self.right.reach(l))
    }

    /// `X_{k,l}`; both sides must already have depth at least `k`, `l`.
    pub fn core(&mut self, k: usize, l: usize) -> Result<Arc<ComplexDenseMatrix>> {
        if let Some((_, x)) = self.cores.iter().find(|(key, _)| *key == (k, l)) {
            return Ok(x.clone());
        }
        let (rk, rl) = self.reach(k, l);
        if rk < k || rl < l {
            return Err(Error::DimensionExceeded {
                requested: if rk < k { k } else { l },
                dimension: if rk < k { rk } else { rl },
            });
        }
        let x = Arc::new(self.evaluate(k, l)?);
        if self.cores.len() == CACHE_SLOTS {
            self.cores.pop_front();
        }
        self.cores.push_back(((k, l), x.clone()));
        Ok(x)
    }

    /// Evaluates `X_{k,l}` from the stored Arnoldi states, bypassing the core cache.
    pub fn evaluate(&mut self, k: usize, l: usize) -> Result<ComplexDenseMatrix> {
        let g = self.left.state.hessenberg(k);
        let h = self.right.state.hessenberg(l);
        let mut rhs = ComplexDenseMatrix::zeros(k, l);
        rhs.set(0, 0, Complex64::new(self.rhs_scale(), 0.0));
        if self.f.uses_spectra() {
            let dg = self.left.decomposition(k)?;
            let dh = self.right.decomposition(l)?;
            eval_compressed_from(&self.f, &g, &h, Some(&dg), Some(&dh), &rhs)
        } else {
            eval_compressed_from(&self.f, &g, &h, None, None, &rhs)
        }
    }

    pub fn left_basis(&self, k: usize) -> ComplexDenseMatrix {
        self.left.state.basis(k)
    }

    pub fn right_basis(&self, l: usize) -> ComplexDenseMatrix {
        self.right.state.basis(l)
    }

    /// `U_k X_{k,l} V_l^T` as a dense matrix.
    pub fn assemble(&mut self, k: usize, l: usize) -> Result<ComplexDenseMatrix> {
        let x = self.core(k, l)?;
        Ok(&(&self.left_basis(k) * &x) * &self.right_basis(l).transpose())
    }

    fn result(&mut self, k: usize, l: usize, trace: Vec<TraceEntry>, termination: Termination) -> Result<ApproximationResult> {
        let x = self.core(k, l)?;
        Ok(ApproximationResult {
            u: self.left_basis(k),
            x: (*x).clone(),
            v: self.right_basis(l),
            trace,
            termination,
        })
    }

    /// Adaptive loop for this rank-one term.
    fn run(&mut self, opts: &DriverOptions, term: usize) -> Result<ApproximationResult> {
        let k_cap = opts.k_max.min(self.left.op.dim());
        let l_cap = opts.l_max.min(self.right.op.dim());
        let threshold = opts.tol * self.rhs_scale();
        let mut trace = Vec::new();
        let (mut k, mut l) = (1usize, 1usize);
        let mut below = 0usize;
        loop {
            let (kb, lb) = self.look_ahead(k, l, opts.h, k_cap, l_cap);
            if kb == k && lb == l {
                let termination = if k >= self.left.ceiling() && l >= self.right.ceiling() {
                    Termination::Breakdown
                } else {
                    Termination::BudgetExhausted
                };
                return self.result(k, l, trace, termination);
            }
            let small = self.core(k, l)?;
            let big = self.core(kb, lb)?;
            let estimate = error_estimate(&small, &big)?;
            trace.push(TraceEntry { term, k, l, estimate });
            below = if estimate <= threshold { below + 1 } else { 0 };
            if below >= opts.confirmations {
                return self.result(kb, lb, trace, Termination::Converged);
            }

            let side = if opts.balance && kb > k && lb > l {
                let grow_k = self.core(kb, l)?;
                let grow_l = self.core(k, lb)?;
                side_selection(&grow_k, &grow_l, &small)?
            } else {
                Side::Both
            };
            let (nk, nl) = self.look_ahead(k, l, opts.step, k_cap, l_cap);
            match side {
                Side::A => k = nk,
                Side::B => l = nl,
                Side::Both => {
                    k = nk;
                    l = nl;
                }
            }
        }
    }

    /// `(k + w, l + w)` limited by the budget and by invariant subspaces.
    fn look_ahead(&mut self, k: usize, l: usize, w: usize, k_cap: usize, l_cap: usize) -> (usize, usize) {
        let (rk, rl) = self.reach((k + w).min(k_cap), (l + w).min(l_cap));
        (rk.max(k), rl.max(l))
    }
}

/// Runs the adaptive loop on every rank-one term of `rhs` and combines the results.
pub fn approximate(
    f: &BivariateFunction,
    a: &dyn LinearOperator,
    b: &dyn LinearOperator,
    rhs: &LowRankRhs,
    opts: &DriverOptions,
) -> Result<ApproximationResult> {
    opts.validate()?;
    if rhs.rows() != a.dim() || rhs.cols() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "C is {}x{}, operators are {}x{} and {}x{}",
            rhs.rows(),
            rhs.cols(),
            a.dim(),
            a.dim(),
            b.dim(),
            b.dim()
        )));
    }
    let terms = match opts.rank_split {
        _ if rhs.rank() == 1 => rhs.clone(),
        RankSplit::AsGiven => rhs.clone(),
        RankSplit::Svd => svd_split(rhs)?,
    };
    let mut results = Vec::with_capacity(terms.rank());
    for (i, (c, d)) in terms.left().iter().zip(terms.right()).enumerate() {
        let mut pair = TensorKrylov::new(f, a, b, c, d)?;
        results.push(pair.run(opts, i)?);
    }
    if results.len() == 1 {
        return Ok(results.pop().expect("one term"));
    }
    combine(results)
}

/// `U_k X_{k,l} V_l^T` at prescribed depths (capped at invariant subspaces).
pub fn approximate_fixed(
    f: &BivariateFunction,
    a: &dyn LinearOperator,
    b: &dyn LinearOperator,
    c: &[Complex64],
    d: &[Complex64],
    k: usize,
    l: usize,
) -> Result<ApproximationResult> {
    if k == 0 || l == 0 || k > a.dim() || l > b.dim() {
        return Err(Error::InvalidConfig(format!(
            "depths ({k}, {l}) must lie in 1..={} and 1..={}",
            a.dim(),
            b.dim()
        )));
    }
    let mut pair = TensorKrylov::new(f, a, b, c, d)?;
    let (rk, rl) = pair.reach(k, l);
    let termination = if rk < k || rl < l {
        Termination::Breakdown
    } else {
        Termination::BudgetExhausted
    };
    pair.result(rk, rl, Vec::new(), termination)
}

/// Rewrites `sum c_i d_i^T` as `sum s_i u_i w_i^T` with orthonormal `u_i`, `w_i`
/// (scaled by `sqrt(s_i)` on both sides); numerically zero terms are dropped.
fn svd_split(rhs: &LowRankRhs) -> Result<LowRankRhs> {
    let left = ComplexDenseMatrix::from_columns(rhs.left(), rhs.rows())?;
    let right = ComplexDenseMatrix::from_columns(rhs.right(), rhs.cols())?;
    let (q1, r1) = left.qr_thin();
    let (q2, r2) = right.qr_thin();
    let (w, s, z) = (&r1 * &r2.transpose()).svd_thin()?;
    let qw = &q1 * &w;
    let qz = &q2 * &z.conj();
    let s_max = s.first().copied().unwrap_or(0.0);
    let mut cs = Vec::new();
    let mut ds = Vec::new();
    for (i, &si) in s.iter().enumerate() {
        if si <= 1e-14 * s_max {
            continue;
        }
        let root = si.sqrt();
        cs.push(qw.column(i).into_iter().map(|v| v * root).collect());
        ds.push(qz.column(i).into_iter().map(|v| v * root).collect());
    }
    LowRankRhs::new(cs, ds)
}

/// Concatenates per-term factors and restores orthonormality with two thin QRs.
fn combine(results: Vec<ApproximationResult>) -> Result<ApproximationResult> {
    let us: Vec<&ComplexDenseMatrix> = results.iter().map(|r| &r.u).collect();
    let vs: Vec<&ComplexDenseMatrix> = results.iter().map(|r| &r.v).collect();
    let xs: Vec<&ComplexDenseMatrix> = results.iter().map(|r| &r.x).collect();
    let (qu, ru) = ComplexDenseMatrix::hstack(&us)?.qr_thin();
    let (qv, rv) = ComplexDenseMatrix::hstack(&vs)?.qr_thin();
    let x = &(&ru * &ComplexDenseMatrix::block_diag(&xs)) * &rv.transpose();
    let termination = if results.iter().any(|r| r.termination == Termination::BudgetExhausted) {
        Termination::BudgetExhausted
    } else if results.iter().all(|r| r.termination == Termination::Converged) {
        Termination::Converged
    } else {
        Termination::Breakdown
    };
    let trace = results.iter().flat_map(|r| r.trace.iter().copied()).collect();
    Ok(ApproximationResult {
        u: qu,
        x,
        v: qv,
        trace,
        termination,
    })
}

/// Rank-one convenience wrapper around [`approximate`].
pub fn approximate_rank_one(
    f: &BivariateFunction,
    a: &dyn LinearOperator,
    b: &dyn LinearOperator,
    c: &[Complex64],
    d: &[Complex64],
    opts: &DriverOptions,
) -> Result<ApproximationResult> {
    if vec_norm(c) == 0.0 || vec_norm(d) == 0.0 {
        return Err(Error::ZeroStartVector);
    }
    let rhs = LowRankRhs::rank_one(c.to_vec(), d.to_vec())?;
    approximate(f, a, b, &rhs, opts)
}

/// `||(A + shift I) X + X B^T - C||_F / ||C||_F` for `X = U X_k V^T`, formed
/// through thin QR factors of the low-rank residual rather than densely.
pub fn sylvester_residual(
    shift: Complex64,
    a: &dyn LinearOperator,
    b: &dyn LinearOperator,
    rhs: &LowRankRhs,
    result: &ApproximationResult,
) -> Result<f64> {
    let (u, x, v) = (&result.u, &result.x, &result.v);
    if u.rows() != a.dim() || v.rows() != b.dim() || rhs.rows() != a.dim() || rhs.cols() != b.dim() {
        return Err(Error::DimensionMismatch("residual operands do not match".into()));
    }
    let apply_cols = |op: &dyn LinearOperator, m: &ComplexDenseMatrix| -> Result<ComplexDenseMatrix> {
        let cols: Vec<Vec<Complex64>> = (0..m.cols()).map(|j| op.apply_vec(&m.column(j))).collect();
        ComplexDenseMatrix::from_columns(&cols, m.rows())
    };
    let au = &apply_cols(a, u)? + &u.scale(shift);
    let bv = apply_cols(b, v)?;
    let xt = x.transpose();
    // R = (A + shift) U X V^T + U X (B V)^T - sum c_i d_i^T = P Q^T
    let c_block = ComplexDenseMatrix::from_columns(rhs.left(), rhs.rows())?;
    let d_block = ComplexDenseMatrix::from_columns(rhs.right(), rhs.cols())?.scale(Complex64::new(-1.0, 0.0));
    let p = ComplexDenseMatrix::hstack(&[&au, u, &c_block])?;
    let q = ComplexDenseMatrix::hstack(&[&(v * &xt), &(&bv * &xt), &d_block])?;
    let (_, rp) = p.qr_thin();
    let (_, rq) = q.qr_thin();
    let residual = (&rp * &rq.transpose()).frobenius_norm();
    let (_, rc) = c_block.qr_thin();
    let (_, rd) = d_block.qr_thin();
    Ok(residual / (&rc * &rd.transpose()).frobenius_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::ScalarFunction;
    use crate::kernels::{hadamard_eval, poly_eval_bivariate, PolynomialCoefficients};
    use crate::krylov::{DenseOperator, DiagonalOperator};
    use crate::verify::assembled_difference_norm;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn rel(a: &ComplexDenseMatrix, b: &ComplexDenseMatrix) -> f64 {
        (a - b).frobenius_norm() / b.frobenius_norm()
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexDenseMatrix {
        ComplexDenseMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn low_rank_residual_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let a = random_matrix(9, 9, &mut rng);
        let b = random_matrix(7, 7, &mut rng);
        let (c, d) = (random_vec(9, &mut rng), random_vec(7, &mut rng));
        let (ao, bo) = (DenseOperator::new(a.clone()).unwrap(), DenseOperator::new(b.clone()).unwrap());
        let shift = Complex64::new(12.0, 0.0);
        let f = BivariateFunction::Sylvester { shift };
        let r = approximate_fixed(&f, &ao, &bo, &c, &d, 4, 3).unwrap();
        let rhs = LowRankRhs::rank_one(c.clone(), d.clone()).unwrap();
        let x = r.to_dense();
        let cd = ComplexDenseMatrix::outer(&c, &d).unwrap();
        let dense = &(&(&(&a * &x) + &x.scale(shift)) + &(&x * &b.transpose())) - &cd;
        let expected = dense.frobenius_norm() / cd.frobenius_norm();
        let got = sylvester_residual(shift, &ao, &bo, &rhs, &r).unwrap();
        assert!((got / expected - 1.0).abs() < 1e-10, "{got} vs {expected}");
    }

    #[test]
    fn error_estimate_examples() {
        let x = ComplexDenseMatrix::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(error_estimate(&x, &x.padded(4, 3).unwrap()).unwrap(), 0.0);
        let empty = ComplexDenseMatrix::zeros(0, 0);
        assert_eq!(error_estimate(&empty, &x).unwrap(), x.frobenius_norm());
        assert!(error_estimate(&x.padded(3, 3).unwrap(), &x).is_err());
    }

    #[test]
    fn side_selection_examples() {
        let core = ComplexDenseMatrix::zeros(1, 1);
        let col = |v: f64| ComplexDenseMatrix::from_real_rows(&[&[0.0], &[v]]).unwrap();
        let row = |v: f64| ComplexDenseMatrix::from_real_rows(&[&[0.0, v]]).unwrap();
        assert_eq!(side_selection(&col(1.0), &row(0.5), &core).unwrap(), Side::A);
        assert_eq!(side_selection(&col(0.0), &row(0.0), &core).unwrap(), Side::Both);
        assert_eq!(side_selection(&col(0.3), &row(0.7), &core).unwrap(), Side::B);
    }

    #[test]
    fn estimate_equals_assembled_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let a = DenseOperator::new(random_matrix(30, 30, &mut rng).scale(c(0.3))).unwrap();
        let b = DenseOperator::new(random_matrix(25, 25, &mut rng).scale(c(0.3))).unwrap();
        let (cv, dv) = (random_vec(30, &mut rng), random_vec(25, &mut rng));
        let f = BivariateFunction::SumShift(ScalarFunction::exp());
        let mut pair = TensorKrylov::new(&f, &a, &b, &cv, &dv).unwrap();
        pair.reach(6, 6);
        let small = pair.core(4, 4).unwrap();
        let big = pair.core(6, 6).unwrap();
        let est = error_estimate(&small, &big).unwrap();
        let direct = assembled_difference_norm(
            (&pair.left_basis(6), &big, &pair.right_basis(6)),
            (&pair.left_basis(4), &small, &pair.right_basis(4)),
        )
        .unwrap();
        assert!((est - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn polynomial_exactness_at_degree_plus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let am = random_matrix(20, 20, &mut rng);
        let bm = random_matrix(15, 15, &mut rng);
        let grid: Vec<Vec<Complex64>> = (0..3).map(|_| random_vec(3, &mut rng)).collect();
        let p = PolynomialCoefficients::new(grid).unwrap();
        let (cv, dv) = (random_vec(20, &mut rng), random_vec(15, &mut rng));
        let (a, b) = (DenseOperator::new(am.clone()).unwrap(), DenseOperator::new(bm.clone()).unwrap());
        let r = approximate_fixed(&BivariateFunction::Polynomial(p.clone()), &a, &b, &cv, &dv, 3, 3).unwrap();
        let exact = poly_eval_bivariate(&p, &am, &bm, &ComplexDenseMatrix::outer(&cv, &dv).unwrap()).unwrap();
        assert!(rel(&r.to_dense(), &exact) <= 1e-10);
    }

    #[test]
    fn full_space_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let am = random_matrix(12, 12, &mut rng).scale(c(0.5));
        let bm = random_matrix(9, 9, &mut rng).scale(c(0.5));
        let (cv, dv) = (random_vec(12, &mut rng), random_vec(9, &mut rng));
        let (a, b) = (DenseOperator::new(am.clone()).unwrap(), DenseOperator::new(bm.clone()).unwrap());
        let f = BivariateFunction::SumShift(ScalarFunction::exp());
        let r = approximate_fixed(&f, &a, &b, &cv, &dv, 12, 9).unwrap();
        let exact = hadamard_eval(&f, &am, &bm, &ComplexDenseMatrix::outer(&cv, &dv).unwrap()).unwrap();
        assert!(rel(&r.to_dense(), &exact) <= 1e-8);
    }

    #[test]
    fn adaptive_sylvester_converges() {
        let spectrum: Vec<f64> = (0..200).map(|i| 0.1 + 99.9 * i as f64 / 199.0).collect();
        let a = DiagonalOperator::from_real(&spectrum);
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let cv: Vec<Complex64> = (0..200).map(|_| c(rng.random_range(-1.0..1.0))).collect();
        let opts = DriverOptions { tol: 1e-8, ..Default::default() };
        let r = approximate_rank_one(&BivariateFunction::sylvester(), &a, &a, &cv, &cv, &opts).unwrap();
        assert_eq!(r.termination, Termination::Converged);
        let x = r.to_dense();
        let am = a.to_dense();
        let rhs = ComplexDenseMatrix::outer(&cv, &cv).unwrap();
        let residual = &(&(&am * &x) + &(&x * &am)) - &rhs;
        assert!(residual.frobenius_norm() <= 1e-6 * rhs.frobenius_norm());
        assert!((&(&r.u.adjoint() * &r.u) - &ComplexDenseMatrix::identity(r.k())).frobenius_norm() <= 1e-12);
    }

    #[test]
    fn breakdown_and_budget() {
        let a = DiagonalOperator::from_real(&[-1.0, -2.0, -3.0, -1.0, -2.0, -3.0]);
        let cv = vec![c(1.0); 6];
        let f = BivariateFunction::time_limited(0.0, 1.0).unwrap();
        let r = approximate_rank_one(&f, &a, &a, &cv, &cv, &DriverOptions { tol: 0.0, ..Default::default() }).unwrap();
        assert_eq!(r.termination, Termination::Breakdown);
        assert_eq!((r.k(), r.l()), (3, 3));
        let exact = hadamard_eval(&f, &a.to_dense(), &a.to_dense(), &ComplexDenseMatrix::outer(&cv, &cv).unwrap()).unwrap();
        assert!(rel(&r.to_dense(), &exact) <= 1e-12);

        let big = DiagonalOperator::from_real(&(1..=100).map(|i| -(i as f64)).collect::<Vec<_>>());
        let cv = vec![c(1.0); 100];
        let opts = DriverOptions { tol: 1e-14, k_max: 2, l_max: 2, ..Default::default() };
        let r = approximate_rank_one(&f, &big, &big, &cv, &cv, &opts).unwrap();
        assert_eq!(r.termination, Termination::BudgetExhausted);
        assert_eq!((r.k(), r.l()), (2, 2));
    }

    #[test]
    fn balanced_growth_freezes_invariant_side() {
        let a = DiagonalOperator::from_real(&(1..=60).map(|i| -(i as f64) * 0.5).collect::<Vec<_>>());
        let b = DiagonalOperator::from_real(&[-1.0, -2.0]);
        let cv = vec![c(1.0); 60];
        let dv = vec![c(1.0); 2];
        let f = BivariateFunction::time_limited(0.0, f64::INFINITY).unwrap();
        let opts = DriverOptions { tol: 1e-10, balance: true, ..Default::default() };
        let r = approximate_rank_one(&f, &a, &b, &cv, &dv, &opts).unwrap();
        assert_eq!(r.termination, Termination::Converged);
        assert_eq!(r.l(), 2);
        let exact = hadamard_eval(&f, &a.to_dense(), &b.to_dense(), &ComplexDenseMatrix::outer(&cv, &dv).unwrap()).unwrap();
        assert!(rel(&r.to_dense(), &exact) <= 1e-7);
    }

    #[test]
    fn stored_states_reproduce_cores_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let a = DenseOperator::new(random_matrix(20, 20, &mut rng).scale(c(0.2))).unwrap();
        let (cv, dv) = (random_vec(20, &mut rng), random_vec(20, &mut rng));
        let f = BivariateFunction::Stein;
        let mut pair = TensorKrylov::new(&f, &a, &a, &cv, &dv).unwrap();
        pair.reach(5, 4);
        let cached = pair.core(5, 4).unwrap();
        assert_eq!(*cached, pair.evaluate(5, 4).unwrap());
    }

    #[test]
    fn rank_two_split_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let spectrum: Vec<f64> = (0..40).map(|i| -0.5 - i as f64 * 0.25).collect();
        let a = DiagonalOperator::from_real(&spectrum);
        let rhs = LowRankRhs::new(
            vec![random_vec(40, &mut rng), random_vec(40, &mut rng)],
            vec![random_vec(40, &mut rng), random_vec(40, &mut rng)],
        )
        .unwrap();
        let f = BivariateFunction::time_limited(0.0, f64::INFINITY).unwrap();
        let r = approximate(&f, &a, &a, &rhs, &DriverOptions { tol: 1e-12, ..Default::default() }).unwrap();
        let ad = a.to_dense();
        let exact = hadamard_eval(&f, &ad, &ad, &rhs.to_dense()).unwrap();
        assert!(rel(&r.to_dense(), &exact) <= 1e-9);
        assert!((&(&r.v.adjoint() * &r.v) - &ComplexDenseMatrix::identity(r.l())).frobenius_norm() <= 1e-12);
        assert!(r.trace.iter().any(|t| t.term == 1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn rank_additivity(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DenseOperator::new(random_matrix(25, 25, &mut rng).scale(c(0.2))).unwrap();
            let b = DenseOperator::new(random_matrix(18, 18, &mut rng).scale(c(0.2))).unwrap();
            let (c1, c2) = (random_vec(25, &mut rng), random_vec(25, &mut rng));
            let (d1, d2) = (random_vec(18, &mut rng), random_vec(18, &mut rng));
            let f = BivariateFunction::SumShift(ScalarFunction::exp());
            let opts = DriverOptions { tol: 1e-9, rank_split: RankSplit::AsGiven, ..Default::default() };
            let rhs = LowRankRhs::new(vec![c1.clone(), c2.clone()], vec![d1.clone(), d2.clone()]).unwrap();
            let both = approximate(&f, &a, &b, &rhs, &opts).unwrap().to_dense();
            let one = approximate_rank_one(&f, &a, &b, &c1, &d1, &opts).unwrap().to_dense();
            let two = approximate_rank_one(&f, &a, &b, &c2, &d2, &opts).unwrap().to_dense();
            let sum = &one + &two;
            prop_assert!(rel(&both, &sum) <= 1e-12, "{:e}", rel(&both, &sum));
        }

        #[test]
        fn estimates_match_assembled_differences(seed in any::<u64>(), k in 2usize..8, l in 2usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DenseOperator::new(random_matrix(24, 24, &mut rng).scale(c(0.25))).unwrap();
            let b = DenseOperator::new(random_matrix(20, 20, &mut rng).scale(c(0.25))).unwrap();
            let (cv, dv) = (random_vec(24, &mut rng), random_vec(20, &mut rng));
            let f = BivariateFunction::Sylvester { shift: c(5.0) };
            let mut pair = TensorKrylov::new(&f, &a, &b, &cv, &dv).unwrap();
            pair.reach(k + 2, l + 2);
            let (small, big) = (pair.core(k, l).unwrap(), pair.core(k + 2, l + 2).unwrap());
            let est = error_estimate(&small, &big).unwrap();
            let direct = assembled_difference_norm(
                (&pair.left_basis(k + 2), &big, &pair.right_basis(l + 2)),
                (&pair.left_basis(k), &small, &pair.right_basis(l)),
            )
            .unwrap();
            prop_assert!((est - direct).abs() <= 1e-12 * direct, "k={} l={} est={:e} direct={:e}", k, l, est, direct);
        }
    }
}
