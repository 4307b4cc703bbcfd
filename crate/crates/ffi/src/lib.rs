//! C interface to `bivkrylov`.
//!
//! Every fallible call returns a [`BkStatus`]; on failure the message is kept
//! per thread and can be read with [`bk_last_error_message`]. Objects are
//! opaque handles owned by the caller and released with their `*_free`
//! function. Matrices cross the boundary column-major, complex entries as
//! [`BkComplex`] pairs.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bivkrylov::bounds::{bernstein_rate, phi_bound, SpectralInterval};
use bivkrylov::dense::{ComplexDenseMatrix, ScalarFunction};
use bivkrylov::driver::{approximate, sylvester_residual, ApproximationResult, DriverOptions, Termination};
use bivkrylov::frechet::frechet_apply;
use bivkrylov::io::{read_matrix_market, MatrixData};
use bivkrylov::kernels::{BivariateFunction, LowRankRhs};
use bivkrylov::krylov::{DenseOperator, LinearOperator, SparseOperator};
use bivkrylov::{Complex64, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    /// Evaluation failed: pole, undefined value, non-diagonalizable core, non-finite input.
    Numerical = 4,
    Geometry = 5,
    Parse = 6,
    Io = 7,
    /// A Rust panic was caught at the boundary.
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BkTermination {
    Converged = 0,
    BudgetExhausted = 1,
    Breakdown = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BkFactor {
    U = 0,
    X = 1,
    V = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BkComplex {
    pub re: f64,
    pub im: f64,
}

/// Driver settings; start from [`bk_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BkOptions {
    pub tol: f64,
    pub h: usize,
    pub k_max: usize,
    pub l_max: usize,
    pub step: usize,
    pub balance: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BkTraceEntry {
    pub term: usize,
    pub k: usize,
    pub l: usize,
    pub estimate: f64,
}

/// Square or rectangular matrix; square coordinate files stay sparse.
pub struct BkMatrix {
    data: MatrixData,
}

/// Parsed bivariate function.
pub struct BkFunction {
    f: BivariateFunction,
}

/// `U X V^T` with its convergence trace.
pub struct BkResult {
    result: ApproximationResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(BkStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidConfig(_) | Error::OutOfRegime { .. } => BkStatus::InvalidArgument,
            Error::ShapeMismatch(_) | Error::DimensionMismatch(_) | Error::DimensionExceeded { .. } => {
                BkStatus::DimensionMismatch
            }
            Error::DegenerateGeometry(_) | Error::UnsupportedGeometry(_) | Error::SingularityInsideInterval(_) => {
                BkStatus::Geometry
            }
            Error::Parse { .. } => BkStatus::Parse,
            Error::Io(_) => BkStatus::Io,
            _ => BkStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(BkStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `body`, converting errors and panics into a status and the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> BkStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => BkStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {message}"));
            BkStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(BkStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn complex(v: &[BkComplex]) -> Vec<Complex64> {
    v.iter().map(|z| Complex64::new(z.re, z.im)).collect()
}

fn to_c(z: Complex64) -> BkComplex {
    BkComplex { re: z.re, im: z.im }
}

fn operator(data: &MatrixData) -> Result<Box<dyn LinearOperator>, Failure> {
    let (r, c) = data.shape();
    if r != c {
        return Err(Failure(BkStatus::DimensionMismatch, format!("operator must be square, got {r}x{c}")));
    }
    Ok(match data {
        MatrixData::Dense(m) => Box::new(DenseOperator::new(m.clone())?),
        MatrixData::Sparse(s) => Box::new(s.clone()),
    })
}

fn transposed(data: &MatrixData) -> Result<Box<dyn LinearOperator>, Failure> {
    operator(&match data {
        MatrixData::Dense(m) => MatrixData::Dense(m.transpose()),
        MatrixData::Sparse(s) => MatrixData::Sparse(SparseOperator::transpose(s)),
    })
}

impl From<BkOptions> for DriverOptions {
    fn from(o: BkOptions) -> Self {
        DriverOptions {
            tol: o.tol,
            h: o.h,
            k_max: o.k_max,
            l_max: o.l_max,
            step: o.step,
            balance: o.balance,
            ..DriverOptions::default()
        }
    }
}

unsafe fn options(p: *const BkOptions) -> DriverOptions {
    p.as_ref().map_or_else(DriverOptions::default, |o| (*o).into())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn bk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the calling thread's last error message, without the nul; 0 if none.
#[no_mangle]
pub extern "C" fn bk_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |s| s.as_bytes().len()))
}

/// Copies the last error message into `buf` (truncated, always nul-terminated when
/// `len > 0`). Returns the full message length excluding the nul.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn bk_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[][..], |s| s.as_bytes());
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

#[no_mangle]
pub extern "C" fn bk_options_default() -> BkOptions {
    let d = DriverOptions::default();
    BkOptions {
        tol: d.tol,
        h: d.h,
        k_max: d.k_max,
        l_max: d.l_max,
        step: d.step,
        balance: d.balance,
    }
}

/// Real `rows x cols` matrix from column-major `data`.
///
/// # Safety
/// `data` must hold `rows * cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bk_matrix_from_real(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut BkMatrix,
) -> BkStatus {
    guard(|| {
        let v = slice(data, rows * cols, "data")?;
        let m = ComplexDenseMatrix::try_from_fn(rows, cols, |i, j| Complex64::new(v[j * rows + i], 0.0))?;
        emit(out, BkMatrix { data: MatrixData::Dense(m) })
    })
}

/// Complex `rows x cols` matrix from column-major `data`.
///
/// # Safety
/// `data` must hold `rows * cols` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bk_matrix_from_complex(
    rows: usize,
    cols: usize,
    data: *const BkComplex,
    out: *mut *mut BkMatrix,
) -> BkStatus {
    guard(|| {
        let v = slice(data, rows * cols, "data")?;
        let m = ComplexDenseMatrix::try_from_fn(rows, cols, |i, j| {
            let z = v[j * rows + i];
            Complex64::new(z.re, z.im)
        })?;
        emit(out, BkMatrix { data: MatrixData::Dense(m) })
    })
}

/// Reads a Matrix Market file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bk_matrix_read(path: *const c_char, out: *mut *mut BkMatrix) -> BkStatus {
    guard(|| {
        let data = read_matrix_market(text(path, "path")?)?;
        emit(out, BkMatrix { data })
    })
}

/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn bk_matrix_rows(m: *const BkMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.data.shape().0)
}

/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn bk_matrix_cols(m: *const BkMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.data.shape().1)
}

/// # Safety
/// `m` must come from a `bk_matrix_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bk_matrix_free(m: *mut BkMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Parses a function spec such as `sylvester`, `stein`, `time-limited:0:1` or `divdiff:exp`.
///
/// # Safety
/// `spec` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bk_function_parse(spec: *const c_char, out: *mut *mut BkFunction) -> BkStatus {
    guard(|| {
        let f = BivariateFunction::parse(text(spec, "spec")?)?;
        emit(out, BkFunction { f })
    })
}

/// # Safety
/// `f` must come from [`bk_function_parse`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bk_function_free(f: *mut BkFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Approximates `f{A,B}(c d^T)`. `b` may be null to reuse `a`; `opts` may be
/// null for defaults. `c` has `a`'s dimension, `d` has `b`'s.
///
/// # Safety
/// Handles must be live; `c`, `d` must hold `c_len`, `d_len` entries.
#[no_mangle]
pub unsafe extern "C" fn bk_solve(
    f: *const BkFunction,
    a: *const BkMatrix,
    b: *const BkMatrix,
    c: *const BkComplex,
    c_len: usize,
    d: *const BkComplex,
    d_len: usize,
    opts: *const BkOptions,
    out: *mut *mut BkResult,
) -> BkStatus {
    guard(|| {
        let f = handle(f, "f")?;
        let a = handle(a, "a")?;
        let b = if b.is_null() { a } else { &*b };
        let (ao, bo) = (operator(&a.data)?, operator(&b.data)?);
        let c = complex(slice(c, c_len, "c")?);
        let d = complex(slice(d, d_len, "d")?);
        let rhs = LowRankRhs::rank_one(c, d)?;
        let result = approximate(&f.f, &*ao, &*bo, &rhs, &options(opts))?;
        emit(out, BkResult { result })
    })
}

/// Fréchet derivative `Df{A}(c d^T)` of the scalar function `name`
/// (`exp`, `sqrt-neg`, `phi`, `cos`, `pow:N`, `inv-shift:A`).
///
/// # Safety
/// `name` must be nul-terminated, `a` live, `c` and `d` hold `len` entries each.
#[no_mangle]
pub unsafe extern "C" fn bk_frechet(
    name: *const c_char,
    a: *const BkMatrix,
    c: *const BkComplex,
    d: *const BkComplex,
    len: usize,
    opts: *const BkOptions,
    out: *mut *mut BkResult,
) -> BkStatus {
    guard(|| {
        let f = ScalarFunction::parse(text(name, "name")?)?;
        let a = handle(a, "a")?;
        let (ao, at) = (operator(&a.data)?, transposed(&a.data)?);
        let c = complex(slice(c, len, "c")?);
        let d = complex(slice(d, len, "d")?);
        let result = frechet_apply(&f, &*ao, &*at, &c, &d, &options(opts))?;
        emit(out, BkResult { result })
    })
}

/// `||(A + shift I) X + X B^T - c d^T||_F / ||c d^T||_F` for a Sylvester result.
///
/// # Safety
/// As for [`bk_solve`]; `residual` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bk_sylvester_residual(
    r: *const BkResult,
    shift: BkComplex,
    a: *const BkMatrix,
    b: *const BkMatrix,
    c: *const BkComplex,
    c_len: usize,
    d: *const BkComplex,
    d_len: usize,
    residual: *mut f64,
) -> BkStatus {
    guard(|| {
        let r = handle(r, "r")?;
        let a = handle(a, "a")?;
        let b = if b.is_null() { a } else { &*b };
        let rhs = LowRankRhs::rank_one(complex(slice(c, c_len, "c")?), complex(slice(d, d_len, "d")?))?;
        let value = sylvester_residual(
            Complex64::new(shift.re, shift.im),
            &*operator(&a.data)?,
            &*operator(&b.data)?,
            &rhs,
            &r.result,
        )?;
        *residual.as_mut().ok_or_else(|| null("residual"))? = value;
        Ok(())
    })
}

/// # Safety
/// `r` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn bk_result_k(r: *const BkResult) -> usize {
    r.as_ref().map_or(0, |r| r.result.k())
}

/// # Safety
/// `r` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn bk_result_l(r: *const BkResult) -> usize {
    r.as_ref().map_or(0, |r| r.result.l())
}

/// # Safety
/// `r` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bk_result_termination(r: *const BkResult, out: *mut BkTermination) -> BkStatus {
    guard(|| {
        let t = match handle(r, "r")?.result.termination {
            Termination::Converged => BkTermination::Converged,
            Termination::BudgetExhausted => BkTermination::BudgetExhausted,
            Termination::Breakdown => BkTermination::Breakdown,
        };
        *out.as_mut().ok_or_else(|| null("out"))? = t;
        Ok(())
    })
}

/// # Safety
/// `r` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn bk_result_trace_len(r: *const BkResult) -> usize {
    r.as_ref().map_or(0, |r| r.result.trace.len())
}

/// # Safety
/// `r` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bk_result_trace_entry(r: *const BkResult, i: usize, out: *mut BkTraceEntry) -> BkStatus {
    guard(|| {
        let trace = &handle(r, "r")?.result.trace;
        let e = trace.get(i).ok_or_else(|| {
            Failure(BkStatus::InvalidArgument, format!("trace index {i} out of range (length {})", trace.len()))
        })?;
        *out.as_mut().ok_or_else(|| null("out"))? = BkTraceEntry { term: e.term, k: e.k, l: e.l, estimate: e.estimate };
        Ok(())
    })
}

/// Shape of factor `which`, written to `rows` and `cols`.
///
/// # Safety
/// `r` must be a live handle; `rows`, `cols` writable.
#[no_mangle]
pub unsafe extern "C" fn bk_result_factor_shape(
    r: *const BkResult,
    which: BkFactor,
    rows: *mut usize,
    cols: *mut usize,
) -> BkStatus {
    guard(|| {
        let (m, n) = factor(&handle(r, "r")?.result, which).shape();
        *rows.as_mut().ok_or_else(|| null("rows"))? = m;
        *cols.as_mut().ok_or_else(|| null("cols"))? = n;
        Ok(())
    })
}

fn factor(r: &ApproximationResult, which: BkFactor) -> &ComplexDenseMatrix {
    match which {
        BkFactor::U => &r.u,
        BkFactor::X => &r.x,
        BkFactor::V => &r.v,
    }
}

fn copy_column_major(m: &ComplexDenseMatrix, out: &mut [BkComplex]) -> Result<(), Failure> {
    let (rows, cols) = m.shape();
    if out.len() != rows * cols {
        return Err(Failure(
            BkStatus::DimensionMismatch,
            format!("buffer holds {} entries, matrix is {rows}x{cols}", out.len()),
        ));
    }
    for j in 0..cols {
        for i in 0..rows {
            out[j * rows + i] = to_c(m.get(i, j));
        }
    }
    Ok(())
}

/// Copies factor `which` column-major into `out`, which must hold exactly rows * cols entries.
///
/// # Safety
/// `r` must be a live handle; `out` valid for `len` entries.
#[no_mangle]
pub unsafe extern "C" fn bk_result_copy_factor(
    r: *const BkResult,
    which: BkFactor,
    out: *mut BkComplex,
    len: usize,
) -> BkStatus {
    guard(|| copy_column_major(factor(&handle(r, "r")?.result, which), out_slice(out, len, "out")?))
}

/// Copies the assembled `U X V^T` column-major into `out` (`m * n` entries).
///
/// # Safety
/// `r` must be a live handle; `out` valid for `len` entries.
#[no_mangle]
pub unsafe extern "C" fn bk_result_copy_dense(r: *const BkResult, out: *mut BkComplex, len: usize) -> BkStatus {
    guard(|| copy_column_major(&handle(r, "r")?.result.to_dense(), out_slice(out, len, "out")?))
}

/// `y = (U X V^T) w` without forming the product.
///
/// # Safety
/// `r` must be a live handle; `w` holds `n` entries and `y` room for `m`.
#[no_mangle]
pub unsafe extern "C" fn bk_result_apply(
    r: *const BkResult,
    w: *const BkComplex,
    w_len: usize,
    y: *mut BkComplex,
    y_len: usize,
) -> BkStatus {
    guard(|| {
        let r = &handle(r, "r")?.result;
        let (m, n) = (r.u.rows(), r.v.rows());
        if w_len != n || y_len != m {
            return Err(Failure(
                BkStatus::DimensionMismatch,
                format!("result is {m}x{n}, got w of length {w_len} and y of length {y_len}"),
            ));
        }
        let v = r.apply(&complex(slice(w, w_len, "w")?));
        for (dst, src) in out_slice(y, y_len, "y")?.iter_mut().zip(v) {
            *dst = to_c(src);
        }
        Ok(())
    })
}

/// # Safety
/// `r` must come from [`bk_solve`] or [`bk_frechet`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bk_result_free(r: *mut BkResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// A-priori bound on the degree `k - 1` polynomial approximation error of phi on `[-4 rho, 0]`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bk_phi_bound(k: usize, rho: f64, out: *mut f64) -> BkStatus {
    guard(|| {
        let v = phi_bound(k, rho)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Bernstein ellipse rate for `[lo, hi]` and a singularity.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bk_bernstein_rate(lo: f64, hi: f64, singularity: BkComplex, out: *mut f64) -> BkStatus {
    guard(|| {
        let iv = SpectralInterval::new(lo, hi)?;
        let v = bernstein_rate(&iv, Complex64::new(singularity.re, singularity.im))?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}
