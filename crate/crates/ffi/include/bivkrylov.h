#ifndef BIVKRYLOV_H
#define BIVKRYLOV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  BK_STATUS_OK = 0,
  BK_STATUS_NULL_POINTER = 1,
  BK_STATUS_INVALID_ARGUMENT = 2,
  BK_STATUS_DIMENSION_MISMATCH = 3,
  /**
   * Evaluation failed: pole, undefined value, non-diagonalizable core, non-finite input.
   */
  BK_STATUS_NUMERICAL = 4,
  BK_STATUS_GEOMETRY = 5,
  BK_STATUS_PARSE = 6,
  BK_STATUS_IO = 7,
  /**
   * A Rust panic was caught at the boundary.
   */
  BK_STATUS_INTERNAL = 8,
} BkStatus;

typedef enum {
  BK_TERMINATION_CONVERGED = 0,
  BK_TERMINATION_BUDGET_EXHAUSTED = 1,
  BK_TERMINATION_BREAKDOWN = 2,
} BkTermination;

typedef enum {
  BK_FACTOR_U = 0,
  BK_FACTOR_X = 1,
  BK_FACTOR_V = 2,
} BkFactor;

/**
 * Parsed bivariate function.
 */
typedef struct BkFunction BkFunction;

/**
 * Square or rectangular matrix; square coordinate files stay sparse.
 */
typedef struct BkMatrix BkMatrix;

/**
 * `U X V^T` with its convergence trace.
 */
typedef struct BkResult BkResult;

/**
 * Driver settings; start from [`bk_options_default`].
 */
typedef struct {
  double tol;
  size_t h;
  size_t k_max;
  size_t l_max;
  size_t step;
  bool balance;
} BkOptions;

typedef struct {
  double re;
  double im;
} BkComplex;

typedef struct {
  size_t term;
  size_t k;
  size_t l;
  double estimate;
} BkTraceEntry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static nul-terminated string.
 */
const char *bk_version(void);

/**
 * Length in bytes of the calling thread's last error message, without the nul; 0 if none.
 */
size_t bk_last_error_length(void);

/**
 * Copies the last error message into `buf` (truncated, always nul-terminated when
 * `len > 0`). Returns the full message length excluding the nul.
 *
 * # Safety
 * `buf` must be valid for `len` bytes or null with `len == 0`.
 */
size_t bk_last_error_message(char *buf, size_t len);

BkOptions bk_options_default(void);

/**
 * Real `rows x cols` matrix from column-major `data`.
 *
 * # Safety
 * `data` must hold `rows * cols` doubles; `out` must be writable.
 */
BkStatus bk_matrix_from_real(size_t rows, size_t cols, const double *data, BkMatrix **out);

/**
 * Complex `rows x cols` matrix from column-major `data`.
 *
 * # Safety
 * `data` must hold `rows * cols` entries; `out` must be writable.
 */
BkStatus bk_matrix_from_complex(size_t rows, size_t cols, const BkComplex *data, BkMatrix **out);

/**
 * Reads a Matrix Market file.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
BkStatus bk_matrix_read(const char *path, BkMatrix **out);

/**
 * # Safety
 * `m` must be a live handle or null.
 */
size_t bk_matrix_rows(const BkMatrix *m);

/**
 * # Safety
 * `m` must be a live handle or null.
 */
size_t bk_matrix_cols(const BkMatrix *m);

/**
 * # Safety
 * `m` must come from a `bk_matrix_*` constructor and not be used afterwards.
 */
void bk_matrix_free(BkMatrix *m);

/**
 * Parses a function spec such as `sylvester`, `stein`, `time-limited:0:1` or `divdiff:exp`.
 *
 * # Safety
 * `spec` must be a nul-terminated string; `out` must be writable.
 */
BkStatus bk_function_parse(const char *spec, BkFunction **out);

/**
 * # Safety
 * `f` must come from [`bk_function_parse`] and not be used afterwards.
 */
void bk_function_free(BkFunction *f);

/**
 * Approximates `f{A,B}(c d^T)`. `b` may be null to reuse `a`; `opts` may be
 * null for defaults. `c` has `a`'s dimension, `d` has `b`'s.
 *
 * # Safety
 * Handles must be live; `c`, `d` must hold `c_len`, `d_len` entries.
 */
BkStatus bk_solve(const BkFunction *f,
                  const BkMatrix *a,
                  const BkMatrix *b,
                  const BkComplex *c,
                  size_t c_len,
                  const BkComplex *d,
                  size_t d_len,
                  const BkOptions *opts,
                  BkResult **out);

/**
 * Fréchet derivative `Df{A}(c d^T)` of the scalar function `name`
 * (`exp`, `sqrt-neg`, `phi`, `cos`, `pow:N`, `inv-shift:A`).
 *
 * # Safety
 * `name` must be nul-terminated, `a` live, `c` and `d` hold `len` entries each.
 */
BkStatus bk_frechet(const char *name,
                    const BkMatrix *a,
                    const BkComplex *c,
                    const BkComplex *d,
                    size_t len,
                    const BkOptions *opts,
                    BkResult **out);

/**
 * `||(A + shift I) X + X B^T - c d^T||_F / ||c d^T||_F` for a Sylvester result.
 *
 * # Safety
 * As for [`bk_solve`]; `residual` must be writable.
 */
BkStatus bk_sylvester_residual(const BkResult *r,
                               BkComplex shift,
                               const BkMatrix *a,
                               const BkMatrix *b,
                               const BkComplex *c,
                               size_t c_len,
                               const BkComplex *d,
                               size_t d_len,
                               double *residual);

/**
 * # Safety
 * `r` must be a live handle or null.
 */
size_t bk_result_k(const BkResult *r);

/**
 * # Safety
 * `r` must be a live handle or null.
 */
size_t bk_result_l(const BkResult *r);

/**
 * # Safety
 * `r` must be a live handle.
 */
BkStatus bk_result_termination(const BkResult *r, BkTermination *out);

/**
 * # Safety
 * `r` must be a live handle or null.
 */
size_t bk_result_trace_len(const BkResult *r);

/**
 * # Safety
 * `r` must be a live handle; `out` writable.
 */
BkStatus bk_result_trace_entry(const BkResult *r, size_t i, BkTraceEntry *out);

/**
 * Shape of factor `which`, written to `rows` and `cols`.
 *
 * # Safety
 * `r` must be a live handle; `rows`, `cols` writable.
 */
BkStatus bk_result_factor_shape(const BkResult *r, BkFactor which, size_t *rows, size_t *cols);

/**
 * Copies factor `which` column-major into `out`, which must hold exactly rows * cols entries.
 *
 * # Safety
 * `r` must be a live handle; `out` valid for `len` entries.
 */
BkStatus bk_result_copy_factor(const BkResult *r, BkFactor which, BkComplex *out, size_t len);

/**
 * Copies the assembled `U X V^T` column-major into `out` (`m * n` entries).
 *
 * # Safety
 * `r` must be a live handle; `out` valid for `len` entries.
 */
BkStatus bk_result_copy_dense(const BkResult *r, BkComplex *out, size_t len);

/**
 * `y = (U X V^T) w` without forming the product.
 *
 * # Safety
 * `r` must be a live handle; `w` holds `n` entries and `y` room for `m`.
 */
BkStatus bk_result_apply(const BkResult *r,
                         const BkComplex *w,
                         size_t w_len,
                         BkComplex *y,
                         size_t y_len);

/**
 * # Safety
 * `r` must come from [`bk_solve`] or [`bk_frechet`] and not be used afterwards.
 */
void bk_result_free(BkResult *r);

/**
 * A-priori bound on the degree `k - 1` polynomial approximation error of phi on `[-4 rho, 0]`.
 *
 * # Safety
 * `out` must be writable.
 */
BkStatus bk_phi_bound(size_t k, double rho, double *out);

/**
 * Bernstein ellipse rate for `[lo, hi]` and a singularity.
 *
 * # Safety
 * `out` must be writable.
 */
BkStatus bk_bernstein_rate(double lo, double hi, BkComplex singularity, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BIVKRYLOV_H */
