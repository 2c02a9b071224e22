#ifndef WFL_H
#define WFL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum WflStatus {
  WFL_STATUS_OK = 0,
  WFL_STATUS_NULL_POINTER = 1,
  WFL_STATUS_INVALID_UTF8 = 2,
  WFL_STATUS_DOMAIN = 3,
  WFL_STATUS_CONSTRUCTION = 4,
  WFL_STATUS_CONFIG = 5,
  WFL_STATUS_IO = 6,
  WFL_STATUS_JSON = 7,
  WFL_STATUS_PANIC = 8,
} WflStatus;

/**
 * Test function `f`.
 */
typedef struct WflFunction WflFunction;

/**
 * Bivariate grid function for the averaging map.
 */
typedef struct WflGrid WflGrid;

/**
 * Sampled homeomorphism on a dyadic grid.
 */
typedef struct WflHomeo WflHomeo;

/**
 * Summary of a statistical check.
 */
typedef struct WflCheckResult {
  double statistic;
  double threshold;
  bool pass;
  uint64_t n_samples;
  uint64_t seed;
} WflCheckResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` as a
 * NUL-terminated string, truncating to `len - 1` bytes, and returns the full
 * message length in bytes (0 when the last call succeeded).
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t wfl_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *wfl_version(void);

/**
 * Dirichlet kernel `D_n(x) = sin((2n+1) pi x) / sin(pi x)`, with `2n+1` at integers.
 */
double wfl_dirichlet(uint32_t n, double x);

/**
 * Samples a homeomorphism on the grid of mesh `2^-depth` from `seed`.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle to free
 * with [`wfl_homeo_free`].
 */
enum WflStatus wfl_homeo_sample(uint64_t seed, uint32_t depth, struct WflHomeo **out);

/**
 * # Safety
 * `h` must be null or a handle from [`wfl_homeo_sample`] not yet freed.
 */
void wfl_homeo_free(struct WflHomeo *h);

/**
 * Number of grid values, `2^depth + 1`; 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t wfl_homeo_len(const struct WflHomeo *h);

/**
 * Copies up to `len` grid values into `buf`.
 *
 * # Safety
 * `h` must be a live handle and `buf` must point to `len` writable doubles.
 */
enum WflStatus wfl_homeo_values(const struct WflHomeo *h, double *buf, size_t len);

/**
 * `phi(x)` by linear interpolation of the grid.
 *
 * # Safety
 * `h` must be a live handle and `out` a valid pointer.
 */
enum WflStatus wfl_homeo_eval(const struct WflHomeo *h, double x, double *out);

/**
 * `phi^-1(y)` of the interpolated map.
 *
 * # Safety
 * `h` must be a live handle and `out` a valid pointer.
 */
enum WflStatus wfl_homeo_invert(const struct WflHomeo *h, double y, double *out);

/**
 * Parses a test function from JSON, e.g. `{"variant":"constant","c":1}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer; on
 * success `*out` must be released with [`wfl_function_free`].
 */
enum WflStatus wfl_function_from_json(const char *json, struct WflFunction **out);

/**
 * Parses a test function in the command-line syntax (`sin:1`, `osc:3:2`,
 * `counterexample:3,4,5:6`, JSON or `@file`).
 *
 * # Safety
 * As for [`wfl_function_from_json`].
 */
enum WflStatus wfl_function_parse(const char *spec, struct WflFunction **out);

/**
 * # Safety
 * `f` must be null or a live function handle.
 */
void wfl_function_free(struct WflFunction *f);

/**
 * `f(t)`.
 *
 * # Safety
 * `f` must be a live handle and `out` a valid pointer.
 */
enum WflStatus wfl_function_eval(const struct WflFunction *f, double t, double *out);

/**
 * `sup |f|`.
 *
 * # Safety
 * `f` must be a live handle and `out` a valid pointer.
 */
enum WflStatus wfl_function_sup_norm(const struct WflFunction *f, double *out);

/**
 * `S_n(f o phi; x)`, or `S_n(f; x)` when `phi` is null, by composite
 * Simpson quadrature with `points_per_oscillation` nodes per kernel lobe.
 *
 * # Safety
 * `f` must be a live handle, `phi` null or a live handle, `out` valid.
 */
enum WflStatus wfl_partial_sum(const struct WflFunction *f,
                               const struct WflHomeo *phi,
                               uint32_t n,
                               double x,
                               uint32_t points_per_oscillation,
                               double *out);

/**
 * KS check of `phi(2^-i)` against its law; a NaN threshold selects the 1% critical value.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum WflStatus wfl_check_dyadic_law(uint32_t i,
                                    size_t samples,
                                    uint64_t seed,
                                    double threshold,
                                    struct WflCheckResult *out);

/**
 * First-passage check: `P(first chain value below y is below x) = x / y`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum WflStatus wfl_check_first_passage(double x,
                                       double y,
                                       size_t samples,
                                       uint64_t seed,
                                       struct WflCheckResult *out);

/**
 * KS check of `phi(1/2)` given `phi(1/4) = y`; NaN threshold as above.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum WflStatus wfl_check_conditional(double y,
                                     size_t samples,
                                     uint64_t seed,
                                     double threshold,
                                     struct WflCheckResult *out);

/**
 * Constant grid `p = c` off the diagonal on `m` cells.
 *
 * # Safety
 * `out` must be a valid pointer; release `*out` with [`wfl_grid_free`].
 */
enum WflStatus wfl_grid_constant(size_t m, double c, struct WflGrid **out);

/**
 * Multiplicative grid `p(x_a, x_b) = q[b] / q[a]` from `len` positive
 * non-increasing values (grid of `len - 1` cells).
 *
 * # Safety
 * `q` must point to `len` readable doubles and `out` be a valid pointer.
 */
enum WflStatus wfl_grid_multiplicative(const double *q, size_t len, struct WflGrid **out);

/**
 * # Safety
 * `g` must be null or a live grid handle.
 */
void wfl_grid_free(struct WflGrid *g);

/**
 * Number of cells `M`; 0 for a null handle.
 *
 * # Safety
 * `g` must be null or a live handle.
 */
size_t wfl_grid_cells(const struct WflGrid *g);

/**
 * `p(x_a, x_b)` for `a <= b <= M`.
 *
 * # Safety
 * `g` must be a live handle and `out` a valid pointer.
 */
enum WflStatus wfl_grid_get(const struct WflGrid *g, size_t a, size_t b, double *out);

/**
 * One application of the averaging map, as a new grid.
 *
 * # Safety
 * `g` must be a live handle and `out` a valid pointer; release `*out` with
 * [`wfl_grid_free`].
 */
enum WflStatus wfl_grid_iterate(const struct WflGrid *g, struct WflGrid **out);

/**
 * Largest gap between `p` and its average.
 *
 * # Safety
 * `g` must be a live handle and `out` a valid pointer.
 */
enum WflStatus wfl_grid_residual(const struct WflGrid *g, double *out);

/**
 * Largest `|p(x,z) - p(x,y) p(y,z)|` over grid triples.
 *
 * # Safety
 * `g` must be a live handle and `out` a valid pointer.
 */
enum WflStatus wfl_grid_defect(const struct WflGrid *g, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WFL_H */
