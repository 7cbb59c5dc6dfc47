#ifndef LAPLAB_H
#define LAPLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LaplabStatus {
  LAPLAB_STATUS_OK = 0,
  LAPLAB_STATUS_NULL_POINTER = 1,
  LAPLAB_STATUS_INVALID_ARGUMENT = 2,
  LAPLAB_STATUS_BAD_POTENTIAL = 3,
  LAPLAB_STATUS_GATE_REFUSED = 4,
  LAPLAB_STATUS_NUMERICAL_FAILURE = 5,
  LAPLAB_STATUS_PANIC = 6,
} LaplabStatus;

/**
 * Opaque handle: a grid, a potential and the assembled operators.
 */
typedef struct LaplabLab LaplabLab;

/**
 * Scalar summary of the hypothesis check. Fields that could not be computed are NaN.
 */
typedef struct LaplabCheckReport {
  /**
   * 1 when all conditions hold and S is positive.
   */
  int32_t compliant;
  double c_tilde;
  double d_tilde;
  double c1;
  double c2;
  double lambda_min_s;
  double lambda_min_h;
  size_t unknowns;
} LaplabCheckReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a handle for `potential_id` on a `dims`-dimensional box
 * [-half_extent, half_extent]^dims with `points` (odd) nodes per axis.
 * The hypothesis check runs here; when it cannot select c1 the operators
 * are assembled with c1 = 0 so that resolvents remain available.
 *
 * # Safety
 * `potential_id` must be a nul-terminated string and `out` a valid pointer.
 */
enum LaplabStatus laplab_new(size_t dims,
                             double half_extent,
                             size_t points,
                             const char *potential_id,
                             struct LaplabLab **out);

/**
 * Creates a handle from the text of a run configuration (TOML).
 *
 * # Safety
 * `config_toml` must be a nul-terminated string and `out` a valid pointer.
 */
enum LaplabStatus laplab_new_from_config(const char *config_toml, struct LaplabLab **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `lab` must come from `laplab_new*` and not be used afterwards.
 */
void laplab_free(struct LaplabLab *lab);

/**
 * Number of grid unknowns; 0 for a null handle.
 *
 * # Safety
 * `lab` must be null or a live handle.
 */
size_t laplab_unknowns(const struct LaplabLab *lab);

/**
 * # Safety
 * `lab` must be a live handle and `out` a valid pointer.
 */
enum LaplabStatus laplab_check(const struct LaplabLab *lab, struct LaplabCheckReport *out);

/**
 * <f, (H - lambda - i branch mu)^{-1} f> for a real vector f of length `len`.
 * `branch` is +1 or -1.
 *
 * # Safety
 * `f` must point to `len` doubles; `out_re` and `out_im` must be valid.
 */
enum LaplabStatus laplab_resolvent_element(const struct LaplabLab *lab,
                                           double lambda,
                                           double mu,
                                           int32_t branch,
                                           const double *f,
                                           size_t len,
                                           double *out_re,
                                           double *out_im);

/**
 * Solves (H - lambda - i branch (mu + eps B)) u = f. `f_im` may be null
 * for a real right-hand side.
 *
 * # Safety
 * Input arrays must hold `len` doubles and output arrays room for `len`.
 */
enum LaplabStatus laplab_shifted_solve(const struct LaplabLab *lab,
                                       double lambda,
                                       double mu,
                                       double eps,
                                       int32_t branch,
                                       const double *f_re,
                                       const double *f_im,
                                       size_t len,
                                       double *u_re,
                                       double *u_im);

/**
 * Full hypothesis report as JSON. Release with `laplab_string_free`.
 * Returns null on failure.
 *
 * # Safety
 * `lab` must be a live handle.
 */
char *laplab_report_json(const struct LaplabLab *lab);

/**
 * # Safety
 * `s` must come from this library and not be freed twice. Null is ignored.
 */
void laplab_string_free(char *s);

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *laplab_last_error(void);

/**
 * Library version, static storage.
 */
const char *laplab_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAPLAB_H */
