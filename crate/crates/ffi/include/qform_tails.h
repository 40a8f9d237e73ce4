#ifndef QFORM_TAILS_H
#define QFORM_TAILS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QtStatus {
  QT_STATUS_OK = 0,
  QT_STATUS_NULL_POINTER = 1,
  QT_STATUS_SHAPE = 2,
  QT_STATUS_NOT_SYMMETRIC = 3,
  QT_STATUS_NO_CONVERGENCE = 4,
  QT_STATUS_DOMAIN = 5,
  QT_STATUS_NON_FINITE = 6,
  QT_STATUS_INVALID_ARGUMENT = 7,
  QT_STATUS_SINGULAR_DESIGN = 8,
  QT_STATUS_CONFIG = 9,
  QT_STATUS_IO = 10,
  QT_STATUS_JSON = 11,
  QT_STATUS_PANIC = 12,
} QtStatus;

typedef enum QtCorollary {
  QT_COROLLARY_TRACE = 0,
  QT_COROLLARY_HILBERT_SCHMIDT = 1,
} QtCorollary;

typedef enum QtPsi1Variant {
  QT_PSI1_VARIANT_TRACE = 0,
  QT_PSI1_VARIANT_HS_PSD = 1,
  QT_PSI1_VARIANT_HS_GENERAL = 2,
} QtPsi1Variant;

/**
 * Opaque square matrix handle.
 */
typedef struct QtMatrix QtMatrix;

typedef struct QtNormBundle {
  double operator_norm;
  double hilbert_schmidt;
  double trace_norm;
} QtNormBundle;

typedef struct QtConstants {
  double c1;
  double c2;
  double c3;
  double c4;
  double c_rv;
} QtConstants;

typedef struct QtExcessLossBound {
  double threshold;
  double prob_bound;
} QtExcessLossBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *qt_last_error_message(void);

/**
 * Static name of a status code.
 */
const char *qt_status_name(enum QtStatus status);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qt_version(void);

/**
 * Creates an `n × n` matrix from `n*n` row-major values.
 *
 * # Safety
 * `data` must point to `n*n` readable doubles; `out` must be writable.
 */
enum QtStatus qt_matrix_new(size_t n, const double *data, struct QtMatrix **out);

/**
 * Releases a matrix. NULL is ignored.
 *
 * # Safety
 * `m` must come from `qt_matrix_new` and not be used afterwards.
 */
void qt_matrix_free(struct QtMatrix *m);

/**
 * Dimension of the matrix, 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
size_t qt_matrix_dim(const struct QtMatrix *m);

/**
 * Operator, Hilbert-Schmidt and trace norms.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum QtStatus qt_matrix_norms(const struct QtMatrix *m, struct QtNormBundle *out);

/**
 * Constants from the calibration shipped with the library.
 *
 * # Safety
 * `out` must be writable.
 */
enum QtStatus qt_constants_default(struct QtConstants *out);

/**
 * Constants from `c1`, `c2`, `c_rv`, with `c3 = 2√2 c1 c2` and `c4 = 2 c3`.
 *
 * # Safety
 * `out` must be writable.
 */
enum QtStatus qt_constants_new(double c1, double c2, double c_rv, struct QtConstants *out);

/**
 * Plug-in ψ_p Luxemburg norm (`p` is 1 or 2) of `len` samples.
 *
 * # Safety
 * `samples` must point to `len` readable doubles; `out` must be writable.
 */
enum QtStatus qt_empirical_luxemburg_norm(const double *samples,
                                          size_t len,
                                          uint32_t p,
                                          double rel_tol,
                                          double *out);

/**
 * Conjugate `g(s)` of the envelope `φ_{a,b}`.
 *
 * # Safety
 * `out` must be writable.
 */
enum QtStatus qt_conjugate_g(double a, double b, double s, double *out);

/**
 * `2 e^{-g(s)}` when `exact` is nonzero, else `2 exp(-min{s²/2a², bs/2})`.
 *
 * # Safety
 * `out` must be writable.
 */
enum QtStatus qt_tail_bound_from_envelope(double a, double b, double s, bool exact, double *out);

/**
 * Trace or Hilbert-Schmidt corollary bound on `P(|q − Eq| >= t)`.
 *
 * # Safety
 * `m`, `consts` must be valid; `out` must be writable.
 */
enum QtStatus qt_quadform_tail_bound(const struct QtMatrix *m,
                                     double k,
                                     const struct QtConstants *consts,
                                     double t,
                                     enum QtCorollary variant,
                                     double *out);

/**
 * Upper bound on `||<Aξ, ξ>||_ψ1`, doubled when `centered`.
 *
 * # Safety
 * `m`, `consts` must be valid; `out` must be writable.
 */
enum QtStatus qt_psi1_quadform_bound(const struct QtMatrix *m,
                                     double k,
                                     const struct QtConstants *consts,
                                     enum QtPsi1Variant variant,
                                     bool centered,
                                     bool matrix_is_psd,
                                     double *out);

/**
 * Gaussian Hanson-Wright bound for `<Ag, g>`, `g ~ N(0, I)`.
 *
 * # Safety
 * `m`, `consts` must be valid; `out` must be writable.
 */
enum QtStatus qt_gaussian_hw_bound(const struct QtMatrix *m,
                                   const struct QtConstants *consts,
                                   double t,
                                   double *out);

/**
 * Independent-coordinate Hanson-Wright reference bound with constant `c_rv`.
 *
 * # Safety
 * `m` must be valid; `out` must be writable.
 */
enum QtStatus qt_rv_hw_bound(const struct QtMatrix *m,
                             double k,
                             double c_rv,
                             double t,
                             double *out);

/**
 * Excess-loss bound for a `d × n` row-major design (`d*n` values).
 *
 * # Safety
 * `design` must point to `d*n` doubles; `consts` valid; `out` writable.
 */
enum QtStatus qt_excess_loss_tail_bound(const double *design,
                                        size_t d,
                                        size_t n,
                                        double k,
                                        const struct QtConstants *consts,
                                        double u,
                                        struct QtExcessLossBound *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QFORM_TAILS_H */
