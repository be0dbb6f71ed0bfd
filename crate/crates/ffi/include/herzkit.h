#ifndef HERZKIT_H
#define HERZKIT_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum {
  HK_STATUS_OK = 0,
  HK_STATUS_NULL_POINTER = 1,
  HK_STATUS_INVALID_UTF8 = 2,
  HK_STATUS_INVALID_JSON = 3,
  HK_STATUS_INVALID_ARGUMENT = 4,
  HK_STATUS_MISSING_FIELD = 5,
  HK_STATUS_DIMENSION_MISMATCH = 6,
  HK_STATUS_UNSUPPORTED = 7,
  HK_STATUS_DIVERGENCE = 8,
  HK_STATUS_NON_INTEGRABLE = 9,
  HK_STATUS_NOT_CONVERGED = 10,
  HK_STATUS_RESOLUTION = 11,
  HK_STATUS_NOT_DYADIC_ALIGNED = 12,
  HK_STATUS_REGIME_VIOLATION = 13,
  HK_STATUS_PANIC = 14,
} HkStatus;

/**
 * A parsed test function.
 */
typedef struct HkFunction HkFunction;

/**
 * The outcome of a norm evaluation. Also produced for divergent sums, in
 * which case it carries the partial value.
 */
typedef struct HkNormResult HkNormResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. Owned by the library;
 * valid until the next call on the same thread.
 */
const char *hk_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hk_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void hk_string_free(char *s);

/**
 * Parses a function spec such as
 * `{"variant":"Gaussian","center":[0,0],"scale":1}`.
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string; `out` must be writable.
 */
HkStatus hk_function_from_json(const char *spec_json, HkFunction **out);

/**
 * # Safety
 * `f` must be null or a live handle from [`hk_function_from_json`].
 */
void hk_function_free(HkFunction *f);

/**
 * Spatial dimension of the function, 0 for a null handle.
 *
 * # Safety
 * `f` must be null or a live handle.
 */
uintptr_t hk_function_dim(const HkFunction *f);

/**
 * Evaluates `f` at the point `x[0..len]`.
 *
 * # Safety
 * `f` must be a live handle, `x` must point to `len` doubles, `out` must be writable.
 */
HkStatus hk_function_eval(const HkFunction *f, const double *x, uintptr_t len, double *out);

/**
 * Dilates `f` by `2^m`, producing a new handle.
 *
 * # Safety
 * `f` must be a live handle; `out` must be writable.
 */
HkStatus hk_function_dilate(const HkFunction *f, int32_t m, HkFunction **out);

/**
 * Herz norm `‖f‖_{K̇^{α,p}_q}` over the whole space with default truncation
 * and quadrature. On [`HkStatus::Divergence`] and [`HkStatus::NotConverged`]
 * `*out` still receives a result holding the partial sum.
 *
 * # Safety
 * `f` must be a live handle; `out` must be writable.
 */
HkStatus hk_herz_norm(const HkFunction *f, double alpha, double p, double q, HkNormResult **out);

/**
 * Herz–Sobolev norm of order `m`; `top_order` selects the seminorm made of
 * the order-`m` derivatives only.
 *
 * # Safety
 * `f` must be a live handle; `out` must be writable.
 */
HkStatus hk_herz_sobolev_norm(const HkFunction *f,
                              double alpha,
                              double p,
                              double q,
                              uint32_t m,
                              bool top_order,
                              HkNormResult **out);

/**
 * # Safety
 * `r` must be null or a live result handle.
 */
void hk_norm_result_free(HkNormResult *r);

/**
 * Norm value (the partial value for a divergent sum); NaN for a null handle.
 *
 * # Safety
 * `r` must be null or a live result handle.
 */
double hk_norm_result_value(const HkNormResult *r);

/**
 * # Safety
 * `r` must be null or a live result handle.
 */
bool hk_norm_result_converged(const HkNormResult *r);

/**
 * Number of annulus terms in the result.
 *
 * # Safety
 * `r` must be null or a live result handle.
 */
uintptr_t hk_norm_result_term_count(const HkNormResult *r);

/**
 * Term `i`: annulus index `k`, its `L^p` mass and its weighted term.
 *
 * # Safety
 * `r` must be a live result handle; the out pointers must be writable.
 */
HkStatus hk_norm_result_term(const HkNormResult *r,
                             uintptr_t i,
                             int32_t *k,
                             double *mass,
                             double *term);

/**
 * Applies an operator given as JSON, for example `{"kind":"riesz","lambda":0.5}`,
 * to `f` at the point `x[0..len]`.
 *
 * # Safety
 * `f` must be a live handle, `op_json` a NUL-terminated string, `x` must
 * point to `len` doubles and `out` must be writable.
 */
HkStatus hk_operator_apply(const HkFunction *f,
                           const char *op_json,
                           const double *x,
                           uintptr_t len,
                           double *out);

/**
 * Checks the hypotheses of `theorem` (for example `"Embeddings1"`) against a
 * JSON parameter bundle. `*ok` tells whether all hold; `*report_json`
 * receives the full report, to be released with [`hk_string_free`].
 *
 * # Safety
 * Strings must be NUL-terminated; out pointers must be writable.
 */
HkStatus hk_check_hypotheses(const char *theorem,
                             const char *params_json,
                             bool *ok,
                             char **report_json);

/**
 * Runs an embedding experiment described by the same JSON payload as the
 * `embed` command. `*pass` receives the verdict and `*report_json` the report.
 *
 * # Safety
 * `experiment_json` must be NUL-terminated; out pointers must be writable.
 */
HkStatus hk_embed_run(const char *experiment_json, bool *pass, char **report_json);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* HERZKIT_H */
