#ifndef ONQUENCH_H
#define ONQUENCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Nonzero values mirror the command-line exit codes.
 */
typedef enum {
  ONQ_STATUS_OK = 0,
  /**
   * Invalid configuration or argument.
   */
  ONQ_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Integration or linear-algebra failure.
   */
  ONQ_STATUS_NUMERICAL = 3,
  /**
   * File or format failure.
   */
  ONQ_STATUS_IO = 4,
  /**
   * A required pointer was null.
   */
  ONQ_STATUS_NULL_POINTER = 5,
  /**
   * The output buffer is too small; the required length was written.
   */
  ONQ_STATUS_BUFFER_TOO_SMALL = 6,
  /**
   * Internal panic; the handle must not be used again.
   */
  ONQ_STATUS_PANIC = 7,
} OnqStatus;

/**
 * Opaque model handle: configuration, grids and the current mode state.
 */
typedef struct OnqModel OnqModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread (NUL terminated) into
 * `buf`. Returns the full message length including the terminator, so a
 * call with `cap = 0` queries the size.
 *
 * # Safety
 * `buf` must be valid for `cap` bytes or null when `cap` is 0.
 */
uintptr_t onq_last_error(char *buf, uintptr_t cap);

/**
 * Creates a model from the desk-scale preset with quench depth `delta`.
 *
 * # Safety
 * `out` must be a valid pointer to write a handle into.
 */
OnqStatus onq_model_new_desk(double delta, OnqModel **out);

/**
 * Creates a model from a JSON configuration document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` a valid pointer.
 */
OnqStatus onq_model_new_json(const char *json, OnqModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from `onq_model_new*` and not be used afterwards.
 */
void onq_model_free(OnqModel *model);

/**
 * Critical mass `r_c` and post-quench mass `r`.
 *
 * # Safety
 * `model` must be a live handle; the out-pointers valid or null.
 */
OnqStatus onq_model_masses(const OnqModel *model, double *r_c, double *r);

/**
 * Current time and effective mass of the handle's state.
 *
 * # Safety
 * `model` must be a live handle; the out-pointers valid or null.
 */
OnqStatus onq_model_state(const OnqModel *model, double *t, double *r_eff);

/**
 * Advances the state to the step nearest `t`. Times before the current
 * state are rejected.
 *
 * # Safety
 * `model` must be a live handle.
 */
OnqStatus onq_model_evolve_to(OnqModel *model, double t);

/**
 * Symplectic eigenvalues (descending) of the slab block at transverse
 * momentum `q_par` for the first `n_s` sites. Writes `n_s` values to
 * `lambdas` if `cap >= n_s`; always writes the count to `len`.
 *
 * # Safety
 * `model` must be a live handle; `lambdas` valid for `cap` doubles.
 */
OnqStatus onq_model_spectrum(const OnqModel *model,
                             double q_par,
                             uintptr_t n_s,
                             double *lambdas,
                             uintptr_t cap,
                             uintptr_t *len);

/**
 * Slab entropy of the configured width: per unit transverse area and the
 * `q_par = 0` block alone.
 *
 * # Safety
 * `model` must be a live handle; the out-pointers valid or null.
 */
OnqStatus onq_model_entropy(const OnqModel *model, double *s_per_area, double *s_zero_mode);

/**
 * Bose-Einstein entropy of one mode with occupation `n >= 0`.
 *
 * # Safety
 * `out` must be valid.
 */
OnqStatus onq_mode_entropy(double n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ONQUENCH_H */
