#ifndef MICROELAST_H
#define MICROELAST_H

/* Generated from the Rust sources by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define ME_OK 0

#define ME_ERR_VALIDATION 1

#define ME_ERR_CONFIG 2

#define ME_ERR_SOLVER 3

#define ME_ERR_NULL -1

/**
 * Opaque problem handle.
 */
typedef struct me_problem {
  uint8_t _private[0];
} me_problem;

/**
 * Scalar outcome of one in-memory integration.
 */
typedef struct me_run_summary {
  /**
   * Completed time steps.
   */
  uint64_t steps;
  /**
   * Assembled state dimension.
   */
  uint64_t dim;
  /**
   * Total energy at the initial time.
   */
  double e_initial;
  /**
   * Total energy at the final time.
   */
  double e_final;
  /**
   * Work integral accumulated over the run.
   */
  double work_integral;
  /**
   * |E(T) - E(0) - W| at the final time.
   */
  double balance_residual;
  /**
   * Largest per-step energy-balance defect.
   */
  double max_balance_residual;
  /**
   * Largest state magnitude seen strictly before the forcing onset.
   */
  double pre_onset_max_abs;
  /**
   * 1 when every pre-onset state was bitwise zero, else 0.
   */
  int32_t exactly_zero_before_onset;
} me_run_summary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Latest error description for the calling thread (never null). The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *me_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *me_version(void);

/**
 * Builds a problem from a JSON run configuration (same schema as the CLI;
 * unknown keys are rejected).
 *
 * # Safety
 * `config_json` must point to a NUL-terminated UTF-8 string and `out` to a
 * writable handle slot; both must stay valid for the duration of the call.
 */
int32_t me_problem_from_config_json(const char *config_json, struct me_problem **out);

/**
 * Releases a handle obtained from `me_problem_from_config_json`. A null
 * handle is ignored.
 *
 * # Safety
 * `p` must be a handle returned by this library that has not been freed.
 */
void me_problem_free(struct me_problem *p);

/**
 * Assembled state dimension, or -1 for a null handle.
 *
 * # Safety
 * `p` must be a live handle from this library or null.
 */
int64_t me_problem_dim(const struct me_problem *p);

/**
 * Structural verdict: `ME_OK` when the model satisfies the selfadjointness
 * and positivity conditions, `ME_ERR_VALIDATION` (with a reason available
 * via `me_last_error_message`) otherwise.
 *
 * # Safety
 * `p` must be a live handle from this library or null.
 */
int32_t me_problem_validate(const struct me_problem *p);

/**
 * Integrates the problem from rest over the configured horizon and fills
 * `summary`. When `u_out` (or `v_out`) is non-null it receives the final
 * state (or its running antiderivative); `state_capacity` must then be at
 * least the problem dimension. Invalid models are integrated anyway; gate
 * on `me_problem_validate` first if that matters.
 *
 * # Safety
 * `p` must be a live handle; `summary` must point to a writable
 * `me_run_summary`; `u_out`/`v_out` must be null or point to at least
 * `state_capacity` writable doubles.
 */
int32_t me_problem_run(const struct me_problem *p,
                       struct me_run_summary *summary,
                       double *u_out,
                       double *v_out,
                       size_t state_capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MICROELAST_H */
