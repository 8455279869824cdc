#ifndef OPENSET_H
#define OPENSET_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes returned by every fallible entry point.
 */
typedef enum os_status_t {
  /**
   * Success.
   */
  OS_STATUS_T_OK = 0,
  /**
   * A required pointer argument was null.
   */
  OS_STATUS_T_NULL_ARGUMENT = 1,
  /**
   * Arguments or configuration were rejected.
   */
  OS_STATUS_T_INVALID_ARGUMENT = 2,
  /**
   * The numerics failed (non-finite values, Sinkhorn blow-up).
   */
  OS_STATUS_T_NUMERICAL_FAILURE = 3,
  /**
   * A string argument was not valid UTF-8.
   */
  OS_STATUS_T_UTF8_ERROR = 4,
  /**
   * An internal panic was caught at the boundary.
   */
  OS_STATUS_T_INTERNAL_ERROR = 5,
} os_status_t;

/**
 * Completed training run: report and checkpoint, both as JSON.
 */
typedef struct os_run_t os_run_t;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *os_version(void);

/**
 * The last error message raised on this thread, or null if none.
 * Free with [`os_string_free`].
 */
char *os_last_error_message(void);

/**
 * The default configuration as pretty JSON. Free with [`os_string_free`].
 */
char *os_default_config_json(void);

/**
 * Generate data, train and evaluate under a JSON configuration (any
 * subset of fields; missing ones take defaults). On success `*out_run`
 * owns the result and must be released with [`os_run_free`].
 *
 * # Safety
 * `config_json` must be a NUL-terminated string or null; `out_run` must
 * point to writable storage for one pointer.
 */
enum os_status_t os_run_experiment(const char *config_json, struct os_run_t **out_run);

/**
 * The run report as JSON. Borrowed from the handle: valid until
 * [`os_run_free`]; do not free separately.
 *
 * # Safety
 * `run` must be a live pointer from [`os_run_experiment`].
 */
const char *os_run_report_json(const struct os_run_t *run);

/**
 * The trained parameters as checkpoint JSON. Borrowed from the handle.
 *
 * # Safety
 * `run` must be a live pointer from [`os_run_experiment`].
 */
const char *os_run_checkpoint_json(const struct os_run_t *run);

/**
 * Release a run handle.
 *
 * # Safety
 * `run` must come from [`os_run_experiment`] and not be freed twice.
 */
void os_run_free(struct os_run_t *run);

/**
 * Debiased Sinkhorn divergence between two uniformly weighted point
 * clouds, row-major `n x dim` and `m x dim`, with L1 ground cost raised
 * to `cost_power` and regularization length-scale `blur`.
 *
 * # Safety
 * `p_points` must hold `p_len * dim` doubles, `q_points` `q_len * dim`;
 * `out` must be writable.
 */
enum os_status_t os_sinkhorn_divergence(const double *p_points,
                                        uintptr_t p_len,
                                        const double *q_points,
                                        uintptr_t q_len,
                                        uintptr_t dim,
                                        double cost_power,
                                        double blur,
                                        double *out);

/**
 * Score a JSON-lines detection dump; on success `*out_csv` holds the
 * `metric,threshold,value` CSV (free with [`os_string_free`]).
 *
 * # Safety
 * `jsonl` must be a NUL-terminated string or null; `out_csv` must point
 * to writable storage for one pointer.
 */
enum os_status_t os_score_dump(const char *jsonl, char **out_csv);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must come from an openset function documented to transfer
 * ownership, and must not be freed twice.
 */
void os_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* OPENSET_H */
