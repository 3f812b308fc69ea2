#ifndef MIMO_NOMA_H
#define MIMO_NOMA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MnStatus {
  MN_STATUS_OK = 0,
  MN_STATUS_NULL_POINTER = 1,
  MN_STATUS_INVALID_UTF8 = 2,
  /**
   * Unknown algorithm name, index out of range and similar.
   */
  MN_STATUS_INVALID_ARGUMENT = 3,
  /**
   * Rejected configuration, cluster plan or JSON.
   */
  MN_STATUS_INVALID_CONFIG = 4,
  /**
   * Linear algebra or conic solver failure.
   */
  MN_STATUS_NUMERICAL = 5,
  MN_STATUS_IO = 6,
  MN_STATUS_PANIC = 7,
} MnStatus;

typedef enum MnRunStatus {
  MN_RUN_STATUS_CONVERGED = 0,
  MN_RUN_STATUS_ITERATION_CAP = 1,
  MN_RUN_STATUS_INIT_FAILED = 2,
  MN_RUN_STATUS_NUMERICAL_FAILURE = 3,
  MN_RUN_STATUS_STALLED = 4,
} MnRunStatus;

/**
 * Outcome of one optimizer run.
 */
typedef struct MnResult MnResult;

/**
 * One network draw: configuration, channels and cluster plan.
 */
typedef struct MnScenario MnScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *mn_last_error_message(void);

/**
 * Draws a topology, channels and a cluster plan from `seed`.
 *
 * `config_json` is a network configuration object (missing fields take the
 * defaults); null or `"{}"` gives the default layout.
 *
 * # Safety
 * `config_json` must be null or a valid NUL-terminated string; `out` must be
 * a valid pointer.
 */
enum MnStatus mn_scenario_new(const char *config_json,
                              uint64_t seed,
                              size_t cluster_size,
                              struct MnScenario **out);

/**
 * # Safety
 * `scenario` must be null or come from [`mn_scenario_new`] and not be freed twice.
 */
void mn_scenario_free(struct MnScenario *scenario);

/**
 * Total UEs in the network, or 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle.
 */
size_t mn_scenario_num_ues(const struct MnScenario *scenario);

/**
 * Runs one algorithm (`qp`, `sdp`, `soc`, `comp-qp` or `dpc-qp`) with default
 * settings. An infeasible QoS target is not an error: the result reports
 * [`MnRunStatus::InitFailed`].
 *
 * # Safety
 * `scenario` must be a live handle, `algorithm` a NUL-terminated string and
 * `out` a valid pointer.
 */
enum MnStatus mn_optimize(const struct MnScenario *scenario,
                          const char *algorithm,
                          struct MnResult **out);

/**
 * # Safety
 * `result` must be null or come from [`mn_optimize`] and not be freed twice.
 */
void mn_result_free(struct MnResult *result);

/**
 * # Safety
 * `result` must be a live handle and `out` a valid pointer.
 */
enum MnStatus mn_result_status(const struct MnResult *result, enum MnRunStatus *out);

/**
 * Sum throughput of the final point, bps/Hz.
 *
 * # Safety
 * `result` must be a live handle and `out` a valid pointer.
 */
enum MnStatus mn_result_total_bps_hz(const struct MnResult *result, double *out);

/**
 * Path-following iterations after initialization.
 *
 * # Safety
 * `result` must be a live handle and `out` a valid pointer.
 */
enum MnStatus mn_result_iterations(const struct MnResult *result, size_t *out);

/**
 * Final throughput of UE `ue` in cell `cell`, bps/Hz.
 *
 * # Safety
 * `result` must be a live handle and `out` a valid pointer.
 */
enum MnStatus mn_result_ue_rate(const struct MnResult *result, size_t cell, size_t ue, double *out);

/**
 * The full iteration trace as JSON. Release the string with [`mn_string_free`].
 *
 * # Safety
 * `result` must be a live handle and `out` a valid pointer.
 */
enum MnStatus mn_result_to_json(const struct MnResult *result, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void mn_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIMO_NOMA_H */
