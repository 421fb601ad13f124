#ifndef RIS_SECRECY_H
#define RIS_SECRECY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Optimizer or baseline to run.
 */
typedef enum RsAlgorithm {
  RS_ALGORITHM_BCD_MM = 0,
  RS_ALGORITHM_BCD_SOCP = 1,
  RS_ALGORITHM_NON_ROBUST = 2,
  RS_ALGORITHM_BCD_MM_RAND = 3,
  RS_ALGORITHM_BCD_MM_NO_RIS = 4,
  RS_ALGORITHM_BCD_MM_TWO_BIT = 5,
} RsAlgorithm;

/**
 * Result code of every fallible call.
 */
typedef enum RsStatus {
  RS_STATUS_OK = 0,
  RS_STATUS_NULL_POINTER = 1,
  RS_STATUS_INVALID_ARGUMENT = 2,
  RS_STATUS_GEOMETRY = 3,
  RS_STATUS_NUMERICAL = 4,
  RS_STATUS_BUFFER_TOO_SMALL = 5,
  RS_STATUS_PANIC = 6,
} RsStatus;

/**
 * One channel realization.
 */
typedef struct RsChannels RsChannels;

/**
 * System and algorithm configuration.
 */
typedef struct RsConfig RsConfig;

/**
 * Outcome of one optimization run.
 */
typedef struct RsResult RsResult;

/**
 * One row of a convergence trace. `zeta` is NaN for the SOCP loop.
 */
typedef struct RsTraceRow {
  size_t iteration;
  double bound_objective;
  double true_wmsr;
  double zeta;
  double wall_ms;
} RsTraceRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread (empty if none). The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *rs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rs_version(void);

/**
 * New configuration with the default scenario (N=4, M=16, K=3, 30 dBm).
 */
struct RsConfig *rs_config_new(void);

/**
 * Parse a TOML configuration (same format as the command-line tool).
 */
enum RsStatus rs_config_from_toml(const char *text, struct RsConfig **out);

void rs_config_free(struct RsConfig *config);

/**
 * Set antenna, RIS and user counts. User weights are reset to 1.
 */
enum RsStatus rs_config_set_dims(struct RsConfig *config,
                                 size_t n_tx,
                                 size_t m_ris,
                                 size_t k_users);

/**
 * Set the transmit power budget in dBm.
 */
enum RsStatus rs_config_set_power_dbm(struct RsConfig *config, double p_dbm);

/**
 * Set transmit and receive distortion ratios.
 */
enum RsStatus rs_config_set_distortion(struct RsConfig *config, double kappa_t, double kappa_r);

/**
 * Set the outer-iteration cap and relative-change tolerance.
 */
enum RsStatus rs_config_set_stopping(struct RsConfig *config, size_t max_iter, double tolerance);

/**
 * Read back `(N, M, K)`; any output pointer may be null.
 */
enum RsStatus rs_config_dims(const struct RsConfig *config,
                             size_t *n_tx,
                             size_t *m_ris,
                             size_t *k_users);

/**
 * Draw one channel realization for `seed`.
 */
enum RsStatus rs_channels_generate(const struct RsConfig *config,
                                   uint64_t seed,
                                   struct RsChannels **out);

void rs_channels_free(struct RsChannels *channels);

/**
 * Run `algorithm` from the seeded starting point. The reported WMSR is
 * evaluated under the configured hardware model.
 */
enum RsStatus rs_optimize(const struct RsConfig *config,
                          const struct RsChannels *channels,
                          enum RsAlgorithm algorithm,
                          uint64_t seed,
                          struct RsResult **out);

void rs_result_free(struct RsResult *result);

/**
 * Final weighted minimum secrecy rate in nats (NaN if `result` is null).
 */
double rs_result_wmsr(const struct RsResult *result);

/**
 * Outer iterations performed (0 if `result` is null).
 */
size_t rs_result_iterations(const struct RsResult *result);

/**
 * 1 if the stopping rule was met before the iteration cap.
 */
int32_t rs_result_converged(const struct RsResult *result);

/**
 * Copy the column-stacked precoder (N*K entries) into `re`/`im`.
 */
enum RsStatus rs_result_precoder(const struct RsResult *result, double *re, double *im, size_t len);

/**
 * Copy the reflection vector (M entries; 0 for the no-RIS baseline).
 */
enum RsStatus rs_result_phases(const struct RsResult *result, double *re, double *im, size_t len);

/**
 * Number of trace rows (0 if `result` is null).
 */
size_t rs_result_trace_len(const struct RsResult *result);

enum RsStatus rs_result_trace_row(const struct RsResult *result,
                                  size_t index,
                                  struct RsTraceRow *out);

/**
 * WMSR in nats of a caller-supplied state: column-stacked precoder of N*K
 * entries and M unit-modulus reflection coefficients.
 */
enum RsStatus rs_evaluate_wmsr(const struct RsConfig *config,
                               const struct RsChannels *channels,
                               const double *w_re,
                               const double *w_im,
                               size_t w_len,
                               const double *phi_re,
                               const double *phi_im,
                               size_t phi_len,
                               double *out);

/**
 * Seeded feasible starting point, copied into caller buffers (N*K and M entries).
 */
enum RsStatus rs_initial_state(const struct RsConfig *config,
                               const struct RsChannels *channels,
                               uint64_t seed,
                               double *w_re,
                               double *w_im,
                               size_t w_len,
                               double *phi_re,
                               double *phi_im,
                               size_t phi_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIS_SECRECY_H */
