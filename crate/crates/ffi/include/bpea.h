#ifndef BPEA_H
#define BPEA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BpeaPolicy {
  BPEA_POLICY_NONE = 0,
  BPEA_POLICY_BPEA = 1,
  BPEA_POLICY_GAUSSIAN = 2,
  BPEA_POLICY_LAPLACE = 3,
} BpeaPolicy;

typedef enum BpeaStatus {
  BPEA_STATUS_OK = 0,
  BPEA_STATUS_NULL_POINTER = 1,
  BPEA_STATUS_INVALID_PARAMETER = 2,
  BPEA_STATUS_NOISE_OUT_OF_RANGE = 3,
  BPEA_STATUS_MALFORMED_INPUT = 4,
  BPEA_STATUS_IO = 5,
  BPEA_STATUS_PANIC = 6,
} BpeaStatus;

// Results of a completed tradeoff experiment.
typedef struct BpeaExperiment BpeaExperiment;

// A configured B-PEA mechanism.
typedef struct BpeaMechanism BpeaMechanism;

// What the mechanism did to one measured error.
typedef struct BpeaObfuscated {
  double error;
  double noise;
  double uploaded;
  double leakage;
} BpeaObfuscated;

// Size and seed of a synthetic tradeoff experiment. Obtain defaults from
// [`bpea_experiment_options_default`] and override fields as needed.
typedef struct BpeaExperimentOptions {
  double eps;
  double tau;
  double budget_mbit;
  uint64_t seed;
  uint32_t num_users;
  uint32_t train_videos;
  uint32_t eval_videos;
  size_t gops_per_video;
} BpeaExperimentOptions;

// One aggregate row of the experiment.
typedef struct BpeaResultRow {
  double q;
  enum BpeaPolicy policy;
  double pr_leak;
  double mean_error_rad;
  double mean_abs_noise_rad;
  double qoe;
  double pspr;
} BpeaResultRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null if none occurred.
// The string stays valid until the next failing call on the same thread.
const char *bpea_last_error_message(void);

// Probability that the attacker locates the viewpoint when the error `e`
// is uploaded unchanged.
//
// # Safety
// `out` must be valid for writing one `double`.
enum BpeaStatus bpea_conditional_leakage(double e, double eps, double *out);

// Leakage probability when `e + n` is uploaded instead of `e`.
//
// # Safety
// `out` must be valid for writing one `double`.
enum BpeaStatus bpea_conditional_leakage_noisy(double e, double n, double eps, double *out);

// Monte-Carlo estimate of the same probability from a simulated attacker.
//
// # Safety
// `out` must be valid for writing one `double`.
enum BpeaStatus bpea_empirical_leakage(double e,
                                       double n,
                                       double eps,
                                       uint64_t trials,
                                       uint64_t seed,
                                       double *out);

// Great-circle distance between two points given as longitude/latitude.
//
// # Safety
// `out` must be valid for writing one `double`.
enum BpeaStatus bpea_spherical_distance(double lon_a,
                                        double lat_a,
                                        double lon_b,
                                        double lat_b,
                                        double *out);

// Index of the streamed zone shape for an uploaded error: 0 = 3x3,
// 1 = 3x5, 2 = 3x7, 3 = 4x7, 4 = 4x8.
//
// # Safety
// `out` must be valid for writing one `size_t`.
enum BpeaStatus bpea_zone_index(double e_uploaded, size_t *out);

// Fraction of the `len` per-trace leakage values that are at most `q`.
//
// # Safety
// `leakage` must point to `len` readable doubles; `out` must be valid for
// writing one `double`.
enum BpeaStatus bpea_pspr(const double *leakage, size_t len, double q, double *out);

// Creates a mechanism for precision `eps`, requirement `q` and solver
// margin `tau`.
//
// # Safety
// `out` must be valid for writing one pointer.
enum BpeaStatus bpea_mechanism_new(double eps, double q, double tau, struct BpeaMechanism **out);

// # Safety
// `mechanism` must be null or a handle from [`bpea_mechanism_new`] that
// has not been freed.
void bpea_mechanism_free(struct BpeaMechanism *mechanism);

// Optimal noise for the measured error `e`.
//
// # Safety
// `mechanism` must be a live handle; `out` must be valid for writing one
// `double`.
enum BpeaStatus bpea_mechanism_noise(const struct BpeaMechanism *mechanism, double e, double *out);

// Applies the mechanism to the measured error `e`.
//
// # Safety
// `mechanism` must be a live handle; `out` must be valid for writing one
// `BpeaObfuscated`.
enum BpeaStatus bpea_mechanism_apply(const struct BpeaMechanism *mechanism,
                                     double e,
                                     struct BpeaObfuscated *out);

struct BpeaExperimentOptions bpea_experiment_options_default(void);

// Synthesises traces and runs the full experiment over the default
// requirement grid and all policies.
//
// # Safety
// `options` must point to a readable `BpeaExperimentOptions`; `out` must
// be valid for writing one pointer.
enum BpeaStatus bpea_experiment_run(const struct BpeaExperimentOptions *options,
                                    struct BpeaExperiment **out);

// # Safety
// `experiment` must be null or a handle from [`bpea_experiment_run`] that
// has not been freed.
void bpea_experiment_free(struct BpeaExperiment *experiment);

// Number of aggregate rows, or 0 for a null handle.
//
// # Safety
// `experiment` must be null or a live handle.
size_t bpea_experiment_row_count(const struct BpeaExperiment *experiment);

// Non-zero when some baseline could not meet some requirement and was
// evaluated at its largest scale instead.
//
// # Safety
// `experiment` must be null or a live handle.
bool bpea_experiment_any_infeasible(const struct BpeaExperiment *experiment);

// # Safety
// `experiment` must be a live handle; `out` must be valid for writing one
// `BpeaResultRow`.
enum BpeaStatus bpea_experiment_row(const struct BpeaExperiment *experiment,
                                    size_t index,
                                    struct BpeaResultRow *out);

// Writes the aggregate rows as CSV to the UTF-8 path `path`.
//
// # Safety
// `experiment` must be a live handle; `path` must be a NUL-terminated
// string.
enum BpeaStatus bpea_experiment_write_csv(const struct BpeaExperiment *experiment,
                                          const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BPEA_H */
