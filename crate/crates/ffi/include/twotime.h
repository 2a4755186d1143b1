#ifndef TWOTIME_H
#define TWOTIME_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum TwotimeStatus {
  TWOTIME_STATUS_OK = 0,
  TWOTIME_STATUS_NULL_POINTER = 1,
  TWOTIME_STATUS_INVALID_UTF8 = 2,
  TWOTIME_STATUS_PARSE = 3,
  TWOTIME_STATUS_VALIDATION = 4,
  TWOTIME_STATUS_INVALID_INPUT = 5,
  TWOTIME_STATUS_ZERO_WEIGHT = 6,
  TWOTIME_STATUS_CAPACITY = 7,
  TWOTIME_STATUS_NUMERICAL = 8,
  TWOTIME_STATUS_BUFFER_TOO_SMALL = 9,
  TWOTIME_STATUS_PANIC = 10,
} TwotimeStatus;

/**
 * Analysis direction for `twotime_born_analysis`.
 */
typedef enum TwotimeDirection {
  TWOTIME_DIRECTION_FORWARD = 0,
  TWOTIME_DIRECTION_BACKWARD = 1,
} TwotimeDirection;

/**
 * Opaque model handle.
 */
typedef struct TwotimeModel TwotimeModel;

/**
 * Scalar part of a Born analysis; the distributions are written to
 * caller-provided arrays.
 */
typedef struct TwotimeBornSummary {
  double deviation;
  double shielding_residual;
  double reachable_shielding_residual;
  double denominator;
} TwotimeBornSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *twotime_last_error_message(void);

/**
 * Builds and validates a model from a NUL-terminated JSON configuration.
 *
 * # Safety
 * `json` must be a valid C string and `out` a writable pointer.
 */
enum TwotimeStatus twotime_model_from_json(const char *json, struct TwotimeModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from `twotime_model_from_json` and not be used again.
 */
void twotime_model_free(struct TwotimeModel *model);

/**
 * Hilbert-space dimension, number of outcomes per event and number of
 * interior events.
 *
 * # Safety
 * `model` must be a live handle; the outputs must be writable.
 */
enum TwotimeStatus twotime_model_shape(const struct TwotimeModel *model,
                                       size_t *dim,
                                       size_t *outcome_count,
                                       size_t *event_count);

/**
 * Unnormalized weight `tr[rho_F pi_n]` of a record.
 *
 * # Safety
 * `outcomes` must point to `len` readable values; `out` must be writable.
 */
enum TwotimeStatus twotime_joint_record_weight(const struct TwotimeModel *model,
                                               const size_t *outcomes_ptr,
                                               size_t len,
                                               double *out);

/**
 * Probability of a record conditioned on both boundaries.
 *
 * # Safety
 * As for `twotime_joint_record_weight`.
 */
enum TwotimeStatus twotime_record_probability(const struct TwotimeModel *model,
                                              const size_t *outcomes_ptr,
                                              size_t len,
                                              double *out);

/**
 * Difference between the forward and time-reversed weights of a record.
 *
 * # Safety
 * As for `twotime_joint_record_weight`.
 */
enum TwotimeStatus twotime_time_symmetry_residual(const struct TwotimeModel *model,
                                                  const size_t *outcomes_ptr,
                                                  size_t len,
                                                  double *out);

/**
 * Samples one forward trajectory. `outcomes_out` receives one index per
 * interior event and must hold at least that many.
 *
 * # Safety
 * `outcomes_out` must point to `capacity` writable values; `weight` must
 * be writable.
 */
enum TwotimeStatus twotime_sample_trajectory(const struct TwotimeModel *model,
                                             uint64_t seed,
                                             size_t *outcomes_out,
                                             size_t capacity,
                                             double *weight);

/**
 * Conditional distribution of event `j` (1-based in the analysis
 * direction) against the Born rule. A null `prefix` selects the most
 * probable conditioning prefix; otherwise it must hold `j - 1` outcomes.
 * `conditional` and `born` receive one entry per outcome and must hold at
 * least that many.
 *
 * # Safety
 * Array pointers must be valid for the stated lengths; `summary` must be
 * writable.
 */
enum TwotimeStatus twotime_born_analysis(const struct TwotimeModel *model,
                                         size_t j,
                                         enum TwotimeDirection direction,
                                         const size_t *prefix,
                                         size_t prefix_len,
                                         double *conditional,
                                         double *born,
                                         size_t capacity,
                                         struct TwotimeBornSummary *summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TWOTIME_H */
