#ifndef LEADELECT_H
#define LEADELECT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Assumption bitmask for [`le_prove_guarantee`].
 */
#define LE_ASSUME_CLEAN_ROUND 1

#define LE_ASSUME_OTHERS_FOLLOW 2

#define LE_ASSUME_MAX_LEADS 4

#define LE_ASSUME_DRIFT_WINDOW 8

/**
 * Result of every fallible call. Mirrors the CLI exit codes for the
 * verdict-carrying values.
 */
typedef enum LeStatus {
  /**
   * The call succeeded; for verifiers, the property is proved.
   */
  LeOk = 0,
  /**
   * The property is refuted; a witness exists.
   */
  LeRefuted = 1,
  /**
   * Bad argument, unparsable input, or invalid constants.
   */
  LeInvalidArgument = 2,
  /**
   * A resource limit was hit before a verdict was reached.
   */
  LeInconclusive = 3,
  /**
   * A required pointer argument was null.
   */
  LeNullPointer = 4,
  /**
   * A file could not be written.
   */
  LeIoError = 5,
} LeStatus;

/**
 * Guarantee selector for [`le_prove_guarantee`].
 */
typedef enum LeGuarantee {
  /**
   * The maximum-ID node reaches and keeps the leader state.
   */
  LeGuaranteeMaxBecomesLeader = 0,
  /**
   * Non-maximum nodes end up followers.
   */
  LeGuaranteeOthersFollow = 1,
  /**
   * The maximum-ID node never leaves the promotion chain.
   */
  LeGuaranteeMaxNeverDemoted = 2,
} LeGuarantee;

/**
 * Timing constants handle: period and jitter interval bounds as exact
 * rationals (numerator/denominator pairs, in milliseconds).
 */
typedef struct LeConstants LeConstants;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null if the last
 * call succeeded. The pointer stays valid until the next failing call on
 * the same thread; do not free it.
 */
const char *le_last_error(void);

const char *le_version(void);

/**
 * Builds a constants handle; returns null if a denominator is zero or the
 * intervals are degenerate. Free with [`le_constants_free`].
 */
struct LeConstants *le_constants_new(int64_t period_min_num,
                                     int64_t period_min_den,
                                     int64_t period_max_num,
                                     int64_t period_max_den,
                                     int64_t jitter_min_num,
                                     int64_t jitter_min_den,
                                     int64_t jitter_max_num,
                                     int64_t jitter_max_den);

/**
 * Periods in [49, 51] ms, jitter in [-0.5, 0.5] ms.
 */
struct LeConstants *le_constants_default(void);

/**
 * # Safety
 *
 * `handle` must be null or a pointer returned by a `le_constants_*`
 * constructor that has not been freed yet.
 */
void le_constants_free(struct LeConstants *handle);

/**
 * Checks that the activation-count difference between any two nodes stays
 * within `[lower, upper]` for the first `max_activations` activations.
 *
 * Returns `LeOk` if proved and `LeRefuted` if a violating schedule exists;
 * on refutation, if `witness_json` is non-null it receives the violating
 * count pair and violation time as a JSON string (free with
 * [`le_string_free`]).
 *
 * # Safety
 *
 * `constants` must be null or a live handle from a `le_constants_*`
 * constructor; `witness_json` must be null or point to writable storage
 * for one `char *`.
 */
enum LeStatus le_verify_drift(const struct LeConstants *constants,
                              uint32_t max_activations,
                              int64_t lower,
                              int64_t upper,
                              char **witness_json);

/**
 * Checks the read-window property: between activations `k` and
 * `k + reads_every` of any node, every other node fires at least once.
 *
 * # Safety
 *
 * `constants` must be null or a live handle from a `le_constants_*`
 * constructor.
 */
enum LeStatus le_verify_read_window(const struct LeConstants *constants,
                                    uint32_t reads_every,
                                    uint32_t probe_depth);

/**
 * Proves one guarantee of the node-class abstraction under the assumption
 * set encoded in `assumption_mask` (`LE_ASSUME_*` bits), for networks of
 * `nodes` nodes explored `depth` activations deep. Writes the number of
 * abstract states explored through `states_explored` when proved.
 *
 * # Safety
 *
 * `states_explored` must be null or point to writable storage for one
 * `uint64_t`.
 */
enum LeStatus le_prove_guarantee(enum LeGuarantee guarantee,
                                 uint32_t assumption_mask,
                                 uint32_t nodes,
                                 uint32_t depth,
                                 uint64_t *states_explored);

/**
 * Runs the simulator on a JSON network configuration and writes the event
 * trace as TSV to `trace_path`. The configuration schema matches the CLI's
 * `simulate --config` input.
 *
 * # Safety
 *
 * `config_json` and `trace_path` must be null or NUL-terminated strings.
 */
enum LeStatus le_simulate_to_file(const char *config_json, const char *trace_path);

/**
 * Frees a string returned through an out-parameter of this library.
 *
 * # Safety
 *
 * `s` must be null or a string handed out by this library that has not
 * been freed yet.
 */
void le_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEADELECT_H */
