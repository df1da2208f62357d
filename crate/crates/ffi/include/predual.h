#ifndef PREDUAL_H
#define PREDUAL_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum PredualStatus {
  PREDUAL_STATUS_OK = 0,
  PREDUAL_STATUS_NULL_POINTER = 1,
  PREDUAL_STATUS_INVALID_UTF8 = 2,
  PREDUAL_STATUS_INVALID_ARGUMENT = 3,
  PREDUAL_STATUS_MALFORMED_DOCUMENT = 4,
  PREDUAL_STATUS_NOT_BUILT = 5,
  PREDUAL_STATUS_EPSILON_NOT_REACHED = 6,
  PREDUAL_STATUS_PANIC = 7,
} PredualStatus;

/**
 * Opaque construction state.
 */
typedef struct PredualState PredualState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failed call on this thread (empty after a
 * success). Owned by the library; valid until the next call.
 */
const char *predual_last_error(void);

/**
 * Builds up to `levels` levels with parameter `b` (e.g. `"1/5"`), stopping
 * before any coordinate exceeds `max_coord` (0 means no cap).
 *
 * # Safety
 * `b` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PredualStatus predual_state_build(const char *b,
                                       size_t levels,
                                       uint64_t max_coord,
                                       struct PredualState **out);

/**
 * Loads a state document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PredualStatus predual_state_load(const char *json, struct PredualState **out);

/**
 * Serializes the state document into a new string.
 *
 * # Safety
 * `state` must come from this library; `out` must be a valid pointer.
 */
enum PredualStatus predual_state_save(const struct PredualState *state, char **out);

/**
 * Releases a state. Null is ignored.
 *
 * # Safety
 * `state` must be null or come from this library, and not be used again.
 */
void predual_state_free(struct PredualState *state);

/**
 * Number of built levels.
 *
 * # Safety
 * `state` must come from this library; `out` must be a valid pointer.
 */
enum PredualStatus predual_state_level_count(const struct PredualState *state, size_t *out);

/**
 * Coordinate interval `[lo, hi]` of level `level` (1-based).
 *
 * # Safety
 * `state` must come from this library; `lo` and `hi` must be valid pointers.
 */
enum PredualStatus predual_state_interval(const struct PredualState *state,
                                          size_t level,
                                          uint64_t *lo,
                                          uint64_t *hi);

/**
 * Runs the construction property checks. `passed` receives the verdict and
 * `report` (if non-null) a JSON report.
 *
 * # Safety
 * `state` must come from this library; `passed` must be valid; `report`
 * may be null.
 */
enum PredualStatus predual_state_verify(const struct PredualState *state,
                                        bool *passed,
                                        char **report);

/**
 * Certified norm bracket of a sparse vector such as `"1:1,2:-1/2"`,
 * returned as JSON with `lower`, `upper` and the witness. Fails with
 * `EpsilonNotReached` when the width stays above `eps` up to depth
 * `depth_limit`.
 *
 * # Safety
 * `state` must come from this library; `vector` and `eps` must be
 * NUL-terminated strings; `out` must be a valid pointer.
 */
enum PredualStatus predual_norm_bracket(const struct PredualState *state,
                                        const char *vector,
                                        const char *eps,
                                        uint32_t depth_limit,
                                        char **out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or come from this library, and not be used again.
 */
void predual_string_free(char *s);

/**
 * Static description of a status code.
 */
const char *predual_status_message(enum PredualStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PREDUAL_H */
