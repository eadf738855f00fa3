#ifndef TRIAGE_H
#define TRIAGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TriageStatus {
  TRIAGE_STATUS_OK = 0,
  TRIAGE_STATUS_NULL_ARGUMENT = 1,
  TRIAGE_STATUS_INVALID_UTF8 = 2,
  TRIAGE_STATUS_IO = 3,
  TRIAGE_STATUS_BAD_ARTIFACT = 4,
  TRIAGE_STATUS_ASSIGNMENT_IMPOSSIBLE = 5,
  TRIAGE_STATUS_INVALID_ARGUMENT = 6,
  TRIAGE_STATUS_UNSUPPORTED = 7,
  TRIAGE_STATUS_BUFFER_TOO_SMALL = 8,
  TRIAGE_STATUS_PANIC = 99,
} TriageStatus;

/**
 * A loaded model artifact.
 */
typedef struct TriageModel TriageModel;

/**
 * An online drift detector fed one daily accuracy at a time.
 */
typedef struct TriageMonitor TriageMonitor;

/**
 * A raised drift alert. Days are 1-based positions in the pushed stream.
 */
typedef struct TriageAlert {
  size_t day;
  size_t boundary;
  double pre_mean;
  double post_mean;
} TriageAlert;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *triage_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void triage_string_free(char *s);

/**
 * Loads an artifact file written by `triage train`.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum TriageStatus triage_model_load(const char *path, struct TriageModel **out);

/**
 * # Safety
 * `model` must come from [`triage_model_load`] or be null.
 */
void triage_model_free(struct TriageModel *model);

/**
 * Number of teams the model can assign; 0 for a null handle.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
size_t triage_model_class_count(const struct TriageModel *model);

/**
 * Predicts the team for a report. `*team_out` receives a string to free
 * with [`triage_string_free`].
 *
 * # Safety
 * Pointers must be valid; text arguments nul-terminated.
 */
enum TriageStatus triage_model_predict(const struct TriageModel *model,
                                       const char *summary,
                                       const char *description,
                                       char **team_out);

/**
 * Explains the predicted team as a JSON object with `k` terms.
 *
 * # Safety
 * Pointers must be valid; text arguments nul-terminated.
 */
enum TriageStatus triage_model_explain_json(const struct TriageModel *model,
                                            const char *report_id,
                                            const char *summary,
                                            const char *description,
                                            size_t k,
                                            uint64_t seed,
                                            char **json_out);

/**
 * Creates a drift monitor. Pass `penalty < 0` or zero sizes to take the
 * defaults.
 *
 * # Safety
 * `out` must be writable.
 */
enum TriageStatus triage_monitor_new(double penalty,
                                     size_t min_segment,
                                     size_t min_history,
                                     struct TriageMonitor **out);

/**
 * # Safety
 * `monitor` must come from [`triage_monitor_new`] or be null.
 */
void triage_monitor_free(struct TriageMonitor *monitor);

/**
 * Appends one day's accuracy. `*raised` is set when this push raises the
 * alert, which happens at most once per monitor; `alert` may be null.
 *
 * # Safety
 * `monitor` must be a live handle; `raised` writable; `alert` writable or null.
 */
enum TriageStatus triage_monitor_push(struct TriageMonitor *monitor,
                                      double accuracy,
                                      bool *raised,
                                      struct TriageAlert *alert);

/**
 * Offline change-point segmentation. Writes up to `capacity` boundary
 * indices (0-based start of each new segment) and the total count to
 * `*count`; returns `BufferTooSmall` if they did not all fit.
 *
 * # Safety
 * `series` must point to `len` doubles; `out` to `capacity` slots (may be
 * null when `capacity` is 0); `count` writable.
 */
enum TriageStatus triage_pelt_segment(const double *series,
                                      size_t len,
                                      double penalty,
                                      size_t min_segment,
                                      size_t *out,
                                      size_t capacity,
                                      size_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRIAGE_H */
