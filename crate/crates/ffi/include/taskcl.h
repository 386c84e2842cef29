#ifndef TASKCL_H
#define TASKCL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every fallible function.
 */
typedef enum TaskclStatus {
  TASKCL_STATUS_OK = 0,
  TASKCL_STATUS_NULL_ARGUMENT = 1,
  TASKCL_STATUS_INVALID_UTF8 = 2,
  TASKCL_STATUS_PARSE_ERROR = 3,
  TASKCL_STATUS_POLARITY_ERROR = 4,
  TASKCL_STATUS_ILLEGAL_STATE = 5,
  TASKCL_STATUS_OUT_OF_RANGE = 6,
  TASKCL_STATUS_BAD_TERM = 7,
  TASKCL_STATUS_ENV_REQUIRED = 8,
  TASKCL_STATUS_ENGINE_ERROR = 9,
  TASKCL_STATUS_PANIC = 10,
} TaskclStatus;

/**
 * An interactive play. Create with `taskcl_session_new`, release with
 * `taskcl_session_free`.
 */
typedef struct TaskclSession TaskclSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses `program` and `query` and runs the play up to the first
 * environment request. `max_steps` of 0 selects the default budget.
 *
 * # Safety
 * `program` and `query` must be nul-terminated strings; `out` must be a
 * valid pointer to write the new handle to.
 */
enum TaskclStatus taskcl_session_new(const char *program,
                                     const char *query,
                                     uint64_t max_steps,
                                     struct TaskclSession **out);

/**
 * The session state as protocol JSON, or null if `session` is null.
 *
 * # Safety
 * `session` must be null or a live handle.
 */
char *taskcl_session_state_json(const struct TaskclSession *session);

/**
 * Answers a pending branch choice.
 *
 * # Safety
 * `session` must be null or a live handle.
 */
enum TaskclStatus taskcl_session_submit_pick(struct TaskclSession *session, size_t pick);

/**
 * Answers a pending term choice with the text of a closed term.
 *
 * # Safety
 * `session` must be null or a live handle; `term` a nul-terminated string.
 */
enum TaskclStatus taskcl_session_submit_term(struct TaskclSession *session, const char *term);

/**
 * # Safety
 * `session` must be null or a handle not yet freed.
 */
void taskcl_session_free(struct TaskclSession *session);

/**
 * Runs a whole play in batch mode. `moves_json` is a move script or null
 * for none. On OK, `*out_json` receives the outcome, bindings and
 * transcript as JSON.
 *
 * # Safety
 * String arguments must be nul-terminated (`moves_json` may be null);
 * `out_json` must be a valid pointer.
 */
enum TaskclStatus taskcl_run(const char *program,
                             const char *query,
                             const char *moves_json,
                             uint64_t max_steps,
                             char **out_json);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void taskcl_string_free(char *s);

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *taskcl_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TASKCL_H */
