#ifndef POINTSELECT_H
#define POINTSELECT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Button codes accepted by [`ps_session_step`].
 */
#define PS_BUTTON_NONE -1

#define PS_BUTTON_ACTIVATE 0

#define PS_BUTTON_UP 1

#define PS_BUTTON_DOWN 2

#define PS_BUTTON_LEFT 3

#define PS_BUTTON_RIGHT 4

#define PS_BUTTON_CONFIRM 5

#define PS_BUTTON_CANCEL 6

/**
 * Replay outcomes reported by [`ps_log_replay`].
 */
#define PS_REPLAY_VERIFIED 0

#define PS_REPLAY_DIVERGED 1

#define PS_REPLAY_HASH_MISMATCH 2

#define PS_REPLAY_SCENARIO_MISMATCH 3

typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_ARGUMENT = 1,
  PS_STATUS_INVALID_ARGUMENT = 2,
  PS_STATUS_PARSE = 3,
  PS_STATUS_WORLD = 4,
  PS_STATUS_RUNTIME = 5,
  PS_STATUS_IO = 6,
  PS_STATUS_PANIC = 7,
} PsStatus;

typedef struct PsLog PsLog;

typedef struct PsScenario PsScenario;

typedef struct PsSession PsSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *ps_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *ps_version(void);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void ps_string_free(char *s);

/**
 * Generates a scenario with default parameters; `length_m <= 0` keeps the
 * default course length.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PsStatus ps_scenario_generate(uint64_t seed, double length_m, struct PsScenario **out);

/**
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum PsStatus ps_scenario_from_json(const char *json, struct PsScenario **out);

/**
 * # Safety
 * `scenario` and `out` must be valid pointers.
 */
enum PsStatus ps_scenario_to_json(const struct PsScenario *scenario, char **out);

/**
 * # Safety
 * `scenario` and `out` must be valid pointers.
 */
enum PsStatus ps_scenario_building_count(const struct PsScenario *scenario, size_t *out);

/**
 * Number of placement-constraint violations.
 *
 * # Safety
 * `scenario` and `out` must be valid pointers.
 */
enum PsStatus ps_scenario_validate(const struct PsScenario *scenario, size_t *out);

/**
 * Resolves a world-frame ray with default resolver parameters. `out_id` is
 * set to -1 when nothing lies within range and angle.
 *
 * # Safety
 * `origin` and `dir` must point to 3 doubles; `scenario` and `out_id` must
 * be valid.
 */
enum PsStatus ps_scenario_resolve(const struct PsScenario *scenario,
                                  const double *origin,
                                  const double *dir,
                                  double origin_s_m,
                                  int64_t *out_id);

/**
 * # Safety
 * `scenario` must come from this library or be null.
 */
void ps_scenario_free(struct PsScenario *scenario);

/**
 * Starts a live session; a null `config_json` selects the defaults.
 *
 * # Safety
 * `config_json` must be null or nul-terminated; `out` must be valid.
 */
enum PsStatus ps_session_new(const char *config_json, struct PsSession **out);

/**
 * Advances one tick. Inputs apply in the order controls, hand, button.
 * `hand_tip` and `hand_joint3` are both null or both point to 3 doubles in
 * the cabin frame; `button` is one of the `PS_BUTTON_*` codes.
 *
 * # Safety
 * Pointers must be valid as described.
 */
enum PsStatus ps_session_step(struct PsSession *session,
                              double steer_rad,
                              double accel_mps2,
                              const double *hand_tip,
                              const double *hand_joint3,
                              int32_t button);

/**
 * # Safety
 * `session` and `out` must be valid pointers.
 */
enum PsStatus ps_session_tick(const struct PsSession *session, uint64_t *out);

/**
 * # Safety
 * `session` and `out` must be valid pointers.
 */
enum PsStatus ps_session_finished(const struct PsSession *session, bool *out);

/**
 * Current state as a protocol `frame` message.
 *
 * # Safety
 * `session` and `out` must be valid pointers.
 */
enum PsStatus ps_session_frame_json(const struct PsSession *session, char **out);

/**
 * Seals the session log. The session handle stays valid and may keep
 * stepping; the returned log is a snapshot.
 *
 * # Safety
 * `session` and `out` must be valid pointers.
 */
enum PsStatus ps_session_log(const struct PsSession *session, struct PsLog **out);

/**
 * # Safety
 * `session` must come from this library or be null.
 */
void ps_session_free(struct PsSession *session);

/**
 * Runs a headless session with the synthetic agents.
 *
 * # Safety
 * `config_json` must be null or nul-terminated; `out` must be valid.
 */
enum PsStatus ps_run_session(const char *config_json, struct PsLog **out);

/**
 * # Safety
 * `path` must be nul-terminated; `out` must be valid.
 */
enum PsStatus ps_log_read(const char *path, struct PsLog **out);

/**
 * # Safety
 * `log` must be valid; `path` nul-terminated.
 */
enum PsStatus ps_log_write(const struct PsLog *log, const char *path);

/**
 * # Safety
 * `log` and `out` must be valid pointers.
 */
enum PsStatus ps_log_record_count(const struct PsLog *log, size_t *out);

/**
 * FNV-1a 64 hash over the canonical record lines.
 *
 * # Safety
 * `log` and `out` must be valid pointers.
 */
enum PsStatus ps_log_hash(const struct PsLog *log, uint64_t *out);

/**
 * Re-simulates the log. `out_verdict` receives a `PS_REPLAY_*` code and
 * `out_tick` the divergent tick (0 when verified).
 *
 * # Safety
 * All pointers must be valid.
 */
enum PsStatus ps_log_replay(const struct PsLog *log, int32_t *out_verdict, uint64_t *out_tick);

/**
 * Metrics report as JSON.
 *
 * # Safety
 * `log` and `out` must be valid pointers.
 */
enum PsStatus ps_log_report_json(const struct PsLog *log, char **out);

/**
 * # Safety
 * `log` must come from this library or be null.
 */
void ps_log_free(struct PsLog *log);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POINTSELECT_H */
