#ifndef FRACGROW_H
#define FRACGROW_H

/* Generated by cbindgen from the fracgrow-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes mirroring the CLI exit-code contract (2 = configuration,
// 3 = solver, 4 = assumption refusal).
typedef enum FracgrowStatus {
  FRACGROW_STATUS_OK = 0,
  FRACGROW_STATUS_NULL_POINTER = 1,
  FRACGROW_STATUS_CONFIG_ERROR = 2,
  FRACGROW_STATUS_SOLVER_ERROR = 3,
  FRACGROW_STATUS_ASSUMPTION_ERROR = 4,
  FRACGROW_STATUS_UTF8_ERROR = 5,
  FRACGROW_STATUS_INTERNAL_ERROR = 6,
} FracgrowStatus;

// Field selector for trajectory accessors.
typedef enum FracgrowField {
  FRACGROW_FIELD_CHEMICAL_POTENTIAL = 0,
  FRACGROW_FIELD_TUMOR_FRACTION = 1,
  FRACGROW_FIELD_NUTRIENT = 2,
  FRACGROW_FIELD_SELECTION = 3,
} FracgrowField;

// Opaque parsed configuration handle.
typedef struct FracgrowConfig FracgrowConfig;

// Opaque trajectory handle.
typedef struct FracgrowTrajectory FracgrowTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the last error message of this thread into `buffer` (NUL
// terminated, truncated to `capacity`). Returns the full message length
// in bytes, excluding the terminator; call with a null buffer to query
// the required capacity.
//
// # Safety
// `buffer` must either be null or point to at least `capacity` writable
// bytes.
size_t fracgrow_last_error_message(char *buffer, size_t capacity);

// Static version string of the underlying library.
const char *fracgrow_version(void);

// Parse a JSON configuration document into an opaque handle.
//
// # Safety
// `json` must be a valid NUL-terminated string; `out` must point to a
// writable pointer slot. On success the caller owns the handle and must
// release it with [`fracgrow_config_free`].
enum FracgrowStatus fracgrow_config_parse(const char *json, struct FracgrowConfig **out);

// Release a configuration handle. Passing null is a no-op.
//
// # Safety
// `config` must be null or a pointer previously returned by
// [`fracgrow_config_parse`] that has not been freed.
void fracgrow_config_free(struct FracgrowConfig *config);

// Run the configured simulation into an opaque trajectory handle.
//
// # Safety
// `config` must be a live handle from [`fracgrow_config_parse`]; `out`
// must point to a writable pointer slot. On success the caller owns the
// trajectory and must release it with [`fracgrow_trajectory_free`].
enum FracgrowStatus fracgrow_simulate(const struct FracgrowConfig *config,
                                      struct FracgrowTrajectory **out);

// Release a trajectory handle. Passing null is a no-op.
//
// # Safety
// `trajectory` must be null or a pointer previously returned by
// [`fracgrow_simulate`] that has not been freed.
void fracgrow_trajectory_free(struct FracgrowTrajectory *trajectory);

// Number of stored states (time levels).
//
// # Safety
// `trajectory` must be a live handle; null yields 0.
size_t fracgrow_trajectory_states(const struct FracgrowTrajectory *trajectory);

// Number of spectral coefficients of one field.
//
// # Safety
// `trajectory` must be a live handle; null yields 0.
size_t fracgrow_trajectory_modes(const struct FracgrowTrajectory *trajectory,
                                 enum FracgrowField field);

// Time of the `state`-th stored level.
//
// # Safety
// `trajectory` must be a live handle and `out` a writable double slot.
enum FracgrowStatus fracgrow_trajectory_time(const struct FracgrowTrajectory *trajectory,
                                             size_t state,
                                             double *out);

// Copy the spectral coefficients of one field at one state into
// `buffer`. `len` must equal the field's mode count.
//
// # Safety
// `trajectory` must be a live handle and `buffer` must point to at least
// `len` writable doubles.
enum FracgrowStatus fracgrow_trajectory_coefficients(const struct FracgrowTrajectory *trajectory,
                                                     size_t state,
                                                     enum FracgrowField field,
                                                     double *buffer,
                                                     size_t len);

// Serialize the a-priori-estimate report of a trajectory as JSON.
//
// # Safety
// `trajectory` must be a live handle; `out` receives an owned string to
// release with [`fracgrow_string_free`].
enum FracgrowStatus fracgrow_estimate_report_json(const struct FracgrowTrajectory *trajectory,
                                                  char **out);

// Serialize the per-equation residual report of a trajectory as JSON.
//
// # Safety
// Same contract as [`fracgrow_estimate_report_json`].
enum FracgrowStatus fracgrow_residual_report_json(const struct FracgrowTrajectory *trajectory,
                                                  char **out);

// Serialize the recomputed structural-assumption flags of a configuration
// as JSON.
//
// # Safety
// `config` must be a live handle; `out` receives an owned string to
// release with [`fracgrow_string_free`].
enum FracgrowStatus fracgrow_check_assumptions_json(const struct FracgrowConfig *config,
                                                    char **out);

// Run the built-in invariant suites and serialize the results as JSON.
//
// # Safety
// `out` must point to a writable pointer slot; the returned string is
// released with [`fracgrow_string_free`].
enum FracgrowStatus fracgrow_verify_json(char **out);

// Release a string allocated by this library. Passing null is a no-op.
//
// # Safety
// `s` must be null or an owned string returned by one of the `_json`
// functions, not yet freed.
void fracgrow_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACGROW_H */
