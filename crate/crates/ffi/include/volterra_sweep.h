#ifndef VOLTERRA_SWEEP_H
#define VOLTERRA_SWEEP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum VsStatus {
  VS_STATUS_OK = 0,
  VS_STATUS_NULL_POINTER = 1,
  VS_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Scenario text failed to parse or validate.
   */
  VS_STATUS_PARSE = 3,
  /**
   * The solver rejected the problem or did not converge.
   */
  VS_STATUS_SOLVER = 4,
  /**
   * Caller buffer is too small.
   */
  VS_STATUS_BUFFER_TOO_SMALL = 5,
  VS_STATUS_OUT_OF_RANGE = 6,
  VS_STATUS_PANIC = 7,
} VsStatus;

/**
 * Time-stepping scheme selector.
 */
typedef enum VsScheme {
  /**
   * Use the scheme named in the scenario.
   */
  VS_SCHEME_DEFAULT = 0,
  VS_SCHEME_CATCHING_UP = 1,
  VS_SCHEME_FIXED_POINT = 2,
} VsScheme;

/**
 * Opaque scenario handle.
 */
typedef struct VsScenario VsScenario;

/**
 * Opaque trajectory handle.
 */
typedef struct VsTrajectory VsTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a scenario from TOML text.
 *
 * # Safety
 * `source` must be a NUL-terminated string; `out` must be writable.
 */
enum VsStatus vs_scenario_from_toml(const char *source, struct VsScenario **out);

/**
 * Loads one of the shipped scenarios by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum VsStatus vs_scenario_builtin(const char *name, struct VsScenario **out);

/**
 * Releases a scenario; null is ignored.
 *
 * # Safety
 * `scenario` must come from this library and not be used afterwards.
 */
void vs_scenario_free(struct VsScenario *scenario);

/**
 * State dimension of a scenario.
 *
 * # Safety
 * Pointers must be valid.
 */
enum VsStatus vs_scenario_dimension(const struct VsScenario *scenario, uintptr_t *out);

/**
 * Solves a scenario. `steps == 0` keeps the scenario's grid.
 *
 * # Safety
 * Pointers must be valid; `out` receives a handle to release with [`vs_trajectory_free`].
 */
enum VsStatus vs_solve(const struct VsScenario *scenario,
                       enum VsScheme scheme,
                       uintptr_t steps,
                       struct VsTrajectory **out);

/**
 * Releases a trajectory; null is ignored.
 *
 * # Safety
 * `traj` must come from this library and not be used afterwards.
 */
void vs_trajectory_free(struct VsTrajectory *traj);

/**
 * Number of nodes; 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or valid.
 */
uintptr_t vs_trajectory_len(const struct VsTrajectory *traj);

/**
 * State dimension; 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or valid.
 */
uintptr_t vs_trajectory_dim(const struct VsTrajectory *traj);

/**
 * Copies node `k`: its time into `*t` and its state into `state[0..len)`.
 *
 * # Safety
 * `state` must hold `len` doubles; `t` must be writable.
 */
enum VsStatus vs_trajectory_node(const struct VsTrajectory *traj,
                                 uintptr_t k,
                                 double *t,
                                 double *state,
                                 uintptr_t len);

/**
 * Envelope margins `min(r − ‖x‖)` and `min(θ − ‖d‖)` of a trajectory of the scenario.
 *
 * # Safety
 * Pointers must be valid.
 */
enum VsStatus vs_envelope_margins(const struct VsScenario *scenario,
                                  const struct VsTrajectory *traj,
                                  double *r_margin,
                                  double *theta_margin);

/**
 * Runs the built-in Gronwall dominance cases; `*passed` is 1 when all pass.
 *
 * # Safety
 * `passed` must be writable.
 */
enum VsStatus vs_gronwall_selftest(int32_t *passed);

/**
 * Copies the last error message of this thread (NUL-terminated, truncated to `len`).
 * Returns the full message length excluding the terminator.
 *
 * # Safety
 * `buf` must hold `len` bytes, or be null with `len == 0`.
 */
uintptr_t vs_last_error_message(char *buf, uintptr_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vs_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOLTERRA_SWEEP_H */
