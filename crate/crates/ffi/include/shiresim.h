#ifndef SHIRESIM_H
#define SHIRESIM_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Error codes returned by every fallible function.
 */
typedef enum ShiresimStatus {
  ShiresimStatus_Ok = 0,
  ShiresimStatus_NullArgument = 1,
  ShiresimStatus_InvalidUtf8 = 2,
  ShiresimStatus_ParseError = 3,
  ShiresimStatus_ValidationError = 4,
  ShiresimStatus_RunFailed = 5,
  ShiresimStatus_NotRun = 6,
  ShiresimStatus_BufferTooSmall = 7,
} ShiresimStatus;

/**
 * Opaque simulation handle.
 */
typedef struct ShiresimSim ShiresimSim;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Create a simulation from a scenario file. On success writes a handle to
 * `out`; the caller frees it with `shiresim_free`.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string, `out` a valid pointer.
 */
enum ShiresimStatus shiresim_new_from_file(const char *path, struct ShiresimSim **out);

/**
 * Create a simulation from scenario TOML text.
 *
 * # Safety
 * `toml_text` must be a valid NUL-terminated string, `out` a valid pointer.
 */
enum ShiresimStatus shiresim_new_from_toml(const char *toml_text, struct ShiresimSim **out);

/**
 * Override the number of logical processes.
 *
 * # Safety
 * `sim` must be a live handle from a constructor.
 */
enum ShiresimStatus shiresim_set_lps(struct ShiresimSim *sim, uint32_t n_lps);

/**
 * Override the global seed.
 *
 * # Safety
 * `sim` must be a live handle from a constructor.
 */
enum ShiresimStatus shiresim_set_seed(struct ShiresimSim *sim, uint64_t seed);

/**
 * Override the number of coarse steps.
 *
 * # Safety
 * `sim` must be a live handle from a constructor.
 */
enum ShiresimStatus shiresim_set_steps(struct ShiresimSim *sim, uint64_t steps);

/**
 * Enable or disable adaptive migration (nonzero = enabled).
 *
 * # Safety
 * `sim` must be a live handle from a constructor.
 */
enum ShiresimStatus shiresim_set_migration(struct ShiresimSim *sim, int32_t enabled);

/**
 * Run the simulation to completion. Tracing is forced off for embedded use.
 *
 * # Safety
 * `sim` must be a live handle from a constructor.
 */
enum ShiresimStatus shiresim_run(struct ShiresimSim *sim);

/**
 * Copy the hex digest of a finished run (64 chars + NUL) into `buf`.
 *
 * # Safety
 * `sim` must be a live handle; `buf` must point to at least `len` bytes.
 */
enum ShiresimStatus shiresim_digest_hex(const struct ShiresimSim *sim, char *buf, uintptr_t len);

/**
 * Total coarse steps the configured scenario will run.
 *
 * # Safety
 * `sim` must be a live handle from a constructor.
 */
uint64_t shiresim_total_steps(const struct ShiresimSim *sim);

/**
 * Message of the last run error on this handle, or NULL. Valid until the
 * next call on the same handle.
 *
 * # Safety
 * `sim` must be a live handle from a constructor.
 */
const char *shiresim_last_error(const struct ShiresimSim *sim);

/**
 * Stable name of a status code.
 */
const char *shiresim_error_name(enum ShiresimStatus status);

/**
 * Destroy a handle. NULL is a no-op.
 *
 * # Safety
 * `sim` must be NULL or a handle not freed before.
 */
void shiresim_free(struct ShiresimSim *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHIRESIM_H */
