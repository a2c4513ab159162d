#ifndef CAVITY_RESERVOIR_H
#define CAVITY_RESERVOIR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CrStatus {
  CR_STATUS_OK = 0,
  /**
   * Null pointer, invalid UTF-8 or undersized buffer.
   */
  CR_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Bad scenario key, value or preset.
   */
  CR_STATUS_CONFIG = 2,
  /**
   * Truncation guard, state invariant or convergence failure.
   */
  CR_STATUS_NUMERICAL = 3,
  CR_STATUS_IO = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  CR_STATUS_PANIC = 5,
} CrStatus;

/**
 * Opaque result of a completed run.
 */
typedef struct CrRun CrRun;

/**
 * Opaque scenario configuration.
 */
typedef struct CrScenario CrScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *cr_last_error(void);

/**
 * Library version as a static string.
 */
const char *cr_version(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void cr_string_free(char *s);

/**
 * Creates a scenario from a built-in preset (`cat2`, `cat3`, `squeeze`, `banana`).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CrStatus cr_scenario_preset(const char *name, struct CrScenario **out);

/**
 * Parses scenario text (`key = value` lines). A `preset` key selects the base.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CrStatus cr_scenario_parse(const char *text, struct CrScenario **out);

/**
 * Sets one scenario key, e.g. `reservoir.n_samples` to `50`.
 *
 * # Safety
 * `scenario` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum CrStatus cr_scenario_set(struct CrScenario *scenario, const char *key, const char *value);

/**
 * Scenario as text that `cr_scenario_parse` reads back. Free with
 * `cr_string_free`; null on failure.
 *
 * # Safety
 * `scenario` must be a live handle or null.
 */
char *cr_scenario_to_string(const struct CrScenario *scenario);

/**
 * # Safety
 * `scenario` must come from this library and not be freed twice. Null is ignored.
 */
void cr_scenario_free(struct CrScenario *scenario);

/**
 * Runs the scenario from the vacuum, including its configured analyses.
 * Nothing is written to disk.
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
enum CrStatus cr_run_execute(const struct CrScenario *scenario, struct CrRun **out);

/**
 * Writes metrics, state, Wigner grid and summary files into `dir`.
 *
 * # Safety
 * `run` must be a live handle and `dir` a NUL-terminated path.
 */
enum CrStatus cr_run_write(const struct CrRun *run, const char *dir);

/**
 * # Safety
 * `run` must come from this library and not be freed twice. Null is ignored.
 */
void cr_run_free(struct CrRun *run);

/**
 * Mean photon number of the final field state; NaN for a null handle.
 *
 * # Safety
 * `run` must be a live handle or null.
 */
double cr_run_mean_photon(const struct CrRun *run);

/**
 * Purity of the final field state; NaN for a null handle.
 *
 * # Safety
 * `run` must be a live handle or null.
 */
double cr_run_purity(const struct CrRun *run);

/**
 * Fidelity with the fitted cat state; NaN when no fit was requested.
 *
 * # Safety
 * `run` must be a live handle or null.
 */
double cr_run_fidelity(const struct CrRun *run);

/**
 * Squeezing in dB of the final state; NaN when not requested.
 *
 * # Safety
 * `run` must be a live handle or null.
 */
double cr_run_squeezing_db(const struct CrRun *run);

/**
 * Number of atom samples in the run.
 *
 * # Safety
 * `run` must be a live handle or null (returns 0).
 */
uintptr_t cr_run_num_samples(const struct CrRun *run);

/**
 * Per-sample history, `len` entries each: `n_bar`, `purity` and `fidelity`
 * (any of them may be null). `len` must equal `cr_run_num_samples + 1`.
 *
 * # Safety
 * Non-null buffers must hold `len` doubles.
 */
enum CrStatus cr_run_history(const struct CrRun *run,
                             double *n_bar,
                             double *purity,
                             double *fidelity,
                             uintptr_t len);

/**
 * Fock-space dimension of the final state.
 *
 * # Safety
 * `run` must be a live handle or null (returns 0).
 */
uintptr_t cr_run_dim(const struct CrRun *run);

/**
 * Copies the final density matrix, row-major, into `re` and `im`, each of
 * length `dim * dim`.
 *
 * # Safety
 * `re` and `im` must hold `len` doubles.
 */
enum CrStatus cr_run_density_matrix(const struct CrRun *run, double *re, double *im, uintptr_t len);

/**
 * Wigner function of the final state at phase-space point `x + i p`.
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum CrStatus cr_run_wigner_at(const struct CrRun *run, double x, double p, double *out);

/**
 * Text summary of the run (same content as `summary.txt`). Free with
 * `cr_string_free`; null on failure.
 *
 * # Safety
 * `run` must be a live handle or null.
 */
char *cr_run_summary(const struct CrRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAVITY_RESERVOIR_H */
