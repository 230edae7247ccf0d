#ifndef NETAR_H
#define NETAR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum NetarStatus {
  NETAR_STATUS_OK = 0,
  NETAR_STATUS_NULL_POINTER = 1,
  NETAR_STATUS_INVALID_ARGUMENT = 2,
  NETAR_STATUS_DIMENSION = 3,
  NETAR_STATUS_DOMAIN = 4,
  NETAR_STATUS_NOT_STATIONARY = 5,
  NETAR_STATUS_SINGULAR = 6,
  NETAR_STATUS_MISSING_SNAPSHOT = 7,
  NETAR_STATUS_PARSE = 8,
  NETAR_STATUS_IO = 9,
  NETAR_STATUS_TOO_MANY_FAILURES = 10,
  NETAR_STATUS_BUFFER_TOO_SMALL = 11,
  NETAR_STATUS_PANIC = 12,
} NetarStatus;

/**
 * Fitted NAR, LNAR or VAR model.
 */
typedef struct NetarFit NetarFit;

/**
 * Simulated series and network snapshots.
 */
typedef struct NetarPath NetarPath;

/**
 * Simulation scenario: network model, process and innovations.
 */
typedef struct NetarScenario NetarScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *netar_last_error(void);

/**
 * Library version, a static string.
 */
const char *netar_version(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void netar_string_free(char *s);

/**
 * Builds a scenario from JSON (`{"kind": "example1"}`, `{"kind": "custom", ...}`).
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum NetarStatus netar_scenario_from_json(const char *json, struct NetarScenario **out);

/**
 * # Safety
 * `s` must come from [`netar_scenario_from_json`] or be null.
 */
void netar_scenario_free(struct NetarScenario *s);

/**
 * Number of vertices, 0 for a null handle.
 *
 * # Safety
 * `s` must be a live scenario handle or null.
 */
size_t netar_scenario_dim(const struct NetarScenario *s);

/**
 * Simulates `n` observations after `burn_in` discarded steps. Replicate
 * `replicate` of `seed` is the same path the harness would draw.
 *
 * # Safety
 * `s` must be a live scenario handle; `out` must be writable.
 */
enum NetarStatus netar_scenario_simulate(const struct NetarScenario *s,
                                         size_t n,
                                         size_t burn_in,
                                         uint64_t seed,
                                         uint64_t replicate,
                                         struct NetarPath **out);

/**
 * # Safety
 * `p` must come from [`netar_scenario_simulate`] or be null.
 */
void netar_path_free(struct NetarPath *p);

/**
 * Dimension and length of a path.
 *
 * # Safety
 * `p` must be a live path handle; `d` and `n` must be writable.
 */
enum NetarStatus netar_path_shape(const struct NetarPath *p, size_t *d, size_t *n);

/**
 * Copies the `d x n` series into `out` (capacity `cap` values).
 *
 * # Safety
 * `p` must be a live path handle; `out` must hold `cap` doubles.
 */
enum NetarStatus netar_path_series(const struct NetarPath *p, double *out, size_t cap);

/**
 * Copies the `n` network snapshots (`d * d * n` values) into `out`.
 * Snapshot `k` belongs to column `k` of the series.
 *
 * # Safety
 * `p` must be a live path handle; `out` must hold `cap` doubles.
 */
enum NetarStatus netar_path_networks(const struct NetarPath *p, double *out, size_t cap);

/**
 * Fits a method described by JSON (`{"family": "nar", "G": [{"kind": "transpose"}]}`)
 * to the `d x n` series `x` with `n_ads` network snapshots aligned to its
 * columns. A fixed `order` in the JSON is used as is; otherwise BIC picks
 * the order in `1..=p_max`.
 *
 * # Safety
 * `x` must hold `d * n` doubles, `ads` `d * d * n_ads` doubles (may be null
 * when `n_ads` is 0), `method_json` a nul-terminated string, `out` writable.
 */
enum NetarStatus netar_fit(const double *x,
                           size_t d,
                           size_t n,
                           const double *ads,
                           size_t n_ads,
                           const char *method_json,
                           size_t p_max,
                           struct NetarFit **out);

/**
 * # Safety
 * `f` must come from this library or be null.
 */
void netar_fit_free(struct NetarFit *f);

/**
 * Selected lag order, 0 for a null handle.
 *
 * # Safety
 * `f` must be a live fit handle or null.
 */
size_t netar_fit_order(const struct NetarFit *f);

/**
 * Fit as JSON; release with [`netar_string_free`].
 *
 * # Safety
 * `f` must be a live fit handle; `out` must be writable.
 */
enum NetarStatus netar_fit_to_json(const struct NetarFit *f, char **out);

/**
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum NetarStatus netar_fit_from_json(const char *json, struct NetarFit **out);

/**
 * `h`-step forecasts from the end of `x` into `out` (`d * h` values).
 * `policy_json` is `{"kind": "known" | "hold_last" | "per_edge_markov"}`.
 * Snapshots of `ads` beyond column `n - 1` are the known future and are
 * read only under the `known` policy.
 *
 * # Safety
 * Same layout rules as [`netar_fit`]; `out` must hold `cap` doubles.
 */
enum NetarStatus netar_forecast(const struct NetarFit *f,
                                const double *x,
                                size_t d,
                                size_t n,
                                const double *ads,
                                size_t n_ads,
                                const char *policy_json,
                                size_t h,
                                double *out,
                                size_t cap);

/**
 * Runs an experiment config (JSON text) and writes its report files into
 * `out_dir`.
 *
 * # Safety
 * Both arguments must be nul-terminated strings.
 */
enum NetarStatus netar_run_experiment(const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NETAR_H */
