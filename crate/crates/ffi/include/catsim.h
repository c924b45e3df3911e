#ifndef CATSIM_H
#define CATSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Model selector for [`catsim_run`].
 */
typedef enum CatsimModel {
  CATSIM_MODEL_REDUCED = 0,
  CATSIM_MODEL_FULL = 1,
} CatsimModel;

typedef enum CatsimStatus {
  CATSIM_STATUS_OK = 0,
  CATSIM_STATUS_NULL_POINTER = 1,
  CATSIM_STATUS_INVALID_ARGUMENT = 2,
  CATSIM_STATUS_REGIME = 3,
  CATSIM_STATUS_TRUNCATION = 4,
  CATSIM_STATUS_INTEGRATION = 5,
  CATSIM_STATUS_PHYSICALITY = 6,
  CATSIM_STATUS_PANIC = 7,
  CATSIM_STATUS_OTHER = 8,
} CatsimStatus;

/**
 * Opaque system parameters.
 */
typedef struct CatsimParams CatsimParams;

/**
 * Opaque finished run.
 */
typedef struct CatsimRun CatsimRun;

typedef struct CatsimRates {
  double gamma1;
  double gamma2;
  double kerr;
  double gamma_lin;
  double gamma_dec;
  double omega_m_dressed;
  double beta_de;
  /**
   * 0 sideband resolved, 1 not.
   */
  int32_t regime;
} CatsimRates;

typedef struct CatsimSummary {
  double w_min;
  double t_min_seconds;
  double gamma2_t_min;
  double fidelity_max;
  double root_fidelity_max;
  double final_parity;
  double final_n_mech;
  double final_n_cav;
  size_t n_mech;
  size_t samples;
} CatsimSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread (empty if none). Owned by the
 * library.
 */
const char *catsim_last_error(void);

/**
 * Library version, a static string.
 */
const char *catsim_version(void);

/**
 * Reference parameter set (g₀/2π = 1 MHz, ω_m/2π = 15 MHz, κ/2π = 100 kHz)
 * with the mechanical drive off. Never fails; free with [`catsim_params_free`].
 */
struct CatsimParams *catsim_params_reference(void);

/**
 * Parameters from `/2π` frequencies in Hz, drive off.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum CatsimStatus catsim_params_new(double g0_hz,
                                    double omega_m_hz,
                                    double gamma_hz,
                                    double kappa_hz,
                                    double nbar_b,
                                    double n_p,
                                    struct CatsimParams **out);

/**
 * Sets the mechanical drive so the dissipative cat has real size `beta`.
 *
 * # Safety
 * `params` must come from this library and not be freed.
 */
enum CatsimStatus catsim_params_set_beta(struct CatsimParams *params, double beta);

/**
 * # Safety
 * `params` must come from this library (or be null) and is invalid afterwards.
 */
void catsim_params_free(struct CatsimParams *params);

/**
 * Derived rates in the sideband-resolved formulas.
 *
 * # Safety
 * `params` must be a live handle and `out` writable.
 */
enum CatsimStatus catsim_rates(const struct CatsimParams *params, struct CatsimRates *out);

/**
 * Evolves from the ground state for `t_end_gamma2` units of 1/Γ₂ with
 * `samples_per_unit` samples per unit. Fidelities refer to the even cat
 * of the size set by the drive (see [`catsim_params_set_beta`]). Default truncations are used.
 *
 * # Safety
 * `params` must be a live handle and `out` writable.
 */
enum CatsimStatus catsim_run(const struct CatsimParams *params,
                             enum CatsimModel model,
                             double t_end_gamma2,
                             size_t samples_per_unit,
                             struct CatsimRun **out);

/**
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum CatsimStatus catsim_run_summary(const struct CatsimRun *run, struct CatsimSummary *out);

/**
 * Copies `min(len, samples)` values of a timeseries column into `buf`.
 * Columns: `t_seconds`, `gamma2_t`, `n_cav`, `n_mech`, `parity`, `w_min`,
 * `fidelity_even_cat`. `written` receives the count.
 *
 * # Safety
 * `run` must be a live handle, `name` a NUL-terminated string, `buf` valid
 * for `len` doubles and `written` writable.
 */
enum CatsimStatus catsim_run_series(const struct CatsimRun *run,
                                    const char *name,
                                    double *buf,
                                    size_t len,
                                    size_t *written);

/**
 * # Safety
 * `run` must come from this library (or be null) and is invalid afterwards.
 */
void catsim_run_free(struct CatsimRun *run);

/**
 * Analytic Wigner function of a pure cat with real size `beta` at `(x, p)`
 * (`α = x + ip`, vacuum variance 1/4). Returns NaN for an odd cat at
 * `beta = 0`.
 */
double catsim_cat_wigner(double beta, bool odd, double x, double p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CATSIM_H */
