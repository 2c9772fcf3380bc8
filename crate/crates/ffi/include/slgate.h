#ifndef SLGATE_H
#define SLGATE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SlgStatus {
  SLG_STATUS_OK = 0,
  SLG_STATUS_NULL_POINTER = 1,
  /**
   * bad input: parameters, files, parse errors
   */
  SLG_STATUS_INVALID_ARGUMENT = 2,
  /**
   * the physics or numerics failed for valid input
   */
  SLG_STATUS_NUMERICAL = 3,
  SLG_STATUS_PANIC = 4,
} SlgStatus;

typedef struct SlgMergeModel SlgMergeModel;

typedef struct SlgPulse SlgPulse;

typedef struct SlgSpecies SlgSpecies;

typedef struct SlgSuperlattice SlgSuperlattice;

/**
 * Single-qubit addressing of one well.
 */
typedef struct SlgAddressing {
  /**
   * rad/s
   */
  double min_detuning;
  double detuning_over_eta_er;
  /**
   * s
   */
  double gate_time;
  double success_probability;
  uint32_t target_site;
  uint32_t limiting_site;
  /**
   * nonzero when wells merged or failed to pair
   */
  uint8_t reduced;
} SlgAddressing;

/**
 * Fidelities, gate times (s) and scattering of one merge pulse.
 */
typedef struct SlgGateReport {
  double f_target;
  double f_all;
  double f_error;
  double merge_phase;
  /**
   * J
   */
  double u_int;
  double t_swap;
  double t_sqrt_swap;
  double p_sc_swap;
  double p_sc_sqrt_swap;
  /**
   * nonzero when the merge failed; the reason is in the last error
   */
  uint8_t failed;
} SlgGateReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *slg_last_error(void);

/**
 * Library version, static string.
 */
const char *slg_version(void);

/**
 * Built-in Rb-87 data.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum SlgStatus slg_species_rb87(struct SlgSpecies **out_species);

/**
 * Species from a TOML file.
 *
 * # Safety
 * `file` must be null or a nul-terminated string; `out` null or writable.
 */
enum SlgStatus slg_species_from_file(const char *file, struct SlgSpecies **out_species);

/**
 * # Safety
 * `species` must be null or a handle not yet freed.
 */
void slg_species_free(struct SlgSpecies *species);

/**
 * Two-color lattice. Polarizations are -1, 0 or +1.
 *
 * # Safety
 * `species` must be a live handle; `out` null or writable.
 */
enum SlgStatus slg_superlattice_new(const struct SlgSpecies *species,
                                    double lambda1,
                                    double lambda2,
                                    double eta,
                                    double a,
                                    int32_t pol1,
                                    int32_t pol2,
                                    struct SlgSuperlattice **out_lattice);

/**
 * # Safety
 * `lattice` must be null or a handle not yet freed.
 */
void slg_superlattice_free(struct SlgSuperlattice *lattice);

/**
 * Potential in J at `x` (m) for qubit state 0 or 1.
 *
 * # Safety
 * `lattice` must be a live handle; `value` null or writable.
 */
enum SlgStatus slg_superlattice_potential(const struct SlgSuperlattice *lattice,
                                          uint32_t qubit,
                                          double x,
                                          double *value);

/**
 * Microwave addressing of well `target`, or the deepest well when
 * `target` is negative.
 *
 * # Safety
 * `lattice` must be a live handle; `result` null or writable.
 */
enum SlgStatus slg_addressing_analyze(const struct SlgSuperlattice *lattice,
                                      double p_t,
                                      int32_t target,
                                      struct SlgAddressing *result);

/**
 * Merge model for `lambda2 = lambda1 (n - 1)/n`. Zero for `grid_points`,
 * `dt` or `interior_knots` selects the default.
 *
 * # Safety
 * `species` must be a live handle; `out` null or writable.
 */
enum SlgStatus slg_merge_model_new(const struct SlgSpecies *species,
                                   double lambda1,
                                   uint32_t cycles,
                                   double a2,
                                   uint32_t grid_points,
                                   double dt,
                                   uint32_t interior_knots,
                                   struct SlgMergeModel **out_model);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void slg_merge_model_free(struct SlgMergeModel *model);

/**
 * Pulse with `count >= 2` uniform knots over `tau` seconds.
 *
 * # Safety
 * `a1` and `phi` must point to `count` values; `out` null or writable.
 */
enum SlgStatus slg_pulse_new(double tau,
                             uintptr_t count,
                             const double *a1,
                             const double *phi,
                             struct SlgPulse **out_pulse);

/**
 * Default starting pulse of duration `tau` for this model.
 *
 * # Safety
 * `model` must be a live handle; `out` null or writable.
 */
enum SlgStatus slg_pulse_seed(const struct SlgMergeModel *model,
                              double tau,
                              struct SlgPulse **out_pulse);

/**
 * Pulse from a file written by `slgate merge`.
 *
 * # Safety
 * `file` must be null or a nul-terminated string; `out` null or writable.
 */
enum SlgStatus slg_pulse_read(const char *file, struct SlgPulse **out_pulse);

/**
 * Duration in s, or NaN for a null handle.
 *
 * # Safety
 * `pulse` must be null or a live handle.
 */
double slg_pulse_tau(const struct SlgPulse *pulse);

/**
 * # Safety
 * `pulse` must be null or a handle not yet freed.
 */
void slg_pulse_free(struct SlgPulse *pulse);

/**
 * Forward merge: writes `F_target` and `F_all`. Cheaper than the full report.
 *
 * # Safety
 * Handles must be live; outputs null or writable.
 */
enum SlgStatus slg_merge_fidelity(const struct SlgMergeModel *model,
                                  const struct SlgPulse *pulse,
                                  double *f_target,
                                  double *f_all);

/**
 * Full gate report including the error-box worst case.
 *
 * # Safety
 * Handles must be live; `report` null or writable.
 */
enum SlgStatus slg_gate_report(const struct SlgMergeModel *model,
                               const struct SlgPulse *pulse,
                               struct SlgGateReport *report);

/**
 * Retro-reflector phase `2 pi d dnu / c` in rad.
 *
 * # Safety
 * `phase` must be null or writable.
 */
enum SlgStatus slg_frequency_to_phase(double delta_nu, double distance, double *phase);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLGATE_H */
