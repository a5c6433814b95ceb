/* C interface to the ktup Floquet k-tupling toolkit. */

#ifndef KTUP_H
#define KTUP_H

/* Generated by cbindgen; edit the Rust source in crates/ffi instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum {
  KTUP_STATUS_OK = 0,
  KTUP_STATUS_NULL_POINTER = 1,
  KTUP_STATUS_INVALID_ARGUMENT = 2,
  KTUP_STATUS_NOT_FOUND = 3,
  KTUP_STATUS_INSUFFICIENT_DATA = 4,
  KTUP_STATUS_CONTRACT_VIOLATION = 5,
  KTUP_STATUS_CALIBRATION_FAILURE = 6,
  KTUP_STATUS_PANIC = 7,
  KTUP_STATUS_INTERNAL = 8,
} KtupStatus;

/**
 * Opaque six-level NV model handle.
 */
typedef struct KtupNv KtupNv;

/**
 * Opaque driven two-level system handle.
 */
typedef struct KtupTls KtupTls;

/**
 * Root of the k-tupling condition qed = j/k.
 */
typedef struct {
  uint32_t j;
  uint32_t k;
  /**
   * MHz for two-level roots, mV for NV roots.
   */
  double amplitude;
  double nu_d_mhz;
  double residual;
  double certificate_fidelity;
} KtupRoot;

/**
 * Plain-data mirror of the NV model parameters.
 */
typedef struct {
  double d_zfs_mhz;
  double b_z_gauss;
  double gamma_e_mhz_per_g;
  double gamma_n_mhz_per_g;
  double a_par_mhz;
  double a_perp_mhz;
  double gamma_x_mhz_per_g;
  double amplitude_calibration_mhz_per_mv;
  /**
   * 0 = drop the nuclear drive term, anything else = keep it.
   */
  uint8_t nuclear_drive;
} KtupNvParams;

/**
 * Static eigenstructure summary of the NV model.
 */
typedef struct {
  /**
   * Eigenenergies in MHz, ascending.
   */
  double energies_mhz[6];
  double alpha_sq;
  double delta0_selected_mhz;
  /**
   * Nonzero when the hybridizing pair is exactly degenerate.
   */
  int32_t at_crossing;
} KtupNvEigen;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the underlying crate; static, do not free.
 */
const char *ktup_version(void);

/**
 * Message for the most recent error on this thread; valid until the next
 * ktup call on the same thread. Do not free.
 */
const char *ktup_last_error_message(void);

/**
 * Create a two-level handle with level spacing `delta0_mhz` (> 0).
 * Returns NULL on invalid input.
 */
KtupTls *ktup_tls_new(double delta0_mhz);

/**
 * Free a two-level handle.
 *
 * # Safety
 * `handle` must be NULL or a pointer returned by `ktup_tls_new` that has
 * not been freed yet.
 */
void ktup_tls_free(KtupTls *handle);

/**
 * Configure the integrator: scheme 0 = 4th-order commutator-free
 * (default), 1 = exponential midpoint; `steps_per_period` >= 64;
 * `verify` != 0 re-integrates with doubled steps as a convergence check.
 *
 * # Safety
 * `handle` must be a live pointer from `ktup_tls_new`.
 */
KtupStatus ktup_tls_set_integrator(KtupTls *handle,
                                   uint32_t steps_per_period,
                                   int32_t scheme,
                                   uint8_t verify);

/**
 * Folded quasi-energy difference |eps2 - eps1| / nu_d in [0, 1).
 *
 * # Safety
 * `handle` must be a live pointer from `ktup_tls_new`; `out` must point to
 * a writable f64.
 */
KtupStatus ktup_tls_qed(const KtupTls *handle, double amplitude_mhz, double nu_d_mhz, double *out);

/**
 * Locate the smallest-amplitude root of qed = j/k in [a_min, a_max] MHz.
 * `grid_points` = 0 uses the default grid density (2048).
 *
 * # Safety
 * `handle` must be a live pointer from `ktup_tls_new`; `out` must point to
 * a writable KtupRoot.
 */
KtupStatus ktup_tls_find_amplitude(const KtupTls *handle,
                                   uint32_t j,
                                   uint32_t k,
                                   double nu_d_mhz,
                                   double a_min_mhz,
                                   double a_max_mhz,
                                   uint32_t grid_points,
                                   KtupRoot *out);

/**
 * Stroboscopic <sigma_z> from the ground state: writes n_values entries
 * for n = 1..=n_values drive periods.
 *
 * # Safety
 * `handle` must be a live pointer from `ktup_tls_new`; `out` must point to
 * a writable buffer of at least `n_values` f64.
 */
KtupStatus ktup_tls_stroboscopic_sigma_z(const KtupTls *handle,
                                         double amplitude_mhz,
                                         double nu_d_mhz,
                                         uintptr_t n_values,
                                         double *out);

/**
 * Fill `out` with the default NV model parameters.
 *
 * # Safety
 * `out` must point to a writable KtupNvParams.
 */
KtupStatus ktup_nv_default_params(KtupNvParams *out);

/**
 * Create a six-level NV handle. Returns NULL on invalid parameters.
 *
 * # Safety
 * `params` must be NULL (use defaults) or point to a readable
 * KtupNvParams.
 */
KtupNv *ktup_nv_new(const KtupNvParams *params);

/**
 * Free an NV handle.
 *
 * # Safety
 * `handle` must be NULL or a pointer returned by `ktup_nv_new` that has
 * not been freed yet.
 */
void ktup_nv_free(KtupNv *handle);

/**
 * Static eigenstructure of the NV model: energies, hybridization, and the
 * selected transition spacing.
 *
 * # Safety
 * `handle` must be a live pointer from `ktup_nv_new`; `out` must point to
 * a writable KtupNvEigen.
 */
KtupStatus ktup_nv_eigenstructure(const KtupNv *handle, KtupNvEigen *out);

/**
 * Renormalized (dimensionless) drive amplitude of the selected transition
 * for a programmed amplitude in mV.
 *
 * # Safety
 * `handle` must be a live pointer from `ktup_nv_new`; `out` must point to
 * a writable f64.
 */
KtupStatus ktup_nv_renormalized_amplitude(const KtupNv *handle, double a_rf_mv, double *out);

/**
 * Locate the k-tupling amplitude of the NV's selected transition, in mV,
 * searching [a_min_mv, a_max_mv]. `grid_points` = 0 uses the default.
 *
 * # Safety
 * `handle` must be a live pointer from `ktup_nv_new`; `out` must point to
 * a writable KtupRoot.
 */
KtupStatus ktup_nv_find_amplitude(const KtupNv *handle,
                                  uint32_t j,
                                  uint32_t k,
                                  double a_min_mv,
                                  double a_max_mv,
                                  uint32_t grid_points,
                                  KtupRoot *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KTUP_H */
