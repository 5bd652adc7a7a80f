#ifndef PAINTBRUSH_H
#define PAINTBRUSH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PbStatus {
  PB_STATUS_OK = 0,
  /*
   Null pointer, wrong buffer length or out-of-range parameter.
   */
  PB_STATUS_INVALID_ARGUMENT = 1,
  /*
   Matter basis too small for the state produced.
   */
  PB_STATUS_CUTOFF_INSUFFICIENT = 2,
  /*
   Cavity population reached the largest cutoff tried.
   */
  PB_STATUS_CAVITY_LEAKAGE = 3,
  PB_STATUS_UNREACHABLE_TARGET = 4,
  PB_STATUS_INVALID_TARGET = 5,
  /*
   Integrator or quadrature failure, or a zero-norm state.
   */
  PB_STATUS_NUMERICAL = 6,
  /*
   Malformed waveform JSON.
   */
  PB_STATUS_PARSE = 7,
  /*
   A Rust panic was caught at the boundary.
   */
  PB_STATUS_PANIC = 8,
} PbStatus;

/*
 Matter system together with its cavity.
 */
typedef struct PbSystem PbSystem;

typedef struct PbWaveform PbWaveform;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. Valid until
 the next call into this library from the same thread.
 */
const char *pb_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *pb_version(void);

/*
 Collective spin of `n_atoms` atoms with shift `omega_s` per photon.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum PbStatus pb_system_spin_new(size_t n_atoms,
                                 double omega_s,
                                 double kappa,
                                 double kappa_loss,
                                 struct PbSystem **out);

/*
 Mechanical oscillator truncated at `n_ph_max` phonons.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum PbStatus pb_system_mech_new(double omega_m,
                                 double g0,
                                 size_t n_ph_max,
                                 double kappa,
                                 double kappa_loss,
                                 struct PbSystem **out);

/*
 # Safety
 `sys` must be null or a handle from `pb_system_*_new` not yet freed.
 */
void pb_system_free(struct PbSystem *sys);

/*
 Dimension of the matter basis (length of state vectors).

 # Safety
 `sys` must be a live handle and `out` writable.
 */
enum PbStatus pb_system_dim(const struct PbSystem *sys, size_t *out);

/*
 Double-kick cat drive with branch separation `phi_sep`.

 # Safety
 `sys` must be a live handle and `out` writable.
 */
enum PbStatus pb_waveform_cat(const struct PbSystem *sys,
                              double phi_sep,
                              double rel_phase,
                              double eps_over_omega,
                              struct PbWaveform **out);

/*
 Drive painting the target coefficients `re[k] + i im[k]` onto the default
 initial state: Dicke levels in ascending `m` for spins, displaced Fock
 levels from `k = 0` for mechanics.

 # Safety
 `sys` must be a live handle, `re` and `im` readable for `len` doubles and
 `out` writable.
 */
enum PbStatus pb_waveform_coeffs(const struct PbSystem *sys,
                                 const double *re,
                                 const double *im,
                                 size_t len,
                                 double eps_over_omega,
                                 struct PbWaveform **out);

/*
 Mechanical-qubit drive; fails with `InvalidArgument` for spin systems.

 # Safety
 `sys` must be a live handle and `out` writable.
 */
enum PbStatus pb_waveform_mech_qubit(const struct PbSystem *sys,
                                     double eps_over_omega,
                                     struct PbWaveform **out);

/*
 Parses a waveform from its JSON exchange form.

 # Safety
 `json` must be a NUL-terminated string and `out` writable.
 */
enum PbStatus pb_waveform_from_json(const char *json, struct PbWaveform **out);

/*
 Serializes a waveform; free the string with `pb_string_free`.

 # Safety
 `w` must be a live handle and `out` writable.
 */
enum PbStatus pb_waveform_to_json(const struct PbWaveform *w, char **out);

/*
 End of the drive's shaped part.

 # Safety
 `w` must be a live handle and `out` writable.
 */
enum PbStatus pb_waveform_t_end(const struct PbWaveform *w, double *out);

/*
 # Safety
 `w` must be null or a waveform handle not yet freed.
 */
void pb_waveform_free(struct PbWaveform *w);

/*
 # Safety
 `s` must be null or a string returned by this library not yet freed.
 */
void pb_string_free(char *s);

/*
 Unnormalized heralded matter state for a click at `t_d`, starting from the
 system's default state, written to `re`/`im` (length `pb_system_dim`).
 Its squared norm, the success rate density, goes to `r_s`.

 # Safety
 Handles must be live, `re` and `im` writable for `len` doubles, `r_s`
 writable.
 */
enum PbStatus pb_heralded_state(const struct PbSystem *sys,
                                const struct PbWaveform *w,
                                double t_d,
                                double *re,
                                double *im,
                                size_t len,
                                double *r_s);

/*
 Unconditional transmitted-photon rate `κ⟨c†c⟩` at time `t`.

 # Safety
 Handles must be live and `out` writable.
 */
enum PbStatus pb_transmission_rate(const struct PbSystem *sys,
                                   const struct PbWaveform *w,
                                   double t,
                                   double *out);

/*
 `F_ε R_s/(R_t + R_d/Q)` for a detector of efficiency `q` and dark rate `r_d`.

 # Safety
 `out` must be writable.
 */
enum PbStatus pb_fidelity_min(double f_eps,
                              double r_s,
                              double r_t,
                              double q,
                              double r_d,
                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PAINTBRUSH_H */
