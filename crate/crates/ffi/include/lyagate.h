/* SPDX-License-Identifier: Apache-2.0 */

#ifndef LYAGATE_H
#define LYAGATE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LyagateStatus {
  LYAGATE_STATUS_OK = 0,
  LYAGATE_STATUS_NULL_POINTER = 1,
  LYAGATE_STATUS_INVALID_ARGUMENT = 2,
  LYAGATE_STATUS_CONFIG = 3,
  LYAGATE_STATUS_NUMERICAL = 4,
  LYAGATE_STATUS_IO = 5,
  LYAGATE_STATUS_OUT_OF_RANGE = 6,
  LYAGATE_STATUS_PANIC = 7,
} LyagateStatus;

typedef enum LyagateStop {
  LYAGATE_STOP_CONVERGED = 0,
  LYAGATE_STOP_ITERATION_CAP = 1,
  LYAGATE_STOP_STAGNATED = 2,
} LyagateStop;

/**
 * Model together with its logical basis.
 */
typedef struct LyagateModel LyagateModel;

/**
 * Finished solver run.
 */
typedef struct LyagateRun LyagateRun;

/**
 * Solver settings. Obtain defaults from [`lyagate_options_default`].
 */
typedef struct LyagateOptions {
  /**
   * Gate time, or the initial gate time when `clock_gain > 0`.
   */
  double tf;
  /**
   * Gain shared by all control channels.
   */
  double gain;
  /**
   * Clock gain; 0 selects the fixed-time solver.
   */
  double clock_gain;
  double clock_max;
  /**
   * Symmetric bound on each control; 0 or negative means unbounded.
   */
  double u_max;
  size_t max_iters;
  size_t n_sim;
  size_t checkpoint_stride;
  double infidelity_tol;
  /**
   * Seed amplitude relative to the adiabatic level.
   */
  double seed_relative_amplitude;
  size_t seed_harmonics;
  uint64_t rng_seed;
  /**
   * Nonzero to optimize the diagonal members only.
   */
  int32_t diag_only;
} LyagateOptions;

/**
 * One step of a run. Absent values are NaN.
 */
typedef struct LyagateReport {
  size_t ell;
  double v0;
  double v_tf;
  double handoff_err;
  double infidelity;
  double corrected_infidelity;
  double tf;
  double stat_residual;
  double u_l2_change;
} LyagateReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *lyagate_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lyagate_version(void);

/**
 * Z-gate preset. NaN keeps a default; `n_fock = 0` keeps 20 levels.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum LyagateStatus lyagate_model_zgate(double alpha,
                                       size_t n_fock,
                                       double kappa2,
                                       double kappa1,
                                       struct LyagateModel **out);

/**
 * CNOT preset. NaN keeps a default; `n_fock = 0` selects the quick
 * truncation of 10 levels per cavity.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum LyagateStatus lyagate_model_cnot(double alpha2,
                                      size_t n_fock,
                                      double g2,
                                      double k2,
                                      double k1,
                                      struct LyagateModel **out);

/**
 * Hilbert-space dimension, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t lyagate_model_dim(const struct LyagateModel *model);

/**
 * Number of logical basis states, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t lyagate_model_n_bar(const struct LyagateModel *model);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void lyagate_model_free(struct LyagateModel *model);

/**
 * Defaults: unit gain, no clock, 100 steps, 1000 nodes, 1% seed with three
 * harmonics.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum LyagateStatus lyagate_options_default(double tf, struct LyagateOptions *out);

/**
 * Runs the solver from a perturbed adiabatic seed.
 *
 * # Safety
 * `model` must be a live handle, `options` readable, `out` writable.
 */
enum LyagateStatus lyagate_solve(const struct LyagateModel *model,
                                 const struct LyagateOptions *options,
                                 struct LyagateRun **out);

/**
 * Runs the solver described by a TOML config. `full_profile` nonzero lifts
 * the model size limit.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string, `out` writable.
 */
enum LyagateStatus lyagate_solve_config(const char *config_toml,
                                        int32_t full_profile,
                                        struct LyagateRun **out);

/**
 * # Safety
 * `run` must be null or a handle not yet freed.
 */
void lyagate_run_free(struct LyagateRun *run);

/**
 * Number of completed steps, or 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
size_t lyagate_run_iterations(const struct LyagateRun *run);

/**
 * Final infidelity, final gate time, handoff error and full-family
 * infidelity (NaN when not computed). Any output pointer may be null.
 *
 * # Safety
 * `run` must be a live handle; non-null outputs must be writable.
 */
enum LyagateStatus lyagate_run_summary(const struct LyagateRun *run,
                                       double *infidelity,
                                       double *corrected_infidelity,
                                       double *tf,
                                       double *epsilon_num,
                                       enum LyagateStop *stop);

/**
 * Report of step `index` (0-based).
 *
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum LyagateStatus lyagate_run_report(const struct LyagateRun *run,
                                      size_t index,
                                      struct LyagateReport *out);

/**
 * Shape of the final control: channels and grid nodes.
 *
 * # Safety
 * `run` must be a live handle; outputs writable.
 */
enum LyagateStatus lyagate_run_control_shape(const struct LyagateRun *run,
                                             size_t *n_channels,
                                             size_t *n_nodes);

/**
 * Copies the node times of the final control into `buf`, which must hold
 * exactly `len` = number of nodes values.
 *
 * # Safety
 * `buf` must be valid for `len` writes.
 */
enum LyagateStatus lyagate_run_times(const struct LyagateRun *run, double *buf, size_t len);

/**
 * Copies channel `channel` (0-based) of the final control into `buf`.
 *
 * # Safety
 * `buf` must be valid for `len` writes.
 */
enum LyagateStatus lyagate_run_control(const struct LyagateRun *run,
                                       size_t channel,
                                       double *buf,
                                       size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LYAGATE_H */
