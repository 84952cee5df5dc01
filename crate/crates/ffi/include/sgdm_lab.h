#ifndef SGDM_LAB_H
#define SGDM_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum SgdmStatus {
  SGDM_STATUS_OK = 0,
  SGDM_STATUS_NULL_POINTER = 1,
  SGDM_STATUS_INVALID_ARGUMENT = 2,
  SGDM_STATUS_DIMENSION_MISMATCH = 3,
  /**
   * Non-finite values, a non-PSD matrix or a failed optimum refinement.
   */
  SGDM_STATUS_NUMERICAL = 4,
  SGDM_STATUS_NON_MONOTONE_SCHEDULE = 5,
  SGDM_STATUS_BUFFER_TOO_SMALL = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  SGDM_STATUS_PANIC = 7,
} SgdmStatus;

typedef enum SgdmScheduleKind {
  SGDM_SCHEDULE_KIND_ANYTIME_LOG2 = 0,
  SGDM_SCHEDULE_KIND_EXPECTATION_LOG2 = 1,
  SGDM_SCHEDULE_KIND_EPSILON_LOG = 2,
  SGDM_SCHEDULE_KIND_SQRT_K = 3,
  SGDM_SCHEDULE_KIND_CONSTANT = 4,
} SgdmScheduleKind;

typedef enum SgdmNoiseKind {
  SGDM_NOISE_KIND_NONE = 0,
  /**
   * `scale` is the per-coordinate variance.
   */
  SGDM_NOISE_KIND_GAUSSIAN = 1,
  /**
   * `scale` is the per-coordinate half-width.
   */
  SGDM_NOISE_KIND_UNIFORM = 2,
} SgdmNoiseKind;

typedef enum SgdmAlgorithm {
  SGDM_ALGORITHM_SGDM = 0,
  SGDM_ALGORITHM_SGD = 1,
  SGDM_ALGORITHM_ACSA = 2,
} SgdmAlgorithm;

/**
 * Opaque objective handle.
 */
typedef struct SgdmObjective SgdmObjective;

/**
 * Opaque SGDM iterate handle.
 */
typedef struct SgdmOptimizer SgdmOptimizer;

/**
 * Opaque step-size schedule handle.
 */
typedef struct SgdmSchedule SgdmSchedule;

/**
 * Opaque logged trajectory handle.
 */
typedef struct SgdmTrajectory SgdmTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next call on the same thread.
 */
const char *sgdm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sgdm_version(void);

/**
 * Per-run seed derived from a master seed.
 */
uint64_t sgdm_seed_split(uint64_t master_seed, uint64_t run_index);

/**
 * `f(x) = ½ xᵀAx` from a row-major `dim × dim` matrix.
 */
enum SgdmStatus sgdm_objective_quadratic(const double *a, size_t dim, struct SgdmObjective **out);

/**
 * Random quadratic with eigenvalues spread over `[eig_min, eig_max]`.
 */
enum SgdmStatus sgdm_objective_random_quadratic(size_t dim,
                                                uint64_t seed,
                                                double eig_min,
                                                double eig_max,
                                                struct SgdmObjective **out);

/**
 * Logistic loss on `samples` rows of `dim` features (row-major) with
 * labels in `{0, 1}`, refined to its optimum. `refine_tol <= 0` selects the
 * default tolerance.
 */
enum SgdmStatus sgdm_objective_logistic(const double *features,
                                        const double *labels,
                                        size_t samples,
                                        size_t dim,
                                        double refine_tol,
                                        struct SgdmObjective **out);

void sgdm_objective_free(struct SgdmObjective *obj);

/**
 * Dimension, smoothness constant `L` and optimal value `f*`.
 */
enum SgdmStatus sgdm_objective_info(const struct SgdmObjective *obj,
                                    size_t *dim,
                                    double *lipschitz,
                                    double *fstar);

/**
 * Copies the minimiser into `xstar[0..len]`; `len` must equal the dimension.
 */
enum SgdmStatus sgdm_objective_xstar(const struct SgdmObjective *obj, double *xstar, size_t len);

enum SgdmStatus sgdm_objective_eval(const struct SgdmObjective *obj,
                                    const double *x,
                                    size_t len,
                                    double *value);

enum SgdmStatus sgdm_objective_grad(const struct SgdmObjective *obj,
                                    const double *x,
                                    size_t len,
                                    double *grad);

/**
 * Built-in schedule. `epsilon` is read only by `EpsilonLog`; `lipschitz`
 * only by the logarithmic kinds.
 */
enum SgdmStatus sgdm_schedule_new(enum SgdmScheduleKind kind,
                                  double scale,
                                  double epsilon,
                                  double lipschitz,
                                  struct SgdmSchedule **out);

void sgdm_schedule_free(struct SgdmSchedule *s);

/**
 * `η_k`.
 */
enum SgdmStatus sgdm_schedule_eval(const struct SgdmSchedule *s, uint64_t k, double *eta);

/**
 * SGDM iterate starting at `x_0 = x_1 = x1`, step counter `k = 1`.
 * The schedule is copied; the handle may be freed afterwards.
 */
enum SgdmStatus sgdm_optimizer_new(const double *x1,
                                   size_t len,
                                   const struct SgdmSchedule *schedule,
                                   struct SgdmOptimizer **out);

void sgdm_optimizer_free(struct SgdmOptimizer *opt);

/**
 * One SGDM step with the (stochastic) gradient `g` taken at the current iterate.
 */
enum SgdmStatus sgdm_optimizer_step(struct SgdmOptimizer *opt, const double *g, size_t len);

/**
 * Current step counter `k` and iterate `x_k` (written to `x[0..len]`).
 */
enum SgdmStatus sgdm_optimizer_state(const struct SgdmOptimizer *opt,
                                     uint64_t *k,
                                     double *x,
                                     size_t len);

/**
 * Runs `steps` iterations from the all-ones point and logs every step.
 */
enum SgdmStatus sgdm_trajectory_run(const struct SgdmObjective *obj,
                                    enum SgdmNoiseKind noise,
                                    double noise_scale,
                                    enum SgdmAlgorithm algorithm,
                                    const struct SgdmSchedule *schedule,
                                    uint64_t steps,
                                    uint64_t seed,
                                    struct SgdmTrajectory **out);

void sgdm_trajectory_free(struct SgdmTrajectory *t);

/**
 * Number of logged steps.
 */
enum SgdmStatus sgdm_trajectory_len(const struct SgdmTrajectory *t, size_t *len);

/**
 * Copies `f(x_k) − f*` for `k = 1..=len` into `buf`; `cap` must be at least `len`.
 */
enum SgdmStatus sgdm_trajectory_f_gaps(const struct SgdmTrajectory *t, double *buf, size_t cap);

/**
 * Largest relative residual of the pathwise descent inequality and the
 * number of violating steps.
 */
enum SgdmStatus sgdm_trajectory_check_descent(const struct SgdmTrajectory *t,
                                              double *max_residual,
                                              size_t *violations);

/**
 * Discrete energy of the SGDM pair `(x_{k+1}, x_k)`.
 */
enum SgdmStatus sgdm_discrete_energy(const double *x_next,
                                     const double *x_cur,
                                     const double *xstar,
                                     size_t len,
                                     uint64_t k,
                                     double eta,
                                     double f_gap,
                                     double *energy);

/**
 * Energy of the continuous-time system with parameters `(p, α)` at time `t`.
 */
enum SgdmStatus sgdm_continuous_energy(const double *x,
                                       const double *v,
                                       const double *xstar,
                                       size_t len,
                                       double t,
                                       double p,
                                       double alpha,
                                       double f_gap,
                                       double *energy);

/**
 * `(C1 + C2 log(1/β))·log(k+2)/√(k+1)` for `β ∈ (0, 1]`.
 */
enum SgdmStatus sgdm_anytime_bound(uint64_t k, double beta, double c1, double c2, double *bound);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SGDM_LAB_H */
