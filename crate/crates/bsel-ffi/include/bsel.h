/*
 * C interface to the branching-selection front lab.
 *
 * Every fallible function returns a BselStatus; out parameters are written
 * only on BSEL_STATUS_OK. After any failure, bsel_last_error_message()
 * retrieves a human-readable description for the calling thread.
 */

#ifndef BSEL_H
#define BSEL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Pass as `burnin` to let the library pick its default burn-in.
 */
#define BSEL_BURNIN_AUTO UINT64_MAX

/**
 * Result class of an FFI call. Nonzero means the call failed and no out
 * parameter was written.
 */
typedef enum BselStatus {
  /**
   * Success.
   */
  BSEL_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  BSEL_STATUS_NULL_POINTER = 1,
  /**
   * A parameter was outside its documented domain.
   */
  BSEL_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A configured capacity or enumeration budget was exceeded.
   */
  BSEL_STATUS_CAPACITY = 3,
  /**
   * A numeric procedure failed (singular solve, inadmissible sequence, ...).
   */
  BSEL_STATUS_NUMERIC = 4,
  /**
   * An internal invariant was violated; the handle involved (if any) is
   * only safe to free.
   */
  BSEL_STATUS_INTERNAL = 5,
} BselStatus;

/**
 * A running N-particle simulation. Opaque: create with [`bsel_sim_new`],
 * advance with [`bsel_sim_step`], inspect with [`bsel_sim_front`], release
 * with [`bsel_sim_free`].
 */
typedef struct BselSim BselSim;

/**
 * Limiting-speed constants at a subcritical step probability.
 */
typedef struct BselTheoryConstants {
  /**
   * Step-up probability the constants were derived at.
   */
  double p;
  /**
   * Limiting front speed: root of the rate-function equation in (p, 1).
   */
  double v;
  /**
   * Tilt ratio (p/(1-p))/(v/(1-v)), strictly inside (0, 1).
   */
  double gamma;
  /**
   * Branching entropy ln 2 that the root is matched against.
   */
  double log2;
  /**
   * Smallest integer at least v/(1-v).
   */
  uint64_t q;
} BselTheoryConstants;

/**
 * Front statistics of a running simulation.
 */
typedef struct BselFront {
  /**
   * Leftmost occupied site.
   */
  int64_t min;
  /**
   * Rightmost occupied site.
   */
  int64_t max;
  /**
   * max - min.
   */
  uint64_t diameter;
  /**
   * Particle count (constant over the run).
   */
  uint64_t mass;
  /**
   * Selection steps taken so far.
   */
  uint64_t steps;
  /**
   * Largest diameter observed since the start.
   */
  uint64_t max_diameter_seen;
} BselFront;

/**
 * Batch-means speed estimate for one (p, N).
 */
typedef struct BselSpeedEstimate {
  /**
   * Mean per-step displacement of the maximum after burn-in.
   */
  double v_hat;
  /**
   * Standard error of `v_hat` from the batch means.
   */
  double stderr;
  /**
   * Total steps after burn-in.
   */
  uint64_t steps;
  /**
   * Burn-in steps actually used (resolved if auto was requested).
   */
  uint64_t burnin;
  /**
   * Seed the run used.
   */
  uint64_t seed;
  /**
   * Largest diameter observed.
   */
  uint64_t max_diameter;
  /**
   * Number of batches behind the error bar.
   */
  uint32_t batches;
} BselSpeedEstimate;

/**
 * A certified lower bound on the finite-N speed from the barrier
 * construction, together with the tail-bound ingredients behind it.
 */
typedef struct BselCertificate {
  /**
   * The certified lower bound on the speed; meaningful when not vacuous.
   */
  double value;
  /**
   * Speed discount of the barrier construction.
   */
  double alpha;
  /**
   * Smallest positive cell mass across the measure sequence.
   */
  double epsilon;
  /**
   * Tail probability bound at the requested population size.
   */
  double bound;
  /**
   * Per-particle exponential rate of the tail bound.
   */
  double rate;
  /**
   * Population size at which the tail bound first drops below 1.
   */
  double n_star;
  /**
   * Positive cells in the measure sequence (the union-bound factor).
   */
  uint64_t support_cells;
  /**
   * True when the bound is nonpositive at this population size.
   */
  bool vacuous;
} BselCertificate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the library version as a static NUL-terminated string.
 */
const char *bsel_version(void);

/**
 * Returns a static name for a status code ("ok", "null-pointer", ...).
 */
const char *bsel_status_name(enum BselStatus status);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `cap` bytes) and returns the full length in bytes including
 * the NUL. With a null `buf` or zero `cap`, only the required length is
 * returned. A return of 1 means "no error recorded" (empty message).
 *
 * # Safety
 *
 * `buf`, when non-null, must point to at least `cap` writable bytes.
 */
size_t bsel_last_error_message(char *buf, size_t cap);

/**
 * Computes the limiting front speed at step probability `p` (any regime).
 *
 * # Safety
 *
 * `out` must be null or point to a writable f64; null is reported as an
 * error rather than dereferenced.
 */
enum BselStatus bsel_critical_speed(double p, double *out);

/**
 * Evaluates the large-deviations rate function at displacement fraction `x`.
 *
 * # Safety
 *
 * `out` must be null or point to a writable f64.
 */
enum BselStatus bsel_rate_function(double x, double p, double *out);

/**
 * Fills `out` with the derived constants at a subcritical `p` (p < 1/2).
 *
 * # Safety
 *
 * `out` must be null or point to a writable [`BselTheoryConstants`].
 */
enum BselStatus bsel_theory_constants(double p, struct BselTheoryConstants *out);

/**
 * Computes the exact stationary speed of the N-particle system by building
 * its translation-quotient chain. Feasible for small N only; larger N fail
 * with `BSEL_STATUS_CAPACITY` instead of exhausting memory.
 *
 * # Safety
 *
 * `out` must be null or point to a writable f64.
 */
enum BselStatus bsel_exact_speed(double p, uint64_t n, double *out);

/**
 * Creates a simulation of N particles at step probability `p`, all at the
 * origin, with a deterministic stream seeded by `seed`. On success `*out`
 * owns the handle.
 *
 * # Safety
 *
 * `out` must be null or point to a writable pointer slot.
 */
enum BselStatus bsel_sim_new(double p, uint64_t n, uint64_t seed, struct BselSim **out);

/**
 * Advances the simulation by `steps` selection steps.
 *
 * # Safety
 *
 * `sim` must be null or a live handle from [`bsel_sim_new`] not used
 * concurrently from another thread.
 */
enum BselStatus bsel_sim_step(struct BselSim *sim, uint64_t steps);

/**
 * Fills `out` with the simulation's current front statistics.
 *
 * # Safety
 *
 * `sim` must be null or a live handle; `out` null or writable.
 */
enum BselStatus bsel_sim_front(const struct BselSim *sim, struct BselFront *out);

/**
 * Releases a simulation handle. Null is a no-op. The handle must not be
 * used afterwards.
 *
 * # Safety
 *
 * `sim` must be null or a handle from [`bsel_sim_new`] not yet freed.
 */
void bsel_sim_free(struct BselSim *sim);

/**
 * Runs one simulation and estimates the speed by batch means. Pass
 * [`BSEL_BURNIN_AUTO`] as `burnin` to use the library default; `batches`
 * must be at least 8 and divide the post-burn-in span.
 *
 * # Safety
 *
 * `out` must be null or point to a writable [`BselSpeedEstimate`].
 */
enum BselStatus bsel_estimate_speed(double p,
                                    uint64_t n,
                                    uint64_t steps,
                                    uint64_t burnin,
                                    uint32_t batches,
                                    uint64_t seed,
                                    struct BselSpeedEstimate *out);

/**
 * Builds the barrier measure sequence at horizon `m`, verifies its
 * admissibility with margin `beta`, and evaluates the certified lower bound
 * on the N-particle speed. Fails with `BSEL_STATUS_NUMERIC` when the
 * sequence is not admissible for this margin.
 *
 * # Safety
 *
 * `out` must be null or point to a writable [`BselCertificate`].
 */
enum BselStatus bsel_certificate(double p,
                                 uint64_t n,
                                 uint64_t m,
                                 uint64_t tail_factor,
                                 double beta,
                                 struct BselCertificate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BSEL_H */
