#ifndef SUBGRADLAB_H
#define SUBGRADLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum SglStatus {
  /**
   * Success.
   */
  SGL_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SGL_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  SGL_INVALID_UTF8 = 2,
  /**
   * The objective id is not in the catalog.
   */
  SGL_UNKNOWN_OBJECTIVE = 3,
  /**
   * A point length does not match the objective's dimension.
   */
  SGL_DIMENSION_MISMATCH = 4,
  /**
   * A parameter or point precondition was violated (including non-finite
   * entries).
   */
  SGL_PRECONDITION = 5,
  /**
   * The iterates diverged; no trace is returned.
   */
  SGL_DIVERGENCE = 6,
  /**
   * The objective lacks the oracle this operation needs.
   */
  SGL_UNSUPPORTED_ORACLE = 7,
  /**
   * An index was out of range.
   */
  SGL_INDEX_OUT_OF_RANGE = 8,
  /**
   * Any other internal error.
   */
  SGL_INTERNAL = 9,
} SglStatus;

/**
 * Opaque objective handle.
 */
typedef struct SglObjective SglObjective;

/**
 * Opaque iterate-trace handle.
 */
typedef struct SglTrace SglTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static, NUL-terminated name of a status code. Never null.
 */
const char *sgl_status_name(enum SglStatus status);

/**
 * Creates an objective by catalog id (e.g. "abs1d", "global_l1") and
 * stores the handle in `*out`.
 *
 * # Safety
 * `id` must point to a NUL-terminated string and `out` to writable storage
 * for one pointer. On any non-ok status `*out` is set to null.
 */
enum SglStatus sgl_objective_new(const char *id, struct SglObjective **out);

/**
 * Releases an objective handle. A null handle is a no-op.
 *
 * # Safety
 * `obj` must be null or a pointer from [`sgl_objective_new`] that has not
 * been freed.
 */
void sgl_objective_free(struct SglObjective *obj);

/**
 * Writes the objective's ambient dimension to `*out_dim`. Entries whose
 * dimension is set by the query point (quad) report 0.
 *
 * # Safety
 * `obj` must be a live objective handle and `out_dim` writable.
 */
enum SglStatus sgl_objective_dim(const struct SglObjective *obj, size_t *out_dim);

/**
 * Evaluates f(x) into `*out_f`.
 *
 * # Safety
 * `obj` must be a live handle, `x` must point to `len` doubles, and
 * `out_f` must be writable.
 */
enum SglStatus sgl_objective_value(const struct SglObjective *obj,
                                   const double *x,
                                   size_t len,
                                   double *out_f);

/**
 * Writes the minimum-norm Clarke subgradient at `x` into `out_s` (`len`
 * doubles) and its norm d(0, ∂f(x)) into `*out_norm`.
 *
 * # Safety
 * `obj` must be a live handle; `x` and `out_s` must each point to `len`
 * doubles; `out_norm` must be writable.
 */
enum SglStatus sgl_min_norm_subgradient(const struct SglObjective *obj,
                                        const double *x,
                                        size_t len,
                                        double *out_s,
                                        double *out_norm);

/**
 * Runs the constant-step subgradient method for `k_steps` iterations from
 * `x0` and stores a trace handle in `*out`. `seed` feeds the seeded-random
 * tie-breaking rule; the default min-norm selection ignores it.
 *
 * # Safety
 * `obj` must be a live handle, `x0` must point to `len` doubles, and `out`
 * to writable storage for one pointer. On any non-ok status (including
 * divergence) `*out` is set to null.
 */
enum SglStatus sgl_run_subgradient(const struct SglObjective *obj,
                                   const double *x0,
                                   size_t len,
                                   double alpha,
                                   uint64_t seed,
                                   size_t k_steps,
                                   struct SglTrace **out);

/**
 * Releases a trace handle. A null handle is a no-op.
 *
 * # Safety
 * `trace` must be null or a pointer from [`sgl_run_subgradient`] that has
 * not been freed.
 */
void sgl_trace_free(struct SglTrace *trace);

/**
 * Writes the number of stored iterates (k_steps + 1) to `*out_len` and the
 * iterate dimension to `*out_dim`.
 *
 * # Safety
 * `trace` must be a live trace handle; both out-pointers must be writable.
 */
enum SglStatus sgl_trace_shape(const struct SglTrace *trace, size_t *out_len, size_t *out_dim);

/**
 * Copies iterate `k` into `out_x` (`dim` doubles, as reported by
 * [`sgl_trace_shape`]) and f(x_k) into `*out_f`.
 *
 * # Safety
 * `trace` must be a live trace handle, `out_x` must point to `dim`
 * doubles, and `out_f` must be writable.
 */
enum SglStatus sgl_trace_iterate(const struct SglTrace *trace,
                                 size_t k,
                                 double *out_x,
                                 double *out_f);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBGRADLAB_H */
