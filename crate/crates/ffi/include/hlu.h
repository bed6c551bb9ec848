/* C interface to the hlu hierarchical sparse solver. */

#ifndef HLU_H
#define HLU_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum HluStatus {
  HLU_STATUS_OK = 0,
  HLU_STATUS_INVALID_ARGUMENT = 1,
  HLU_STATUS_PARSE_ERROR = 2,
  HLU_STATUS_SINGULAR_PIVOT = 3,
  HLU_STATUS_NOT_CONVERGED = 4,
  HLU_STATUS_INTERNAL_PANIC = 5,
} HluStatus;

/**
 * Opaque factorization handle; also carries the build statistics.
 */
typedef struct HluFactorization HluFactorization;

/**
 * Opaque sparse matrix handle.
 */
typedef struct HluMatrix HluMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Most recent error message on this thread, or null. The pointer is valid
 * until the next failing call on the same thread.
 */
const char *hlu_last_error_message(void);

/**
 * Build a square sparse matrix from coordinate data. Duplicate coordinates
 * are summed.
 *
 * # Safety
 * `rows`, `cols`, `values` must point to `nnz` readable elements and `out`
 * must be a valid location for one pointer.
 */
enum HluStatus hlu_matrix_from_coo(uintptr_t n,
                                   uintptr_t nnz,
                                   const uintptr_t *rows,
                                   const uintptr_t *cols,
                                   const double *values,
                                   struct HluMatrix **out);

/**
 * Load a coordinate Matrix Market file (real, general or symmetric).
 *
 * # Safety
 * `path` must be a valid NUL-terminated string, `out` a valid location.
 */
enum HluStatus hlu_matrix_from_mtx(const char *path, struct HluMatrix **out);

/**
 * Dimension of the matrix behind the handle.
 *
 * # Safety
 * `m` must be a live matrix handle.
 */
uintptr_t hlu_matrix_n(const struct HluMatrix *m);

/**
 * # Safety
 * `m` must have come from a matrix constructor and not been freed.
 */
void hlu_matrix_free(struct HluMatrix *m);

/**
 * Compute the hierarchical factorization.
 *
 * `rule` selects the truncation criterion: 0 keeps singular values with
 * sigma_k/sigma_0 >= epsilon, 1 uses the running Frobenius criterion.
 *
 * # Safety
 * `m` must be a live matrix handle and `out` a valid location.
 */
enum HluStatus hlu_factorize(const struct HluMatrix *m,
                             double epsilon,
                             int32_t rule,
                             uintptr_t target_leaf,
                             uint64_t seed,
                             struct HluFactorization **out);

/**
 * # Safety
 * `f` must have come from `hlu_factorize` and not been freed.
 */
void hlu_factorization_free(struct HluFactorization *f);

/**
 * Direct solve: x = A^-1 b through the factorization.
 *
 * # Safety
 * `b` and `x` must point to `n` readable/writable doubles; `f` must be live.
 */
enum HluStatus hlu_solve(const struct HluFactorization *f, const double *b, double *x, uintptr_t n);

/**
 * GMRES on A x = b with the factorization as left preconditioner. Writes
 * the iterate into `x` and the iteration count into `out_iterations`
 * (when non-null). Returns `NotConverged` when the tolerance was not met
 * within `max_iters`.
 *
 * # Safety
 * Pointer arguments as in `hlu_solve`; `m` and `f` must be live handles of
 * matching dimension.
 */
enum HluStatus hlu_gmres(const struct HluMatrix *m,
                         const struct HluFactorization *f,
                         const double *b,
                         double *x,
                         uintptr_t n,
                         double tol,
                         uintptr_t max_iters,
                         uintptr_t *out_iterations);

/**
 * Factorization statistics as a JSON document. Free with
 * `hlu_string_free`.
 *
 * # Safety
 * `f` must be a live factorization handle.
 */
char *hlu_stats_json(const struct HluFactorization *f);

/**
 * # Safety
 * `s` must be a pointer previously returned by `hlu_stats_json` and not
 * yet freed.
 */
void hlu_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HLU_H */
