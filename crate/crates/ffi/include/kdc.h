#ifndef KDC_H
#define KDC_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  KDC_STATUS_OK = 0,
  KDC_STATUS_INVALID_ARGUMENT = 1,
  KDC_STATUS_NULL_POINTER = 2,
  KDC_STATUS_DOMAIN = 3,
  KDC_STATUS_DIVERGENCE = 4,
  KDC_STATUS_NUMERICAL = 5,
  KDC_STATUS_INDIVISIBLE = 6,
  KDC_STATUS_PANIC = 7,
  KDC_STATUS_BUFFER_TOO_SMALL = 8,
} KdcStatus;

typedef enum {
  KDC_FILTER_TIKHONOV = 0,
  KDC_FILTER_LANDWEBER = 1,
  KDC_FILTER_CUTOFF = 2,
  KDC_FILTER_TIKHONOV_BIAS_CORRECTED = 3,
} KdcFilter;

typedef struct KdcDataset KdcDataset;

/**
 * Averaged model, bound to the problem it was trained on.
 */
typedef struct KdcModel KdcModel;

/**
 * Synthetic problem together with its truncated spectral kernel.
 */
typedef struct KdcProblem KdcProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *kdc_version(void);

/**
 * Message of the last failed call on this thread.
 *
 * # Safety
 * `buf` must be valid for `cap` bytes; `written` may be null.
 */
KdcStatus kdc_last_error_message(char *buf, size_t cap, size_t *written);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
KdcStatus kdc_problem_new(size_t dim,
                          double gamma,
                          double zeta,
                          double source_norm,
                          double noise_sd,
                          KdcProblem **out);

/**
 * # Safety
 * `p` must come from `kdc_problem_new` and not be freed twice. Null is a no-op.
 */
void kdc_problem_free(KdcProblem *p);

/**
 * `f_rho(x)` for `x` in `[0, 1]`.
 *
 * # Safety
 * Pointers must be valid.
 */
KdcStatus kdc_problem_regression_value(const KdcProblem *p, double x, double *out);

/**
 * # Safety
 * Pointers must be valid.
 */
KdcStatus kdc_problem_effective_dimension(const KdcProblem *p, double lambda, double *out);

/**
 * Sup of `K(x, x)` over the evaluation grid.
 *
 * # Safety
 * Pointers must be valid.
 */
KdcStatus kdc_problem_kappa_sq(const KdcProblem *p, double *out);

/**
 * # Safety
 * `buf` must be valid for `cap` bytes; `written` may be null.
 */
KdcStatus kdc_problem_to_json(const KdcProblem *p, char *buf, size_t cap, size_t *written);

/**
 * # Safety
 * Pointers must be valid.
 */
KdcStatus kdc_dataset_sample(const KdcProblem *p, size_t n, uint64_t seed, KdcDataset **out);

/**
 * Number of samples; 0 for null.
 *
 * # Safety
 * `d` must be null or valid.
 */
size_t kdc_dataset_len(const KdcDataset *d);

/**
 * Copies inputs and labels into caller buffers of length `cap`.
 *
 * # Safety
 * `x` and `y` must be valid for `cap` doubles.
 */
KdcStatus kdc_dataset_copy(const KdcDataset *d, double *x, double *y, size_t cap);

/**
 * # Safety
 * `d` must come from `kdc_dataset_sample`. Null is a no-op.
 */
void kdc_dataset_free(KdcDataset *d);

/**
 * Distributed mini-batch SGM with a constant step.
 *
 * # Safety
 * Pointers must be valid.
 */
KdcStatus kdc_train_sgm(const KdcProblem *p,
                        const KdcDataset *d,
                        size_t partitions,
                        size_t batch_size,
                        size_t iterations,
                        double step_size,
                        uint64_t base_seed,
                        uint64_t partition_seed,
                        KdcModel **out);

/**
 * Distributed spectral algorithm with one of the built-in filters.
 *
 * # Safety
 * Pointers must be valid.
 */
KdcStatus kdc_train_sa(const KdcProblem *p,
                       const KdcDataset *d,
                       size_t partitions,
                       KdcFilter filter,
                       double lambda,
                       uint64_t partition_seed,
                       KdcModel **out);

/**
 * # Safety
 * Pointers must be valid.
 */
KdcStatus kdc_model_predict(const KdcModel *m, double x, double *out);

/**
 * Exact excess risk against the problem the model was trained on.
 *
 * # Safety
 * Pointers must be valid.
 */
KdcStatus kdc_model_excess_risk(const KdcModel *m, double *out);

/**
 * Number of averaged local models; 0 for null.
 *
 * # Safety
 * `m` must be null or valid.
 */
size_t kdc_model_partitions(const KdcModel *m);

/**
 * # Safety
 * `m` must come from a `kdc_train_*` call. Null is a no-op.
 */
void kdc_model_free(KdcModel *m);

/**
 * `G_lambda(u)` for a built-in filter on `[0, kappa_sq]`.
 *
 * # Safety
 * `out` must be valid.
 */
KdcStatus kdc_filter_value(KdcFilter filter, double lambda, double u, double kappa_sq, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KDC_H */
