#ifndef VCRB_H
#define VCRB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VcrbStatus {
  VCRB_STATUS_OK = 0,
  VCRB_STATUS_NULL_POINTER = 1,
  VCRB_STATUS_INVALID_ARGUMENT = 2,
  VCRB_STATUS_PARSE = 3,
  VCRB_STATUS_IO = 4,
  VCRB_STATUS_DEGENERATE = 5,
  VCRB_STATUS_INTERNAL = 6,
} VcrbStatus;

/**
 * Trained classifier.
 */
typedef struct VcrbModel VcrbModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *vcrb_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vcrb_version(void);

/**
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VcrbStatus vcrb_model_from_json(const char *json, struct VcrbModel **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VcrbStatus vcrb_model_load(const char *path, struct VcrbModel **out);

/**
 * # Safety
 * `model` must come from a `vcrb_model_*` constructor; `out` must be valid.
 */
enum VcrbStatus vcrb_model_n_features(const struct VcrbModel *model, size_t *out);

/**
 * Positive-class probabilities for `n_rows` row-major rows of
 * `n_features` values in the model's feature order. NaN marks a missing
 * value.
 *
 * # Safety
 * `rows` must hold `n_rows * n_features` doubles and `out` room for
 * `n_rows` doubles.
 */
enum VcrbStatus vcrb_model_predict(const struct VcrbModel *model,
                                   const double *rows,
                                   size_t n_rows,
                                   size_t n_features,
                                   double *out);

/**
 * # Safety
 * `model` must be null or come from a `vcrb_model_*` constructor, and must
 * not be used afterwards.
 */
void vcrb_model_free(struct VcrbModel *model);

/**
 * Break-even precision of the take-profit/stop-loss strategy, all values
 * in ticks.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum VcrbStatus vcrb_profitability_threshold(double take_profit,
                                             double stop_loss,
                                             double fee,
                                             double spread,
                                             double *out);

/**
 * One-sided Wilcoxon signed-rank test that `treatment` exceeds `control`.
 *
 * # Safety
 * Both arrays must hold `n` doubles; the out-pointers must be valid.
 */
enum VcrbStatus vcrb_wilcoxon_greater(const double *treatment,
                                      const double *control,
                                      size_t n,
                                      double *statistic,
                                      double *p_value);

/**
 * Spearman footrule distance between two rank vectors of length `n`.
 *
 * # Safety
 * Both arrays must hold `n` values; `out` must be valid.
 */
enum VcrbStatus vcrb_footrule(const size_t *a, const size_t *b, size_t n, uint64_t *out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum VcrbStatus vcrb_bonferroni(double alpha, size_t m, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VCRB_H */
