#ifndef WSVD_H
#define WSVD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  WSVD_MODEL_KIND_AVERAGE = 0,
  WSVD_MODEL_KIND_BIAS = 1,
  WSVD_MODEL_KIND_PMF = 2,
  WSVD_MODEL_KIND_SVD = 3,
  WSVD_MODEL_KIND_SVD_PLUS_PLUS = 4,
  WSVD_MODEL_KIND_WSVD = 5,
} WsvdModelKind;

/**
 * Result code of every fallible call.
 */
typedef enum {
  WSVD_STATUS_OK = 0,
  WSVD_STATUS_NULL_POINTER = 1,
  WSVD_STATUS_INVALID_ARGUMENT = 2,
  WSVD_STATUS_IO = 3,
  WSVD_STATUS_PARSE = 4,
  WSVD_STATUS_DIVERGED = 5,
  WSVD_STATUS_MODEL_FILE = 6,
  WSVD_STATUS_BUFFER_TOO_SMALL = 7,
  WSVD_STATUS_PANIC = 8,
} WsvdStatus;

/**
 * Opaque rating dataset.
 */
typedef struct WsvdDataset WsvdDataset;

/**
 * Opaque trained model together with its id maps and training feedback.
 */
typedef struct WsvdModel WsvdModel;

/**
 * Hyperparameters with one learning rate and one regularization value per
 * block. `update` is 0 for the shared-residual rule, 1 for sequential.
 */
typedef struct {
  size_t k;
  size_t epochs;
  uint64_t seed;
  double decay;
  double lr_weights;
  double lr_user_factors;
  double lr_item_factors;
  double lr_user_bias;
  double lr_item_bias;
  double reg_weights;
  double reg_user_factors;
  double reg_item_factors;
  double reg_user_bias;
  double reg_item_bias;
  bool shuffle;
  uint32_t update;
} WsvdHyperParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a
 * successful call. The pointer stays valid until the next call into the
 * library on the same thread.
 */
const char *wsvd_last_error(void);

/**
 * Number of learnable parameters of `kind` on an `m x n` problem.
 */
size_t wsvd_param_count(WsvdModelKind kind, size_t users, size_t items, size_t k);

/**
 * Reads a rating file. `format` is one of `ml100k`, `movielens-delim`,
 * `filmtrust`, `epinions`, `epinions-csv`, `epinions-tsv`, `epinions-ssv`.
 *
 * # Safety
 * `path` and `format` must be NUL-terminated strings; `out` must be writable.
 */
WsvdStatus wsvd_dataset_load(const char *path, const char *format, WsvdDataset **out);

/**
 * # Safety
 * `dataset` must come from this library and not be used afterwards. NULL is ignored.
 */
void wsvd_dataset_free(WsvdDataset *dataset);

/**
 * Shape of a dataset: user count, item count, rating count.
 *
 * # Safety
 * `dataset` must be a live handle; the out pointers must be writable.
 */
WsvdStatus wsvd_dataset_shape(const WsvdDataset *dataset,
                              size_t *users,
                              size_t *items,
                              size_t *ratings);

/**
 * Seeded uniform train/test partition.
 *
 * # Safety
 * `dataset` must be a live handle; `train` and `test` must be writable.
 */
WsvdStatus wsvd_dataset_split(const WsvdDataset *dataset,
                              double train_fraction,
                              uint64_t seed,
                              WsvdDataset **train,
                              WsvdDataset **test);

/**
 * Standard hyperparameters for `kind`.
 *
 * # Safety
 * `out` must be writable.
 */
WsvdStatus wsvd_hyperparams_default(WsvdModelKind kind, WsvdHyperParams *out);

/**
 * Trains `kind` on `train_set`. `hp` may be NULL for the defaults.
 *
 * # Safety
 * `train_set` must be a live handle, `hp` NULL or readable, `out` writable.
 */
WsvdStatus wsvd_train(WsvdModelKind kind,
                      const WsvdDataset *train_set,
                      const WsvdHyperParams *hp,
                      WsvdModel **out);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards. NULL is ignored.
 */
void wsvd_model_free(WsvdModel *model);

/**
 * Kind and shape of a model.
 *
 * # Safety
 * `model` must be a live handle; the out pointers must be writable.
 */
WsvdStatus wsvd_model_info(const WsvdModel *model,
                           WsvdModelKind *kind,
                           size_t *users,
                           size_t *items,
                           size_t *k);

/**
 * Predicted rating for raw ids, unclipped. Unknown ids use the
 * cold-start fallback.
 *
 * # Safety
 * `model` must be a live handle, `user`/`item` NUL-terminated, `out` writable.
 */
WsvdStatus wsvd_model_predict(const WsvdModel *model,
                              const char *user,
                              const char *item,
                              double *out);

/**
 * RMSE of the model on `dataset`, matching ratings by raw id.
 *
 * # Safety
 * `model` and `dataset` must be live handles; `out` writable.
 */
WsvdStatus wsvd_model_rmse(const WsvdModel *model, const WsvdDataset *dataset, double *out);

/**
 * Copies the WSVD factor weights into `buf`. `needed` always receives the
 * weight count; a short buffer yields `WSVD_STATUS_BUFFER_TOO_SMALL`.
 *
 * # Safety
 * `buf` must have room for `len` doubles (may be NULL when `len` is 0).
 */
WsvdStatus wsvd_model_weights(const WsvdModel *model, double *buf, size_t len, size_t *needed);

/**
 * Each weight divided by the smallest absolute weight, written to `out`
 * (`len` entries).
 *
 * # Safety
 * `weights` and `out` must each hold `len` doubles.
 */
WsvdStatus wsvd_relative_importance(const double *weights, size_t len, double *out);

/**
 * Writes the model file; `binary` selects the bit-exact encoding, else text.
 *
 * # Safety
 * `model` must be a live handle and `path` NUL-terminated.
 */
WsvdStatus wsvd_model_save(const WsvdModel *model, const char *path, bool binary);

/**
 * # Safety
 * `path` must be NUL-terminated and `out` writable.
 */
WsvdStatus wsvd_model_load(const char *path, WsvdModel **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WSVD_H */
