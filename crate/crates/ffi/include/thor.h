#ifndef THOR_H
#define THOR_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Hidden-layer activation.
 */
typedef enum thor_activation {
  THOR_ACTIVATION_RELU = 0,
  THOR_ACTIVATION_TANH = 1,
  THOR_ACTIVATION_IDENTITY = 2,
} thor_activation;

/**
 * Inference head for two-headed (hybrid) models; `AUTO` lets single-headed
 * methods pick their own rule and is an error for hybrid models.
 */
typedef enum thor_head {
  THOR_HEAD_AUTO = 0,
  THOR_HEAD_CLASSIFICATION = 1,
  THOR_HEAD_REGRESSION = 2,
} thor_head;

/**
 * Training method selector.
 */
typedef enum thor_method {
  THOR_METHOD_THOR = 0,
  THOR_METHOD_ORCNN = 1,
  THOR_METHOD_CORAL = 2,
  THOR_METHOD_CNNPOR = 3,
  THOR_METHOD_HYBRID = 4,
} thor_method;

/**
 * Validation metric used to pick the best epoch.
 */
typedef enum thor_select {
  THOR_SELECT_MAE = 0,
  THOR_SELECT_ACCURACY = 1,
} thor_select;

/**
 * Status code of every fallible call.
 */
typedef enum thor_status {
  THOR_OK = 0,
  THOR_NULL_POINTER = 1,
  THOR_INVALID_ARGUMENT = 2,
  THOR_NUMERIC_FAULT = 3,
  THOR_IO_ERROR = 4,
  THOR_PARSE_ERROR = 5,
} thor_status;

/**
 * Opaque dataset handle.
 */
typedef struct thor_dataset thor_dataset;

/**
 * Opaque trained-model handle (model, thresholds, method and any head state).
 */
typedef struct thor_model thor_model;

/**
 * Training hyperparameters. `hidden` may be NULL to use the default trunk
 * (64, 32); otherwise it points at `hidden_len` layer widths.
 */
typedef struct thor_train_config {
  enum thor_method method;
  uint32_t epochs;
  uint32_t batch_size;
  double lr;
  double gamma;
  uint64_t seed;
  const uint32_t *hidden;
  uintptr_t hidden_len;
  enum thor_activation activation;
  enum thor_select select_on;
  bool allow_infeasible_margin;
} thor_train_config;

/**
 * Evaluation summary. `inconsistency_rate` is meaningful only when
 * `has_inconsistency_rate` is true (binary-decomposition methods).
 */
typedef struct thor_metrics {
  double accuracy;
  double mae;
  uintptr_t n;
  bool has_inconsistency_rate;
  double inconsistency_rate;
} thor_metrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the library; static storage, do not free.
 */
const char *thor_version(void);

/**
 * Explanation of the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread; do not free it.
 */
const char *thor_last_error_message(void);

/**
 * Generates a synthetic ordinal dataset.
 *
 * # Safety
 * `out` must be a valid pointer; on `THOR_OK` it receives a handle that must
 * be released with [`thor_dataset_free`].
 */
enum thor_status thor_dataset_synthetic(uintptr_t k,
                                        uintptr_t per_class,
                                        uintptr_t dim,
                                        double noise,
                                        double label_noise,
                                        uint64_t transform_seed,
                                        uint64_t seed,
                                        struct thor_dataset **out);

/**
 * Loads `f1,...,fd,label` rows from a CSV file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` as in
 * [`thor_dataset_synthetic`].
 */
enum thor_status thor_dataset_load_csv(const char *path,
                                       uintptr_t k,
                                       bool has_header,
                                       struct thor_dataset **out);

/**
 * Writes the dataset in the CSV schema [`thor_dataset_load_csv`] reads.
 *
 * # Safety
 * `dataset` must be a live handle; `path` a NUL-terminated string.
 */
enum thor_status thor_dataset_save_csv(const struct thor_dataset *dataset,
                                       const char *path,
                                       bool header);

/**
 * Stratified train/validation/test split; all three out parameters receive
 * fresh handles on success.
 *
 * # Safety
 * `dataset` must be a live handle and the out pointers valid.
 */
enum thor_status thor_dataset_split(const struct thor_dataset *dataset,
                                    double train_ratio,
                                    double val_ratio,
                                    double test_ratio,
                                    uint64_t seed,
                                    struct thor_dataset **out_train,
                                    struct thor_dataset **out_val,
                                    struct thor_dataset **out_test);

/**
 * Number of examples; 0 for a NULL handle.
 *
 * # Safety
 * `dataset` must be NULL or a live handle.
 */
uintptr_t thor_dataset_len(const struct thor_dataset *dataset);

/**
 * Feature dimension; 0 for a NULL handle.
 *
 * # Safety
 * `dataset` must be NULL or a live handle.
 */
uintptr_t thor_dataset_dim(const struct thor_dataset *dataset);

/**
 * Number of ordered classes; 0 for a NULL handle.
 *
 * # Safety
 * `dataset` must be NULL or a live handle.
 */
uintptr_t thor_dataset_classes(const struct thor_dataset *dataset);

/**
 * Releases a dataset handle; NULL is a no-op.
 *
 * # Safety
 * `dataset` must be NULL or a handle not yet freed.
 */
void thor_dataset_free(struct thor_dataset *dataset);

/**
 * Defaults for one method: 100 epochs, batch 32, lr 0.02, margin 0.5,
 * seed 42, default trunk, rectifier, best epoch by validation MAE.
 */
struct thor_train_config thor_train_config_default(enum thor_method method);

/**
 * Trains on the train split with per-epoch validation and returns the best
 * model by the configured selection metric. Deterministic per seed.
 *
 * # Safety
 * `train`/`val` must be live handles, `config` and `out` valid pointers; if
 * `config->hidden` is non-NULL it must point at `hidden_len` widths. The
 * returned handle must be released with [`thor_model_free`].
 */
enum thor_status thor_train(const struct thor_dataset *train,
                            const struct thor_dataset *val,
                            const struct thor_train_config *config,
                            struct thor_model **out);

/**
 * Serializes a model in the versioned text checkpoint format.
 *
 * # Safety
 * `model` must be a live handle; `path` a NUL-terminated string.
 */
enum thor_status thor_model_save(const struct thor_model *model, const char *path);

/**
 * Loads a checkpoint saved by [`thor_model_save`] (or the CLI), binding it
 * to the given method and the default thresholds for `k` classes.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` as in [`thor_train`].
 */
enum thor_status thor_model_load(const char *path,
                                 enum thor_method method,
                                 uintptr_t k,
                                 struct thor_model **out);

/**
 * Predicts the rank (1-based) of one feature vector.
 *
 * # Safety
 * `model` must be a live handle, `features` must point at `len` doubles and
 * `out_rank` must be valid.
 */
enum thor_status thor_model_predict(const struct thor_model *model,
                                    const double *features,
                                    uintptr_t len,
                                    enum thor_head head,
                                    uintptr_t *out_rank);

/**
 * Evaluates accuracy, MAE and (for the binary-decomposition methods) the
 * inconsistency rate of the model on a dataset.
 *
 * # Safety
 * `model` and `dataset` must be live handles and `out` a valid pointer.
 */
enum thor_status thor_model_evaluate(const struct thor_model *model,
                                     const struct thor_dataset *dataset,
                                     enum thor_head head,
                                     struct thor_metrics *out);

/**
 * Releases a model handle; NULL is a no-op.
 *
 * # Safety
 * `model` must be NULL or a handle not yet freed.
 */
void thor_model_free(struct thor_model *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THOR_H */
