/* C interface to the stlcode sparse-coding toolkit. */

#ifndef STLCODE_H
#define STLCODE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Observation model selector.
 */
typedef enum StlcFamily {
  STLC_FAMILY_GAUSSIAN = 0,
  STLC_FAMILY_BERNOULLI = 1,
  STLC_FAMILY_POISSON = 2,
} StlcFamily;

/**
 * Result of every fallible call. Anything other than `Ok` leaves a
 * description in `stlc_last_error_message`.
 */
typedef enum StlcStatus {
  STLC_STATUS_OK = 0,
  /**
   * A pointer argument was null.
   */
  STLC_STATUS_NULL_POINTER = 1,
  /**
   * Bad dimensions, hyperparameters, or out-of-domain data.
   */
  STLC_STATUS_INVALID_ARGUMENT = 2,
  /**
   * An input file failed to parse.
   */
  STLC_STATUS_PARSE_ERROR = 3,
  /**
   * An iterative method diverged.
   */
  STLC_STATUS_NUMERICAL_ERROR = 4,
  /**
   * Filesystem failure.
   */
  STLC_STATUS_IO_ERROR = 5,
  /**
   * A model file is corrupt or has an unknown version.
   */
  STLC_STATUS_MODEL_FORMAT_ERROR = 6,
} StlcStatus;

/**
 * Opaque handle to a trained model.
 */
typedef struct StlcModel StlcModel;

/**
 * Full-pipeline hyperparameters. Get defaults from
 * `stlc_train_config_default` and override fields as needed.
 */
typedef struct StlcTrainConfig {
  enum StlcFamily family;
  uint64_t seed;
  /**
   * Number of dictionary atoms.
   */
  size_t n_basis;
  /**
   * Dictionary-training L1 penalty.
   */
  double beta;
  /**
   * Encoding penalty override; any value <= 0 means "use beta".
   */
  double encode_beta;
  /**
   * Per-example encoding stop threshold.
   */
  double epsilon;
  /**
   * Squared-norm bound on each atom.
   */
  double norm_bound;
  /**
   * Maximum dictionary alternation sweeps.
   */
  size_t sweeps;
  /**
   * Relative sweep decrease that stops dictionary learning.
   */
  double dict_tol;
  /**
   * Retained PCA components; 0 disables the reducer.
   */
  size_t pca;
  /**
   * Hidden-layer width of the classifier.
   */
  size_t hidden;
  double learning_rate;
  size_t epochs;
  size_t batch_size;
  double init_scale;
  double l2_decay;
} StlcTrainConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *stlc_version(void);

/**
 * Message of the most recent failure on this thread. The pointer stays
 * valid until the next failing stlc call on the same thread.
 */
const char *stlc_last_error_message(void);

/**
 * Defaults matching the CLI: gaussian family, 8 atoms, beta 0.1, no PCA.
 */
struct StlcTrainConfig stlc_train_config_default(void);

/**
 * Train the full pipeline on row-major data.
 *
 * `unlabeled` is `unlabeled_rows x dim`, `labeled` is `labeled_rows x dim`,
 * and `labels` holds `labeled_rows` 1-based class indices covering every
 * class in `1..=num_classes`. On success `*out` owns the new model; free it
 * with `stlc_model_free`.
 *
 * # Safety
 * All pointers must be valid for the stated lengths and `out` must point
 * to writable storage for one pointer.
 */
enum StlcStatus stlc_train(const double *unlabeled,
                           size_t unlabeled_rows,
                           const double *labeled,
                           size_t labeled_rows,
                           size_t dim,
                           const uint32_t *labels,
                           uint32_t num_classes,
                           const struct StlcTrainConfig *config,
                           struct StlcModel **out);

/**
 * Load a model file produced by `stlc_model_save` or the CLI.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum StlcStatus stlc_model_load(const char *path, struct StlcModel **out);

/**
 * Save a model to the toolkit's text format.
 *
 * # Safety
 * `model` must come from this library; `path` must be NUL-terminated.
 */
enum StlcStatus stlc_model_save(const struct StlcModel *model, const char *path);

/**
 * Release a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must be a pointer returned by this library, not yet freed.
 */
void stlc_model_free(struct StlcModel *model);

/**
 * Observation dimension the model expects.
 *
 * # Safety
 * `model` must be a live handle from this library.
 */
size_t stlc_model_input_dim(const struct StlcModel *model);

/**
 * Sparse-code feature dimension (number of dictionary atoms).
 *
 * # Safety
 * `model` must be a live handle from this library.
 */
size_t stlc_model_feature_dim(const struct StlcModel *model);

/**
 * Number of classes the classifier separates.
 *
 * # Safety
 * `model` must be a live handle from this library.
 */
size_t stlc_model_num_classes(const struct StlcModel *model);

/**
 * Sparse-encode one observation of length `x_len == input_dim` into
 * `out_code` of length `code_len == feature_dim`.
 *
 * # Safety
 * Buffers must be valid for the stated lengths.
 */
enum StlcStatus stlc_model_encode(const struct StlcModel *model,
                                  const double *x,
                                  size_t x_len,
                                  double *out_code,
                                  size_t code_len);

/**
 * Predict one observation: writes the 1-based label to `out_label` and,
 * when `out_probs` is non-null, the class probabilities to its
 * `probs_len == num_classes` slots.
 *
 * # Safety
 * Buffers must be valid for the stated lengths.
 */
enum StlcStatus stlc_model_predict(const struct StlcModel *model,
                                   const double *x,
                                   size_t x_len,
                                   uint32_t *out_label,
                                   double *out_probs,
                                   size_t probs_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STLCODE_H */
