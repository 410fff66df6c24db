/* C interface for the parrep dimensionality-reduction library.
 *
 * Every entry point returns a parrep_status code; on failure the
 * thread-local message is readable through parrep_last_error. Model
 * handles are owned by the library and released with parrep_model_free.
 */

#ifndef PARREP_H
#define PARREP_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum parrep_status {
  PARREP_OK = 0,
  PARREP_INVALID_ARGUMENT = 1,
  PARREP_IO_ERROR = 2,
  PARREP_UNSUPPORTED = 3,
  PARREP_INTERNAL_ERROR = 4,
} parrep_status;

/* Opaque model handle. */
typedef struct ParrepModel ParrepModel;

/* Copies the most recent error message on this thread into buf
 * (NUL-terminated, truncated to cap bytes) and returns the full message
 * length in bytes, excluding the terminator. A zero cap only queries the
 * length. */
size_t parrep_last_error(char *buf, size_t cap);

/* Trains a model on a row-major n x d matrix of doubles.
 *
 * method is one of "paramrepulsor", "parampacmap", "umap", "negtsne",
 * "infonctsne", "ncvis". pca_dims of zero disables PCA. On success the
 * new handle is written to *out; free it with parrep_model_free. */
parrep_status parrep_fit(const double *x,
                         size_t n,
                         size_t d,
                         const char *method,
                         size_t n_epochs,
                         uint64_t seed,
                         bool standardize,
                         size_t pca_dims,
                         ParrepModel **out);

/* Embedding dimensionality of the model, or zero for a null handle. */
size_t parrep_embedding_dim(const ParrepModel *model);

/* Expected raw input width of the model, or zero for a null handle. */
size_t parrep_input_dim(const ParrepModel *model);

/* Number of rows in the stored training embedding (zero after load). */
size_t parrep_training_rows(const ParrepModel *model);

/* Copies the training embedding into out (row-major,
 * parrep_training_rows x parrep_embedding_dim doubles). */
parrep_status parrep_training_embedding(const ParrepModel *model, double *out);

/* Projects n new rows of width d and writes the row-major result
 * (n x parrep_embedding_dim doubles) into out. */
parrep_status parrep_transform(const ParrepModel *model,
                               const double *x,
                               size_t n,
                               size_t d,
                               double *out);

/* Saves the model to path in the library's binary format. */
parrep_status parrep_save(const ParrepModel *model, const char *path);

/* Loads a model saved by parrep_save and writes the handle to *out.
 * Loaded models carry no training embedding. */
parrep_status parrep_load(const char *path, ParrepModel **out);

/* Releases a model handle. Null is a no-op. */
void parrep_model_free(ParrepModel *model);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PARREP_H */
