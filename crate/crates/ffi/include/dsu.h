#ifndef DSU_H
#define DSU_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define DSU_STAGE_RAW 0

#define DSU_STAGE_DEDUP 1

#define DSU_STAGE_BPE 2

#define DSU_SUBSAMPLE_LINEAR 0

#define DSU_SUBSAMPLE_CONV1D1 1

#define DSU_SUBSAMPLE_CONV1D2 2

#define DSU_SUBSAMPLE_CONV1D3 3

// Result of every fallible call.
typedef enum DsuStatus {
  DSU_STATUS_OK = 0,
  DSU_STATUS_NULL_POINTER = 1,
  DSU_STATUS_INVALID_ARGUMENT = 2,
  DSU_STATUS_IO = 3,
  DSU_STATUS_FORMAT = 4,
  DSU_STATUS_CORRUPT = 5,
  DSU_STATUS_VALUE = 6,
  DSU_STATUS_CONFIG = 7,
  DSU_STATUS_STAGE = 8,
  DSU_STATUS_PANIC = 9,
} DsuStatus;

// A BPE merge table.
typedef struct DsuBpeModel DsuBpeModel;

// A trained k-means codebook.
typedef struct DsuCodebook DsuCodebook;

// An ordered list of unit sequences.
typedef struct DsuCorpus DsuCorpus;

// A feature matrix, one frame per row.
typedef struct DsuFeatures DsuFeatures;

// One unit sequence with its vocabulary and stage.
typedef struct DsuUnits DsuUnits;

typedef struct DsuCtcReport {
  size_t pairs;
  size_t violations;
  double violation_rate;
  // Largest feasible conv stride as a `DSU_SUBSAMPLE_*` value, or -1.
  int32_t recommended;
} DsuCtcReport;

typedef struct DsuStats {
  size_t n_sequences;
  double avg_len_raw;
  double avg_len_dedup;
  double avg_len_bpe;
  double avg_len_subsampled;
  // `1 - avg_len_bpe / avg_len_raw`.
  double reduction_ratio;
} DsuStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or NULL. The string
// stays valid until the next failing call on the same thread.
const char *dsu_last_error(void);

// Library version as a static NUL-terminated string.
const char *dsu_version(void);

// Copies `rows * cols` row-major floats into a new feature matrix.
enum DsuStatus dsu_features_new(const float *data,
                                size_t rows,
                                size_t cols,
                                struct DsuFeatures **out);

// Reads a DSF file, or a text matrix when the name ends in `.txt`.
enum DsuStatus dsu_features_load(const char *p, struct DsuFeatures **out);

enum DsuStatus dsu_features_save(const struct DsuFeatures *f, const char *p);

// Number of rows, or 0 for NULL.
size_t dsu_features_rows(const struct DsuFeatures *f);

// Number of columns, or 0 for NULL.
size_t dsu_features_cols(const struct DsuFeatures *f);

// Row-major data owned by the handle, or NULL for NULL.
const float *dsu_features_data(const struct DsuFeatures *f);

void dsu_features_free(struct DsuFeatures *f);

// Log-mel filterbank with default settings (80 mels, 25 ms / 10 ms frames).
enum DsuStatus dsu_fbank_compute(const float *samples,
                                 size_t n_samples,
                                 uint32_t sample_rate,
                                 struct DsuFeatures **out);

// Trains a k-means++ initialised codebook. `batch_size` 0 means full-batch
// Lloyd; otherwise mini-batches of that size for `max_iters` updates.
enum DsuStatus dsu_kmeans_fit(const struct DsuFeatures *f,
                              size_t k,
                              uint64_t seed,
                              size_t max_iters,
                              size_t batch_size,
                              size_t workers,
                              struct DsuCodebook **out);

// Loads centroids from `path` and metadata from `path.meta`.
enum DsuStatus dsu_codebook_load(const char *p, struct DsuCodebook **out);

enum DsuStatus dsu_codebook_save(const struct DsuCodebook *cb, const char *p);

size_t dsu_codebook_k(const struct DsuCodebook *cb);

size_t dsu_codebook_dim(const struct DsuCodebook *cb);

// Final training inertia, or NaN for NULL.
double dsu_codebook_inertia(const struct DsuCodebook *cb);

// Nearest-centroid units for every frame, as a raw sequence over `k` units.
enum DsuStatus dsu_codebook_assign(const struct DsuCodebook *cb,
                                   const struct DsuFeatures *f,
                                   size_t workers,
                                   struct DsuUnits **out);

void dsu_codebook_free(struct DsuCodebook *cb);

// Copies `len` units. `stage` is a `DSU_STAGE_*` value.
enum DsuStatus dsu_units_new(const uint32_t *units,
                             size_t len,
                             uint32_t vocab_size,
                             uint32_t stage,
                             struct DsuUnits **out);

size_t dsu_units_len(const struct DsuUnits *s);

// Units owned by the handle; NULL for NULL or empty sequences.
const uint32_t *dsu_units_data(const struct DsuUnits *s);

uint32_t dsu_units_vocab_size(const struct DsuUnits *s);

// Whether the sequence may contain the mask ID (`vocab_size`).
bool dsu_units_is_masked(const struct DsuUnits *s);

// `DSU_STAGE_*` of the sequence; `DSU_STAGE_RAW` for NULL.
uint32_t dsu_units_stage(const struct DsuUnits *s);

// Collapses runs of repeated units; the input must be raw.
enum DsuStatus dsu_units_dedup(const struct DsuUnits *s, struct DsuUnits **out);

// Overwrites up to `n_masks` random spans with the mask ID `vocab_size`.
enum DsuStatus dsu_units_mask(const struct DsuUnits *s,
                              size_t n_masks,
                              size_t max_width,
                              uint64_t seed,
                              struct DsuUnits **out);

void dsu_units_free(struct DsuUnits *s);

enum DsuStatus dsu_corpus_new(struct DsuCorpus **out);

// Appends a copy of `s`.
enum DsuStatus dsu_corpus_push(struct DsuCorpus *c, const struct DsuUnits *s);

size_t dsu_corpus_len(const struct DsuCorpus *c);

// Copies sequence `index` into a new handle.
enum DsuStatus dsu_corpus_get(const struct DsuCorpus *c, size_t index, struct DsuUnits **out);

// Bit-packs the corpus at `vocab_size` into a DSU file.
enum DsuStatus dsu_pack_save(const struct DsuCorpus *c, uint32_t vocab_size, const char *p);

// Reads a DSU file, tagging the sequences with `stage`.
enum DsuStatus dsu_pack_load(const char *p, uint32_t stage, struct DsuCorpus **out);

void dsu_corpus_free(struct DsuCorpus *c);

// Learns merges over a de-duplicated corpus until `target_vocab` tokens.
enum DsuStatus dsu_bpe_train(const struct DsuCorpus *c,
                             uint32_t target_vocab,
                             struct DsuBpeModel **out);

enum DsuStatus dsu_bpe_load(const char *p, struct DsuBpeModel **out);

enum DsuStatus dsu_bpe_save(const struct DsuBpeModel *m, const char *p);

// Base vocabulary plus learned merges.
uint32_t dsu_bpe_vocab_size(const struct DsuBpeModel *m);

size_t dsu_bpe_num_merges(const struct DsuBpeModel *m);

enum DsuStatus dsu_bpe_encode(const struct DsuBpeModel *m,
                              const struct DsuUnits *s,
                              struct DsuUnits **out);

enum DsuStatus dsu_bpe_decode(const struct DsuBpeModel *m,
                              const struct DsuUnits *s,
                              struct DsuUnits **out);

void dsu_bpe_free(struct DsuBpeModel *m);

// Sequence length after the given `DSU_SUBSAMPLE_*` layer; `len` must be positive.
enum DsuStatus dsu_subsampled_length(size_t len, uint32_t kind, size_t *out);

// Checks `n` (input length, target length) pairs under subsampling `kind`.
enum DsuStatus dsu_ctc_check(const size_t *input_lens,
                             const size_t *target_lens,
                             size_t n,
                             uint32_t kind,
                             struct DsuCtcReport *out);

// Length statistics over `n` index-aligned sequences.
enum DsuStatus dsu_corpus_stats(const size_t *raw_lens,
                                const size_t *dedup_lens,
                                const size_t *bpe_lens,
                                size_t n,
                                uint32_t kind,
                                struct DsuStats *out);

// Mean canonical correlation between row-major `x` (`n` x `dx`) and `y`
// (`n` x `dy`) with ridge `reg_eps`.
enum DsuStatus dsu_cca_score(const double *x,
                             size_t n,
                             size_t dx,
                             const double *y,
                             size_t dy,
                             double reg_eps,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DSU_H */
