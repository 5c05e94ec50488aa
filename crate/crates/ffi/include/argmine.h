#ifndef ARGMINE_H
#define ARGMINE_H

/* Generated by cbindgen from the argmine-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ArgmineStatus {
  ARGMINE_STATUS_OK = 0,
  ARGMINE_STATUS_NULL_POINTER = 1,
  ARGMINE_STATUS_INVALID_ARGUMENT = 2,
  ARGMINE_STATUS_IO = 3,
  ARGMINE_STATUS_PARSE = 4,
  ARGMINE_STATUS_MODEL = 5,
  ARGMINE_STATUS_PANIC = 6,
} ArgmineStatus;

/**
 * Opaque corpus handle.
 */
typedef struct ArgmineCorpus ArgmineCorpus;

/**
 * Opaque handle to a trained classifier and the backend it reads.
 */
typedef struct ArgmineModel ArgmineModel;

/**
 * Opaque train/test split handle.
 */
typedef struct ArgmineSplit ArgmineSplit;

/**
 * Weighted metrics over all classes.
 */
typedef struct ArgmineMetrics {
  double weighted_precision;
  double weighted_recall;
  double weighted_f1;
  /**
   * Per-class ratios whose denominator was zero and were scored as 0.
   */
  size_t zero_division;
} ArgmineMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *argmine_last_error(void);

/**
 * Parses a JSONL corpus file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum ArgmineStatus argmine_corpus_load(const char *path, struct ArgmineCorpus **out);

/**
 * Generates the synthetic demo corpus.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ArgmineStatus argmine_corpus_demo(size_t documents, uint64_t seed, struct ArgmineCorpus **out);

/**
 * # Safety
 * `corpus` must be null or a handle from this library not yet freed.
 */
void argmine_corpus_free(struct ArgmineCorpus *corpus);

/**
 * # Safety
 * `corpus` must be null or a live corpus handle.
 */
size_t argmine_corpus_document_count(const struct ArgmineCorpus *corpus);

/**
 * # Safety
 * `corpus` must be null or a live corpus handle.
 */
size_t argmine_corpus_clause_count(const struct ArgmineCorpus *corpus);

/**
 * Number of validation warnings (for example arguments with two
 * conclusions) raised while loading.
 *
 * # Safety
 * `corpus` must be null or a live corpus handle.
 */
size_t argmine_corpus_warning_count(const struct ArgmineCorpus *corpus);

/**
 * Number of labeled examples a task yields. `task` is one of
 * `clause_recognition`, `relation_mining`, `premise_cls`, `conclusion_cls`;
 * `scope` is `full` or `law_section`.
 *
 * # Safety
 * `corpus` must be a live handle, `task` and `scope` valid strings and
 * `out` a valid pointer.
 */
enum ArgmineStatus argmine_task_example_count(const struct ArgmineCorpus *corpus,
                                              const char *task,
                                              const char *scope,
                                              size_t *out);

/**
 * Document-level train/test split with `k` validation folds.
 *
 * # Safety
 * `corpus` must be a live handle and `out` a valid pointer.
 */
enum ArgmineStatus argmine_split_new(const struct ArgmineCorpus *corpus,
                                     double train_fraction,
                                     size_t k,
                                     uint64_t seed,
                                     struct ArgmineSplit **out);

/**
 * # Safety
 * `split` must be null or a handle from this library not yet freed.
 */
void argmine_split_free(struct ArgmineSplit *split);

/**
 * # Safety
 * `split` must be null or a live split handle.
 */
size_t argmine_split_train_count(const struct ArgmineSplit *split);

/**
 * # Safety
 * `split` must be null or a live split handle.
 */
size_t argmine_split_test_count(const struct ArgmineSplit *split);

/**
 * # Safety
 * `split` must be null or a live split handle.
 */
size_t argmine_split_fold_count(const struct ArgmineSplit *split);

/**
 * Number of validation documents in fold `fold`.
 *
 * # Safety
 * `split` must be a live handle and `out` a valid pointer.
 */
enum ArgmineStatus argmine_split_fold_val_count(const struct ArgmineSplit *split,
                                                size_t fold,
                                                size_t *out);

/**
 * Support-weighted precision, recall and F1 of `len` label pairs.
 *
 * # Safety
 * `y_true` and `y_pred` must point to `len` readable values; `out` must be
 * a valid pointer.
 */
enum ArgmineStatus argmine_weighted_metrics(const size_t *y_true,
                                            const size_t *y_pred,
                                            size_t len,
                                            struct ArgmineMetrics *out);

/**
 * Loads a model artifact written by `argmine train --out` together with
 * the embedding backend it was trained on.
 *
 * # Safety
 * `path` must be a valid string and `out` a valid pointer.
 */
enum ArgmineStatus argmine_model_load(const char *path, struct ArgmineModel **out);

/**
 * # Safety
 * `model` must be null or a handle from this library not yet freed.
 */
void argmine_model_free(struct ArgmineModel *model);

/**
 * Predicts the label of one clause, or of a clause pair when `text_b` is
 * non-null.
 *
 * # Safety
 * `model` must be a live handle, `text` a valid string, `text_b` null or a
 * valid string, and `label` a valid pointer.
 */
enum ArgmineStatus argmine_model_predict(const struct ArgmineModel *model,
                                         const char *text,
                                         const char *text_b,
                                         uint32_t *label);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ARGMINE_H */
