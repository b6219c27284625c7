/* C interface to the mpsum extractive-summarization pipeline. */

#ifndef MPSUM_H
#define MPSUM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum MpsumStatus {
  MPSUM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  MPSUM_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  MPSUM_STATUS_INVALID_UTF8 = 2,
  /**
   * The checkpoint file could not be read.
   */
  MPSUM_STATUS_IO = 3,
  /**
   * The checkpoint was rejected (wrong tag or corrupted weights).
   */
  MPSUM_STATUS_BAD_CHECKPOINT = 4,
  /**
   * An argument was outside its valid range.
   */
  MPSUM_STATUS_INVALID_ARGUMENT = 5,
  /**
   * The review contained no sentences.
   */
  MPSUM_STATUS_EMPTY_REVIEW = 6,
  MPSUM_STATUS_INTERNAL = 7,
} MpsumStatus;

/**
 * Opaque handle to a loaded checkpoint.
 */
typedef struct MpsumModel MpsumModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Load a checkpoint file into a new model handle.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out_model` a valid
 * pointer; on `MPSUM_STATUS_OK` the caller owns the handle and must
 * release it with `mpsum_model_free`.
 */
enum MpsumStatus mpsum_model_load(const char *path, struct MpsumModel **out_model);

/**
 * Release a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must have come from `mpsum_model_load` and not be freed twice.
 */
void mpsum_model_free(struct MpsumModel *model);

/**
 * Summarize a raw review. `top_k <= 0` means threshold selection;
 * `threshold` must lie in [0, 1]. The summary lands in `out_summary`
 * (free with `mpsum_string_free`).
 *
 * # Safety
 * `model`, `review_text`, and `out_summary` must be valid pointers.
 */
enum MpsumStatus mpsum_summarize(const struct MpsumModel *model,
                                 const char *review_text,
                                 double threshold,
                                 int top_k,
                                 char **out_summary);

/**
 * Relevance probability for every sentence of a raw review, in review
 * order. On success `*out_scores` points at `*out_len` doubles; free
 * with `mpsum_scores_free`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum MpsumStatus mpsum_score_sentences(const struct MpsumModel *model,
                                       const char *review_text,
                                       double **out_scores,
                                       size_t *out_len);

/**
 * ROUGE-1 / ROUGE-2 / ROUGE-L F1 between two texts (pipeline
 * tokenization).
 *
 * # Safety
 * All pointers must be valid.
 */
enum MpsumStatus mpsum_rouge_f1(const char *candidate,
                                const char *reference,
                                double *out_rouge1,
                                double *out_rouge2,
                                double *out_rouge_l);

/**
 * Free a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must have been returned by this library and not freed before.
 */
void mpsum_string_free(char *s);

/**
 * Free a score array returned by `mpsum_score_sentences`.
 *
 * # Safety
 * `scores`/`len` must match a successful `mpsum_score_sentences` call.
 */
void mpsum_scores_free(double *scores, size_t len);

/**
 * The last error message raised on this thread, or null if none. The
 * caller owns the returned string (free with `mpsum_string_free`).
 */
char *mpsum_last_error_message(void);

/**
 * The checkpoint format tag this library reads.
 */
const char *mpsum_format_tag(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MPSUM_H */
