#ifndef AUTKC_H
#define AUTKC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AutkcStatus {
  AUTKC_STATUS_OK = 0,
  AUTKC_STATUS_NULL_POINTER = 1,
  AUTKC_STATUS_INVALID_ARGUMENT = 2,
  AUTKC_STATUS_OUT_OF_RANGE = 3,
  AUTKC_STATUS_NON_FINITE = 4,
  AUTKC_STATUS_INVALID_LOSS = 5,
  AUTKC_STATUS_CLASS_MISMATCH = 6,
  AUTKC_STATUS_PANIC = 7,
} AutkcStatus;

/**
 * A parsed loss such as `autkc-exp@5`.
 */
typedef struct AutkcLoss AutkcLoss;

/**
 * A growing set of scored samples with one class count.
 */
typedef struct AutkcScoreSet AutkcScoreSet;

/**
 * Pair counts comparing AUTKC with top-k accuracy.
 */
typedef struct AutkcComparison {
  uint64_t r;
  uint64_t s;
  uint64_t p;
  uint64_t q;
} AutkcComparison;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *autkc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *autkc_version(void);

/**
 * Rank of `label` with every tie broken against it (1 = top).
 */
enum AutkcStatus autkc_worst_case_rank(const double *scores_ptr,
                                       size_t classes,
                                       size_t label,
                                       size_t *out_rank);

/**
 * Average top-k error over `k = 1..=big_k` for one sample.
 */
enum AutkcStatus autkc_aerr(const double *scores_ptr,
                            size_t classes,
                            size_t label,
                            size_t big_k,
                            double *out);

/**
 * Writes `classes` probabilities to `out`.
 */
enum AutkcStatus autkc_softmax(const double *scores_ptr, size_t classes, double *out);

/**
 * Enumerated pair counts for `1 <= k < big_k <= classes`.
 */
enum AutkcStatus autkc_compare_metrics(size_t classes,
                                       size_t k,
                                       size_t big_k,
                                       struct AutkcComparison *out);

enum AutkcStatus autkc_score_set_new(size_t classes, struct AutkcScoreSet **out);

/**
 * Appends one sample; `classes` must match the set.
 */
enum AutkcStatus autkc_score_set_push(struct AutkcScoreSet *set,
                                      const double *scores_ptr,
                                      size_t classes,
                                      size_t label);

enum AutkcStatus autkc_score_set_len(const struct AutkcScoreSet *set, size_t *out);

/**
 * Dataset AUTKC↑ at cutoff `big_k`.
 */
enum AutkcStatus autkc_score_set_autkc_up(const struct AutkcScoreSet *set,
                                          size_t big_k,
                                          double *out);

/**
 * Writes top-k accuracy for `k = 1..=k_max` into `out[0..k_max]`.
 */
enum AutkcStatus autkc_score_set_topk_curve(const struct AutkcScoreSet *set,
                                            size_t k_max,
                                            double *out);

/**
 * Releases a set; NULL is ignored.
 */
void autkc_score_set_free(struct AutkcScoreSet *set);

/**
 * Parses a loss spec such as `ce`, `l5@3` or `autkc-exp@5`.
 */
enum AutkcStatus autkc_loss_parse(const char *spec, struct AutkcLoss **out);

/**
 * Loss value at raw `scores`; the gradient is written to `grad` (length
 * `classes`) unless it is NULL.
 */
enum AutkcStatus autkc_loss_eval(const struct AutkcLoss *loss,
                                 const double *scores_ptr,
                                 size_t classes,
                                 size_t label,
                                 double *out_value,
                                 double *grad);

void autkc_loss_free(struct AutkcLoss *loss);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AUTKC_H */
