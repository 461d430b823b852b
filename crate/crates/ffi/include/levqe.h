#ifndef LEVQE_H
#define LEVQE_H

/* Generated by cbindgen from crates/ffi/src; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LqStatus {
  LQ_STATUS_OK = 0,
  /**
   * Null pointer, bad UTF-8 or an out-of-range argument.
   */
  LQ_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Input violates a data invariant (tag layout, lengths, markers).
   */
  LQ_STATUS_DATA = 2,
  /**
   * A pluggable component broke its protocol.
   */
  LQ_STATUS_PROTOCOL = 3,
  /**
   * A Rust panic was caught at the boundary.
   */
  LQ_STATUS_INTERNAL = 4,
} LqStatus;

typedef enum LqScope {
  LQ_SCOPE_ALL = 0,
  LQ_SCOPE_WORDS = 1,
  LQ_SCOPE_GAPS = 2,
} LqScope;

/**
 * Pooled confusion counts over added sentence pairs.
 */
typedef struct LqEvaluator LqEvaluator;

/**
 * Word and gap tags in the alternating `gap, word, ..., gap` layout.
 */
typedef struct LqTags LqTags;

typedef struct LqMetrics {
  double mcc;
  double f1_ok;
  double f1_bad;
  uint64_t tp;
  uint64_t fp;
  uint64_t tn;
  uint64_t fn_;
} LqMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. Valid until the
 * next `lq_` call on the same thread.
 */
const char *lq_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lq_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void lq_string_free(char *s);

/**
 * Edit cost of turning `hyp` into `reference`, with or without block shifts.
 *
 * # Safety
 * String arguments must be valid NUL-terminated strings; `cost` must be
 * writable.
 */
enum LqStatus lq_edit_cost(const char *hyp, const char *reference, bool shifts, size_t *cost);

/**
 * Sentence TER with shifts. Fails on an empty reference.
 *
 * # Safety
 * As for [`lq_edit_cost`].
 */
enum LqStatus lq_ter(const char *hyp, const char *reference, double *ter);

/**
 * Reference tags of `mt` against its post-edit `pe`.
 *
 * # Safety
 * String arguments must be valid; `tags` must be writable.
 */
enum LqStatus lq_tags_from_pair(const char *mt, const char *pe, struct LqTags **tags);

/**
 * Parses a tag line such as `"OK BAD OK"`.
 *
 * # Safety
 * `line` must be valid; `tags` must be writable.
 */
enum LqStatus lq_tags_parse(const char *line, struct LqTags **tags);

/**
 * Number of tokens (words or subwords) the tags describe.
 *
 * # Safety
 * `tags` must be a live handle.
 */
size_t lq_tags_token_count(const struct LqTags *tags);

/**
 * Tag at flat position `index` (even = gap, odd = token): 1 for BAD,
 * 0 for OK.
 *
 * # Safety
 * `tags` must be a live handle; `bad` must be writable.
 */
enum LqStatus lq_tags_get(const struct LqTags *tags, size_t index, bool *bad);

/**
 * The tag line; release with [`lq_string_free`]. Null on a null handle.
 *
 * # Safety
 * `tags` must be null or a live handle.
 */
char *lq_tags_to_string(const struct LqTags *tags);

/**
 * # Safety
 * `tags` must be null or a handle not yet freed.
 */
void lq_tags_free(struct LqTags *tags);

/**
 * Collapses subword tags to word tags. `marker` may be null for `@@`.
 *
 * # Safety
 * String arguments must be valid; `subword_tags` must be live; `word_tags`
 * must be writable.
 */
enum LqStatus lq_subword_to_word(const char *tokens,
                                 const char *marker,
                                 const struct LqTags *subword_tags,
                                 struct LqTags **word_tags);

/**
 * Subword tags from naive subword tags and word tags that collapse back to
 * the word tags exactly. `marker` may be null for `@@`.
 *
 * # Safety
 * As for [`lq_subword_to_word`].
 */
enum LqStatus lq_heuristic_subword(const char *tokens,
                                   const char *marker,
                                   const struct LqTags *naive_tags,
                                   const struct LqTags *word_tags,
                                   struct LqTags **subword_tags);

/**
 * MCC of raw confusion counts (BAD positive). Fails when all are zero.
 *
 * # Safety
 * `value` must be writable.
 */
enum LqStatus lq_mcc(uint64_t tp, uint64_t fp, uint64_t tn, uint64_t fn_, double *value);

struct LqEvaluator *lq_evaluator_new(enum LqScope scope);

/**
 * Adds one sentence's predicted and gold tags to the pool.
 *
 * # Safety
 * All handles must be live.
 */
enum LqStatus lq_evaluator_add(struct LqEvaluator *ev,
                               const struct LqTags *pred,
                               const struct LqTags *gold);

/**
 * Pooled MCC, F1-OK, F1-BAD and counts. Fails if nothing was added.
 *
 * # Safety
 * `ev` must be live; `metrics` must be writable.
 */
enum LqStatus lq_evaluator_metrics(const struct LqEvaluator *ev, struct LqMetrics *metrics);

/**
 * # Safety
 * `ev` must be null or a handle not yet freed.
 */
void lq_evaluator_free(struct LqEvaluator *ev);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEVQE_H */
