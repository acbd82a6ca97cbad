#ifndef SELFTEACH_H
#define SELFTEACH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes of every fallible call.
 */
typedef enum StStatus {
  StStatus_Ok = 0,
  StStatus_NullPointer = 1,
  StStatus_InvalidUtf8 = 2,
  StStatus_Io = 3,
  StStatus_Data = 4,
  StStatus_Shape = 5,
  StStatus_Numerical = 6,
  StStatus_BufferTooSmall = 7,
  StStatus_Panic = 8,
} StStatus;

/*
 Opaque handle to a loaded scorer.
 */
typedef struct StScorer StScorer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null if none. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *st_last_error_message(void);

/*
 Loads a multiple-choice checkpoint into `*out`.

 # Safety
 `path` must be a nul-terminated string and `out` a writable pointer.
 */
enum StStatus st_scorer_load(const char *path, struct StScorer **out);

/*
 Writes the probability of each of `n_options` options into `out_probs`,
 which must hold at least `out_len` values.

 # Safety
 `scorer` must come from [`st_scorer_load`]; `options` must point to
 `n_options` nul-terminated strings; `out_probs` must be writable for
 `out_len` values.
 */
enum StStatus st_scorer_predict_mc(const struct StScorer *scorer,
                                   const char *question,
                                   const char *const *options,
                                   uintptr_t n_options,
                                   const char *context,
                                   double *out_probs,
                                   uintptr_t out_len);

/*
 Releases a scorer; null is ignored.

 # Safety
 `scorer` must come from [`st_scorer_load`] and not be used afterwards.
 */
void st_scorer_free(struct StScorer *scorer);

/*
 Character-level F1 in [0, 1] after answer normalization.

 # Safety
 `pred` and `gold` must be nul-terminated strings; `out` must be writable.
 */
enum StStatus st_char_f1(const char *pred, const char *gold, double *out);

/*
 1 if the normalized strings are equal, else 0.

 # Safety
 `pred` and `gold` must be nul-terminated strings; `out` must be writable.
 */
enum StStatus st_exact_match(const char *pred, const char *gold, uint8_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SELFTEACH_H */
