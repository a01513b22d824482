#ifndef REFSEL_H
#define REFSEL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum RefselStatus {
  REFSEL_STATUS_OK = 0,
  REFSEL_STATUS_NULL_ARGUMENT = 1,
  REFSEL_STATUS_INVALID_UTF8 = 2,
  REFSEL_STATUS_IO = 3,
  REFSEL_STATUS_VALIDATION = 4,
  REFSEL_STATUS_CONFIG = 5,
  REFSEL_STATUS_NUMERICAL = 6,
  REFSEL_STATUS_BUFFER_TOO_SMALL = 7,
  REFSEL_STATUS_OTHER = 8,
  REFSEL_STATUS_PANIC = 9,
} RefselStatus;

// A trained model loaded from a checkpoint directory.
typedef struct RefselModel RefselModel;

// A parsed corpus split.
typedef struct RefselSplit RefselSplit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *refsel_last_error(void);

// Library version as a static NUL-terminated string.
const char *refsel_version(void);

// Parses a JSONL corpus file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum RefselStatus refsel_split_load(const char *path, struct RefselSplit **out);

// Parses JSONL corpus text held in memory.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum RefselStatus refsel_split_parse(const char *text, struct RefselSplit **out);

// # Safety
// `split` must come from `refsel_split_load` or `refsel_split_parse`, or be null.
void refsel_split_free(struct RefselSplit *split);

// # Safety
// `split` must be a live handle.
size_t refsel_split_document_count(const struct RefselSplit *split);

// # Safety
// `split` must be a live handle.
size_t refsel_split_mention_count(const struct RefselSplit *split);

// Loads a model checkpoint directory.
//
// # Safety
// `dir` must be a NUL-terminated string and `out` a valid pointer.
enum RefselStatus refsel_model_load(const char *dir, struct RefselModel **out);

// # Safety
// `model` must come from `refsel_model_load`, or be null.
void refsel_model_free(struct RefselModel *model);

// Number of output classes of the model's label scheme.
//
// # Safety
// `model` must be a live handle.
size_t refsel_model_class_count(const struct RefselModel *model);

// Predicted class of every mention in corpus order. `capacity` is the
// length of `labels`; `written` receives the mention count, also when the
// buffer is too small.
//
// # Safety
// Handles must be live; `labels` must hold `capacity` elements and
// `written` must be valid.
enum RefselStatus refsel_model_predict(const struct RefselModel *model,
                                       const struct RefselSplit *split,
                                       uint32_t *labels,
                                       size_t capacity,
                                       size_t *written);

// Macro-F1 and accuracy of the model on a split.
//
// # Safety
// Handles must be live and the out pointers valid.
enum RefselStatus refsel_model_evaluate(const struct RefselModel *model,
                                        const struct RefselSplit *split,
                                        double *macro_f1,
                                        double *accuracy);

// Runs the finite-difference gradient checks. Returns `Numerical` when any
// check exceeds `tolerance`; `max_error` receives the worst relative error
// either way.
//
// # Safety
// `max_error` must be valid.
enum RefselStatus refsel_gradcheck(uint64_t seed, double tolerance, double *max_error);

// Runs the command-line interface with `argv[0..argc]` and returns its
// exit code. `argv[0]` is the program name.
//
// # Safety
// `argv` must hold `argc` NUL-terminated strings.
int refsel_cli_run(int argc, const char *const *argv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REFSEL_H */
