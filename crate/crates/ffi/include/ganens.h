#ifndef GANENS_H
#define GANENS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GanensStatus {
  GANENS_STATUS_OK = 0,
  GANENS_STATUS_NULL_POINTER = 1,
  GANENS_STATUS_INVALID_ARGUMENT = 2,
  GANENS_STATUS_IO = 3,
  GANENS_STATUS_FORMAT = 4,
  GANENS_STATUS_NUMERIC = 5,
  GANENS_STATUS_BUFFER_TOO_SMALL = 6,
  GANENS_STATUS_PANIC = 7,
} GanensStatus;

typedef enum GanensMetric {
  GANENS_METRIC_DENSITY_COVERAGE = 0,
  GANENS_METRIC_FRECHET = 1,
} GanensMetric;

typedef enum GanensAlgorithm {
  GANENS_ALGORITHM_EXHAUSTIVE = 0,
  GANENS_ALGORITHM_RANDOM = 1,
  GANENS_ALGORITHM_EVOLUTIONARY = 2,
} GanensAlgorithm;

/**
 * Opaque loaded pool.
 */
typedef struct GanensPool GanensPool;

/**
 * Opaque selection result.
 */
typedef struct GanensSelection GanensSelection;

/**
 * Search and metric settings for [`ganens_select`]. Start from
 * [`ganens_search_options_default`].
 */
typedef struct GanensSearchOptions {
  enum GanensMetric metric;
  uint32_t k;
  enum GanensAlgorithm algorithm;
  uint64_t budget;
  uint32_t population;
  double crossover_rate;
  /**
   * Per-bit flip probability; a value <= 0 means `1 / pool size`.
   */
  double mutation_rate;
  uint64_t seed;
  /**
   * Union budget; 0 means the real-set size.
   */
  uint64_t total;
  /**
   * Non-zero selects by Intra-d alone.
   */
  uint8_t uniobjective;
} GanensSearchOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ganens_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ganens_version(void);

enum GanensStatus ganens_pool_load(const char *manifest_path, struct GanensPool **out);

void ganens_pool_free(struct GanensPool *pool);

/**
 * Number of generators, or 0 for NULL.
 */
size_t ganens_pool_size(const struct GanensPool *pool);

/**
 * Embedding dimension, or 0 for NULL.
 */
size_t ganens_pool_dim(const struct GanensPool *pool);

/**
 * Copies the id of generator `index` (canonical order) into `buf` as a
 * NUL-terminated string. `needed` receives the required size including the
 * terminator; on `GANENS_STATUS_BUFFER_TOO_SMALL` nothing is written.
 */
enum GanensStatus ganens_pool_generator_id(const struct GanensPool *pool,
                                           size_t index,
                                           char *buf,
                                           size_t buf_len,
                                           size_t *needed);

/**
 * `d(reference, candidate)` for two row-major matrices of width `dim`.
 */
enum GanensStatus ganens_metric_d(const float *reference,
                                  size_t reference_rows,
                                  const float *candidate,
                                  size_t candidate_rows,
                                  size_t dim,
                                  enum GanensMetric metric,
                                  uint32_t k,
                                  double *out);

enum GanensStatus ganens_density_coverage(const float *reference,
                                          size_t reference_rows,
                                          const float *candidate,
                                          size_t candidate_rows,
                                          size_t dim,
                                          uint32_t k,
                                          double *density,
                                          double *coverage);

enum GanensStatus ganens_harmonic_d(double density, double coverage, double *out);

/**
 * Writes `n` quotas summing to `total` into `quotas`.
 */
enum GanensStatus ganens_quota_plan(size_t total, size_t n, size_t *quotas);

/**
 * Real-vs-synthetic g-mean gap in percent (unrounded).
 */
enum GanensStatus ganens_gap(double gmean_real, double gmean_synth, double *gamma_rs);

struct GanensSearchOptions ganens_search_options_default(void);

/**
 * Runs the search over `pool` and returns the chosen ensemble.
 */
enum GanensStatus ganens_select(const struct GanensPool *pool,
                                const struct GanensSearchOptions *options,
                                struct GanensSelection **out);

void ganens_selection_free(struct GanensSelection *selection);

/**
 * Number of chosen generators, or 0 for NULL.
 */
size_t ganens_selection_len(const struct GanensSelection *selection);

/**
 * Pool index and quota of the `i`-th chosen generator.
 */
enum GanensStatus ganens_selection_member(const struct GanensSelection *selection,
                                          size_t i,
                                          size_t *pool_index,
                                          size_t *quota);

/**
 * Intra-d and Inter-d of the selection in raw metric units.
 */
enum GanensStatus ganens_selection_objectives(const struct GanensSelection *selection,
                                              double *intra,
                                              double *inter,
                                              size_t *front_size);

/**
 * Writes the selection manifest JSON (same schema as `ganens select`).
 */
enum GanensStatus ganens_selection_write_json(const struct GanensSelection *selection,
                                              const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GANENS_H */
