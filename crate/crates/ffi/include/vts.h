#ifndef VTS_H
#define VTS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VtsStatus {
  VTS_STATUS_OK = 0,
  VTS_STATUS_NULL_POINTER = 1,
  VTS_STATUS_INVALID_ARGUMENT = 2,
  VTS_STATUS_MISSING_INPUT = 3,
  VTS_STATUS_FORMAT = 4,
  VTS_STATUS_CONFIG = 5,
  VTS_STATUS_CONTRACT = 6,
  VTS_STATUS_IO = 7,
  VTS_STATUS_INTERNAL = 8,
} VtsStatus;

/**
 * Opaque incremental tracker.
 */
typedef struct VtsTracker VtsTracker;

/**
 * Tracker parameters; start from [`vts_tracker_params_default`].
 */
typedef struct VtsTrackerParams {
  double similarity_threshold;
  double mc_epsilon;
  uint32_t max_gap;
  size_t embedding_dim;
} VtsTrackerParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *vts_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vts_version(void);

/**
 * IoU of two quadrilaterals given as 8 coordinates `x0,y0,...,x3,y3`.
 *
 * # Safety
 * `a` and `b` must point to 8 doubles; `out` must be writable.
 */
enum VtsStatus vts_polygon_iou(const double *a, const double *b, double *out);

/**
 * Minimum-cost assignment on a row-major `rows x cols` matrix. Non-finite
 * entries mark forbidden pairs. Writes at most `capacity` pairs into
 * `out_rows`/`out_cols` and the pair count into `out_len`; a capacity of
 * `min(rows, cols)` is always enough.
 *
 * # Safety
 * `cost` must hold `rows * cols` doubles; the output arrays must hold `capacity` entries.
 */
enum VtsStatus vts_assign(const double *cost,
                          size_t rows,
                          size_t cols,
                          size_t *out_rows,
                          size_t *out_cols,
                          size_t capacity,
                          size_t *out_len);

/**
 * Cosine similarity of a region's character features to a template, both
 * row-major with `dim` columns. Shorter matrices are zero padded.
 *
 * # Safety
 * `region` must hold `region_rows * dim` doubles, `template` `template_rows * dim`.
 */
enum VtsStatus vts_teacher_score(const double *region,
                                 size_t region_rows,
                                 const double *template_,
                                 size_t template_rows,
                                 size_t dim,
                                 double *out);

struct VtsTrackerParams vts_tracker_params_default(void);

/**
 * # Safety
 * `params` must be null (defaults) or valid; `out` must be writable.
 */
enum VtsStatus vts_tracker_new(const struct VtsTrackerParams *params, struct VtsTracker **out);

/**
 * Links one frame of `count` embeddings (row-major, `embedding_dim` wide).
 * `quads` may be null or hold `count * 8` coordinates. `out_ids[i]` gets the
 * stream id of observation `i`, or -1 when it was rejected.
 *
 * # Safety
 * `tracker` must come from [`vts_tracker_new`]; arrays must have the stated sizes.
 */
enum VtsStatus vts_tracker_push_frame(struct VtsTracker *tracker,
                                      uint32_t frame,
                                      const double *embeddings,
                                      const double *quads,
                                      size_t count,
                                      int64_t *out_ids);

/**
 * Number of streams opened so far; 0 for a null handle.
 *
 * # Safety
 * `tracker` must be null or come from [`vts_tracker_new`].
 */
size_t vts_tracker_stream_count(const struct VtsTracker *tracker);

/**
 * # Safety
 * `tracker` must be null or come from [`vts_tracker_new`], and not be used afterwards.
 */
void vts_tracker_free(struct VtsTracker *tracker);

/**
 * Generates a synthetic scenario into `out_dir`. `spec_path` may be null
 * for the default scenario; `seed` overrides the scenario seed.
 *
 * # Safety
 * Strings must be null or NUL-terminated UTF-8.
 */
enum VtsStatus vts_run_sim(const char *spec_path, const char *out_dir, uint64_t seed);

/**
 * Same as the `detect` command. `out_dir` may be null.
 *
 * # Safety
 * Strings must be null or NUL-terminated UTF-8.
 */
enum VtsStatus vts_run_detect(const char *config_path, const char *out_dir);

/**
 * Same as the `spot` command. `out_dir` may be null.
 *
 * # Safety
 * Strings must be null or NUL-terminated UTF-8.
 */
enum VtsStatus vts_run_spot(const char *config_path, const char *out_dir);

/**
 * Same as the `eval` command. `out_dir` may be null.
 *
 * # Safety
 * Strings must be null or NUL-terminated UTF-8.
 */
enum VtsStatus vts_run_eval(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VTS_H */
