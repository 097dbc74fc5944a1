/* Generated by cbindgen from crates/ffi/src/lib.rs. */

#ifndef COCHLEA_H
#define COCHLEA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CochleaStatus {
  COCHLEA_STATUS_OK = 0,
  COCHLEA_STATUS_NULL_POINTER = 1,
  COCHLEA_STATUS_INVALID_ARGUMENT = 2,
  COCHLEA_STATUS_IO = 3,
  COCHLEA_STATUS_PARSE = 4,
  /**
   * The algorithm ran but found no answer.
   */
  COCHLEA_STATUS_ALGORITHM = 5,
  /**
   * The output buffer is too small.
   */
  COCHLEA_STATUS_BUFFER_TOO_SMALL = 6,
  COCHLEA_STATUS_PANIC = 7,
} CochleaStatus;

/**
 * Distance-vs-frequency curves.
 */
typedef struct CochleaDvf CochleaDvf;

/**
 * Ordered contact positions, most apical first.
 */
typedef struct CochleaResult CochleaResult;

/**
 * A spiral cochlea model.
 */
typedef struct CochleaSpiral CochleaSpiral;

/**
 * A 3-D image.
 */
typedef struct CochleaVolume CochleaVolume;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *cochlea_last_error(void);

/**
 * Library version as a static string.
 */
const char *cochlea_version(void);

/**
 * Volume from `dims[0] * dims[1] * dims[2]` samples, x fastest.
 *
 * # Safety
 * `dims`, `spacing` and `origin` point to 3 values; `data` to `len` values.
 */
enum CochleaStatus cochlea_volume_new(const size_t *dims,
                                      const double *spacing,
                                      const double *origin,
                                      const float *data,
                                      size_t len,
                                      struct CochleaVolume **out);

/**
 * # Safety
 * `path` is a NUL-terminated string; `out` is writable.
 */
enum CochleaStatus cochlea_volume_load(const char *path, struct CochleaVolume **out);

/**
 * # Safety
 * `v` is a live volume handle; `path` is a NUL-terminated string.
 */
enum CochleaStatus cochlea_volume_save(const struct CochleaVolume *v, const char *path);

/**
 * # Safety
 * `v` is null or a handle not yet freed.
 */
void cochlea_volume_free(struct CochleaVolume *v);

/**
 * Model with the built-in spiral parameters.
 *
 * # Safety
 * `out` is writable.
 */
enum CochleaStatus cochlea_model_default(struct CochleaSpiral **out);

/**
 * # Safety
 * `path` is a NUL-terminated string; `out` is writable.
 */
enum CochleaStatus cochlea_model_load(const char *path, struct CochleaSpiral **out);

/**
 * # Safety
 * `m` is null or a handle not yet freed.
 */
void cochlea_model_free(struct CochleaSpiral *m);

/**
 * Renders one phantom case for the named array preset. `bbox_out` receives
 * `min x, y, z, max x, y, z` of the region to search.
 *
 * # Safety
 * `array` is a NUL-terminated string; `bbox_out` has room for 6 values;
 * the output handles are writable.
 */
enum CochleaStatus cochlea_phantom_case(const char *array,
                                        uint64_t seed,
                                        bool clean,
                                        struct CochleaVolume **volume_out,
                                        struct CochleaSpiral **model_out,
                                        struct CochleaResult **truth_out,
                                        double *bbox_out);

/**
 * Graph path-finding localizer with default parameters.
 *
 * # Safety
 * Handles are live; `bbox` has 6 values; `array` is NUL-terminated; `out` is writable.
 */
enum CochleaStatus cochlea_localize_gp(const struct CochleaVolume *volume,
                                       const double *bbox,
                                       const char *array,
                                       const struct CochleaSpiral *model,
                                       struct CochleaResult **out);

/**
 * Centerline localizer with default parameters.
 *
 * # Safety
 * As for [`cochlea_localize_gp`].
 */
enum CochleaStatus cochlea_localize_cl(const struct CochleaVolume *volume,
                                       const double *bbox,
                                       const char *array,
                                       const struct CochleaSpiral *model,
                                       struct CochleaResult **out);

/**
 * Active-contour localizer with default parameters.
 *
 * # Safety
 * Handles are live; `bbox` has 6 values; `array` is NUL-terminated; `out` is writable.
 */
enum CochleaStatus cochlea_localize_snake(const struct CochleaVolume *volume,
                                          const double *bbox,
                                          const char *array,
                                          struct CochleaResult **out);

/**
 * Result from `n` contact positions given as `x, y, z` triples.
 *
 * # Safety
 * `xyz` has `3 * n` values; `out` is writable.
 */
enum CochleaStatus cochlea_result_new(const double *xyz, size_t n, struct CochleaResult **out);

/**
 * Number of contacts; 0 for a null handle.
 *
 * # Safety
 * `r` is null or live.
 */
size_t cochlea_result_len(const struct CochleaResult *r);

/**
 * Copies contact positions as `x, y, z` triples into `xyz` (room for `cap` values).
 *
 * # Safety
 * `r` is live; `xyz` has room for `cap` values.
 */
enum CochleaStatus cochlea_result_contacts(const struct CochleaResult *r, double *xyz, size_t cap);

/**
 * # Safety
 * `r` is null or a handle not yet freed.
 */
void cochlea_result_free(struct CochleaResult *r);

/**
 * Curves of the contacts in `r` against `model` on a grid of `grid` frequencies.
 *
 * # Safety
 * Handles are live; `out` is writable.
 */
enum CochleaStatus cochlea_dvf_build(const struct CochleaResult *r,
                                     const struct CochleaSpiral *model,
                                     size_t grid,
                                     struct CochleaDvf **out);

/**
 * # Safety
 * `path` is a NUL-terminated string; `out` is writable.
 */
enum CochleaStatus cochlea_dvf_load(const char *path, struct CochleaDvf **out);

/**
 * # Safety
 * `d` is live; `path` is a NUL-terminated string.
 */
enum CochleaStatus cochlea_dvf_save(const struct CochleaDvf *d, const char *path);

/**
 * Number of curves; 0 for a null handle.
 *
 * # Safety
 * `d` is null or live.
 */
size_t cochlea_dvf_len(const struct CochleaDvf *d);

/**
 * # Safety
 * `d` is null or a handle not yet freed.
 */
void cochlea_dvf_free(struct CochleaDvf *d);

/**
 * Lowest-cost configuration under the published weights of `family`
 * (`MD`, `AB` or `CO`). Writes the `+`/`-` mask, NUL-terminated, into
 * `mask` (room for `cap` bytes) and the cost into `cost`.
 *
 * # Safety
 * `d` is live; `family` is NUL-terminated; `mask` has `cap` bytes; `cost` is writable.
 */
enum CochleaStatus cochlea_config_select(const struct CochleaDvf *d,
                                         const char *family,
                                         char *mask,
                                         size_t cap,
                                         double *cost);

/**
 * Distance of `mask` from `reference`, both `+`/`-` strings.
 *
 * # Safety
 * Both strings are NUL-terminated; `out` is writable.
 */
enum CochleaStatus cochlea_config_distance(const char *mask, const char *reference, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COCHLEA_H */
