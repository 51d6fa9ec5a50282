#ifndef CVHSSR_H
#define CVHSSR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define CVHSSR_PRESET_TINY 0

#define CVHSSR_PRESET_SMALL 1

typedef enum {
  CVHSSR_STATUS_OK = 0,
  CVHSSR_STATUS_NULL_POINTER = 1,
  CVHSSR_STATUS_INVALID_ARGUMENT = 2,
  CVHSSR_STATUS_SHAPE = 3,
  CVHSSR_STATUS_IO = 4,
  CVHSSR_STATUS_FORMAT = 5,
  CVHSSR_STATUS_PANIC = 6,
} CvhssrStatus;

/**
 * Opaque model handle.
 */
typedef struct CvhssrModel CvhssrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on the calling thread, or null if
 * none. The pointer stays valid until the next failing call on this thread.
 */
const char *cvhssr_last_error(void);

/**
 * Builds a randomly initialized model for `preset` (a `CVHSSR_PRESET_*`
 * code) and `scale` (2 or 4).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
CvhssrStatus cvhssr_model_init(uint32_t preset, uint32_t scale, uint64_t seed, CvhssrModel **out);

/**
 * Loads a model from a weight file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer to
 * writable storage for one handle.
 */
CvhssrStatus cvhssr_model_load(const char *path, CvhssrModel **out);

/**
 * Releases a handle. Null is accepted and ignored.
 *
 * # Safety
 * `model` must be null or a handle from this library not yet freed.
 */
void cvhssr_model_free(CvhssrModel *model);

/**
 * Switches channel-attention pooling between global (`enabled = false`)
 * and local. A zero `window_height` or `window_width` selects the default
 * window.
 *
 * # Safety
 * `model` must be a live handle not used concurrently by other threads.
 */
CvhssrStatus cvhssr_model_set_tlc(CvhssrModel *model,
                                  bool enabled,
                                  uint32_t window_height,
                                  uint32_t window_width);

/**
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
CvhssrStatus cvhssr_model_scale(const CvhssrModel *model, uint32_t *out);

/**
 * Super-resolves a stereo pair of `height × width` images. Each output
 * buffer must hold `out_len = 3·(s·height)·(s·width)` floats, `s` being
 * the model scale.
 *
 * # Safety
 * `left` and `right` must point to `3·height·width` readable floats;
 * `out_left` and `out_right` to `out_len` writable floats each.
 */
CvhssrStatus cvhssr_model_forward(const CvhssrModel *model,
                                  const float *left,
                                  const float *right,
                                  size_t height,
                                  size_t width,
                                  float *out_left,
                                  float *out_right,
                                  size_t out_len);

/**
 * Number of learnable scalars for a preset and scale.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
CvhssrStatus cvhssr_param_count(uint32_t preset, uint32_t scale, uint64_t *out);

/**
 * PSNR in dB of two RGB images with peak 1; `+inf` when identical.
 *
 * # Safety
 * `a` and `b` must point to `3·height·width` readable floats and `out` must
 * be a valid pointer.
 */
CvhssrStatus cvhssr_psnr(const float *a, const float *b, size_t height, size_t width, double *out);

/**
 * Gaussian-window SSIM of two RGB images, averaged over channels. Both
 * sides must be at least 11 pixels.
 *
 * # Safety
 * As for [`cvhssr_psnr`].
 */
CvhssrStatus cvhssr_ssim(const float *a, const float *b, size_t height, size_t width, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CVHSSR_H */
