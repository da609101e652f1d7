/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef SAT_TRACKER_H
#define SAT_TRACKER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SatStatus {
  SAT_STATUS_OK = 0,
  /**
   * A required pointer was null.
   */
  SAT_STATUS_ERR_NULL = 1,
  SAT_STATUS_ERR_INVALID_ARGUMENT = 2,
  /**
   * File, image or configuration I/O failed.
   */
  SAT_STATUS_ERR_IO = 3,
  SAT_STATUS_ERR_NUMERIC = 4,
  /**
   * A Rust panic was caught; the handle involved should be freed.
   */
  SAT_STATUS_ERR_PANIC = 5,
} SatStatus;

/**
 * Opaque tracker handle.
 */
typedef struct SatTracker SatTracker;

/**
 * Borrowed 8-bit frame, interleaved channels (1 = gray, 3 = RGB).
 */
typedef struct SatImage {
  const uint8_t *data;
  uint32_t width;
  uint32_t height;
  uint32_t channels;
  /**
   * Bytes per row; 0 means tightly packed.
   */
  size_t stride;
} SatImage;

/**
 * Top-left corner and extent, 0-based pixel coordinates.
 */
typedef struct SatBox {
  double x;
  double y;
  double w;
  double h;
} SatBox;

typedef struct SatReport {
  double s_max;
  double bk;
  bool updated;
  bool informative;
} SatReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a tracker on the first frame.
 *
 * `config_path` may be null for defaults; `out_report` may be null.
 *
 * # Safety
 * Pointers must be null or valid for the documented access.
 */
enum SatStatus sat_tracker_new(const struct SatImage *frame,
                               struct SatBox bbox,
                               const char *config_path,
                               struct SatTracker **out_tracker,
                               struct SatReport *out_report);

/**
 * Processes the next frame. `out_report` may be null.
 *
 * # Safety
 * `tracker` must come from [`sat_tracker_new`] and not be freed.
 */
enum SatStatus sat_tracker_step(struct SatTracker *tracker,
                                const struct SatImage *frame,
                                struct SatBox *out_box,
                                struct SatReport *out_report);

/**
 * Current box without processing a frame.
 *
 * # Safety
 * `tracker` must be a live handle.
 */
enum SatStatus sat_tracker_box(const struct SatTracker *tracker, struct SatBox *out_box);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `tracker` must be null or a live handle; it is invalid afterwards.
 */
void sat_tracker_free(struct SatTracker *tracker);

/**
 * Intersection over union of two boxes.
 */
double sat_overlap(struct SatBox a, struct SatBox b);

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call into this library from the same thread.
 */
const char *sat_last_error(void);

/**
 * Library version, static storage.
 */
const char *sat_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SAT_TRACKER_H */
