#ifndef SIAMSA_H
#define SIAMSA_H

/* Generated by cbindgen from the siamsa-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every API call.
typedef enum SiamsaStatus {
  // The call succeeded.
  SIAMSA_OK = 0,
  // A required pointer argument was null.
  SIAMSA_NULL_ARGUMENT = 1,
  // An argument value was rejected (bad size, degenerate box, ...).
  SIAMSA_INVALID_ARGUMENT = 2,
  // The call requires an initialized tracker.
  SIAMSA_INVALID_STATE = 3,
  // A config or weights file could not be read or parsed.
  SIAMSA_PARSE_ERROR = 4,
  // An internal invariant failed; this is a bug, not a usage error.
  SIAMSA_INTERNAL_ERROR = 5,
} SiamsaStatus;

// Opaque tracker handle. Create with one of the constructors, destroy with
// `siamsa_tracker_free`. A handle is not thread-safe; use one per thread.
typedef struct SiamsaTracker SiamsaTracker;

// Axis-aligned box in pixels: top-left corner plus extents.
typedef struct SiamsaBox {
  double x;
  double y;
  double w;
  double h;
} SiamsaBox;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a tracker with the default configuration and seeded weights.
// Writes the handle to `out`; on failure `out` is left untouched.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum SiamsaStatus siamsa_tracker_new(uint64_t seed,
                                     bool enable_psan,
                                     bool enable_sa_apn,
                                     struct SiamsaTracker **out);

// Creates a tracker from a configuration file and an optional weights file
// (pass null for seeded weights).
//
// # Safety
// `config_path` must be a valid NUL-terminated path; `weights_path` must
// be null or a valid NUL-terminated path; `out` must be a valid pointer.
enum SiamsaStatus siamsa_tracker_new_from_files(const char *config_path,
                                                const char *weights_path,
                                                struct SiamsaTracker **out);

// Initializes the tracker on a frame and the object's box.
//
// # Safety
// `handle` must come from a constructor and not be freed; `frame_rgb8`
// must point to `width * height * 3` readable bytes.
enum SiamsaStatus siamsa_tracker_init(struct SiamsaTracker *handle,
                                      const uint8_t *frame_rgb8,
                                      uint32_t width,
                                      uint32_t height,
                                      struct SiamsaBox init_box);

// Tracks one frame; writes the estimated box and its score in `[0, 1]`.
// Fails with `SiamsaInvalidState` before `siamsa_tracker_init`.
//
// # Safety
// Same pointer contracts as `siamsa_tracker_init`; `out_box` and
// `out_score` must each be valid or null (null means "don't care").
enum SiamsaStatus siamsa_tracker_track(struct SiamsaTracker *handle,
                                       const uint8_t *frame_rgb8,
                                       uint32_t width,
                                       uint32_t height,
                                       struct SiamsaBox *out_box,
                                       double *out_score);

// Current box estimate without advancing a frame; fails before init.
//
// # Safety
// `handle` must be valid; `out_box` must be a valid pointer.
enum SiamsaStatus siamsa_tracker_current_box(const struct SiamsaTracker *handle,
                                             struct SiamsaBox *out_box);

// Releases a tracker handle. Passing null is a no-op.
//
// # Safety
// `handle` must come from a constructor and must not be used afterwards.
void siamsa_tracker_free(struct SiamsaTracker *handle);

// Message describing the most recent failure on this thread. The pointer
// stays valid until the next failing call on the same thread.
const char *siamsa_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *siamsa_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIAMSA_H */
