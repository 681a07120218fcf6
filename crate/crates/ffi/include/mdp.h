#ifndef MDP_FFI_H
#define MDP_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MdpStatus {
  MDP_STATUS_OK = 0,
  MDP_STATUS_INVALID_INPUT = 1,
  MDP_STATUS_IO = 2,
  MDP_STATUS_CALIBRATION = 3,
  MDP_STATUS_FORMAT = 4,
  MDP_STATUS_NUMERIC = 5,
  MDP_STATUS_NULL_POINTER = 6,
  MDP_STATUS_BUFFER_TOO_SMALL = 7,
  MDP_STATUS_PANIC = 8,
} MdpStatus;

typedef enum MdpTargetMode {
  MDP_TARGET_MODE_PANORAMA = 0,
  MDP_TARGET_MODE_PERSPECTIVE = 1,
} MdpTargetMode;

// Opaque handle owning a loaded MDP and its soft z-buffer settings.
typedef struct MdpHandle MdpHandle;

typedef struct MdpInfo {
  size_t width;
  size_t height;
  size_t shells;
  double v_fov_slope;
  double rho_min;
  double rho_max;
  // Inner radius of the innermost shell with content; `rho_min` when empty.
  double motion_bound;
  uint64_t payload_bytes;
} MdpInfo;

// Target pose in the rig frame. `orientation` is a unit quaternion
// `[w, x, y, z]` rotating the body frame (x forward, y left, z up) into the rig.
typedef struct MdpPose {
  double position[3];
  double orientation[4];
  // An [`MdpTargetMode`] value.
  uint32_t mode;
  size_t width;
  size_t height;
  // Perspective horizontal field of view in degrees; `<= 0` selects 90.
  double hfov_deg;
  // Panorama vertical extent; `<= 0` selects the MDP's.
  double v_fov_slope;
} MdpPose;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread, or an empty
// string. Valid until the next call on this thread.
const char *mdp_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *mdp_version(void);

// Opens an MDP container file. On success `*out` holds a handle to release
// with [`mdp_close`].
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum MdpStatus mdp_open(const char *path, struct MdpHandle **out);

// Opens an MDP container held in memory.
//
// # Safety
// `data` must point to `len` readable bytes and `out` be writable.
enum MdpStatus mdp_open_bytes(const uint8_t *data, size_t len, struct MdpHandle **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `handle` must come from [`mdp_open`] or [`mdp_open_bytes`] and not be used afterwards.
void mdp_close(struct MdpHandle *handle);

// # Safety
// `handle` must be live and `out` writable.
enum MdpStatus mdp_info(const struct MdpHandle *handle, struct MdpInfo *out);

// Radius range of shell `index`.
//
// # Safety
// `handle` must be live; `rho_lo` and `rho_hi` writable.
enum MdpStatus mdp_shell_range(const struct MdpHandle *handle,
                               size_t index,
                               double *rho_lo,
                               double *rho_hi);

// Sets the soft z-buffer sharpness `tau` and weight floor `epsilon`.
//
// # Safety
// `handle` must be live.
enum MdpStatus mdp_set_soft_z(struct MdpHandle *handle, double tau, double epsilon);

// Renders `pose` into `rgba`, `width * height * 4` floats of premultiplied
// linear RGBA in row-major order. `*ordering_warning` (optional) is set to 1
// when the pose lies outside the innermost occupied shell, 0 otherwise.
//
// # Safety
// `handle` must be live, `pose` readable, `rgba` writable for `rgba_len`
// floats and `ordering_warning` null or writable.
enum MdpStatus mdp_render(const struct MdpHandle *handle,
                          const struct MdpPose *pose,
                          float *rgba,
                          size_t rgba_len,
                          int32_t *ordering_warning);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MDP_FFI_H */
