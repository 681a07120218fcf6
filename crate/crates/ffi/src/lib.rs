//! C ABI over `mdp-core`: open an MDP container, query it and render views
//! into caller-owned buffers.
//!
//! Every function returns an [`MdpStatus`]. On failure a human-readable
//! message is available from [`mdp_last_error_message`] on the same thread.
//! Handles are not synchronized; use one handle per thread or lock externally.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mdp_core::mdp::container::{decode, mdp_read};
use mdp_core::mdp::Mdp;
use mdp_core::pose::{PoseMode, PoseRequest};
use mdp_core::render::{render, SoftZConfig};
use mdp_core::ErrorKind;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MdpStatus {
    Ok = 0,
    InvalidInput = 1,
    Io = 2,
    Calibration = 3,
    Format = 4,
    Numeric = 5,
    NullPointer = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

impl From<ErrorKind> for MdpStatus {
    fn from(k: ErrorKind) -> Self {
        match k {
            ErrorKind::InvalidInput => MdpStatus::InvalidInput,
            ErrorKind::Io => MdpStatus::Io,
            ErrorKind::Calibration => MdpStatus::Calibration,
            ErrorKind::Format => MdpStatus::Format,
            ErrorKind::Numeric => MdpStatus::Numeric,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MdpTargetMode {
    Panorama = 0,
    Perspective = 1,
}

/// Opaque handle owning a loaded MDP and its soft z-buffer settings.
pub struct MdpHandle {
    mdp: Mdp,
    zcfg: SoftZConfig,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MdpInfo {
    pub width: usize,
    pub height: usize,
    pub shells: usize,
    pub v_fov_slope: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Inner radius of the innermost shell with content; `rho_min` when empty.
    pub motion_bound: f64,
    pub payload_bytes: u64,
}

/// Target pose in the rig frame. `orientation` is a unit quaternion
/// `[w, x, y, z]` rotating the body frame (x forward, y left, z up) into the rig.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MdpPose {
    pub position: [f64; 3],
    pub orientation: [f64; 4],
    /// An [`MdpTargetMode`] value.
    pub mode: u32,
    pub width: usize,
    pub height: usize,
    /// Perspective horizontal field of view in degrees; `<= 0` selects 90.
    pub hfov_deg: f64,
    /// Panorama vertical extent; `<= 0` selects the MDP's.
    pub v_fov_slope: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn fail(status: MdpStatus, msg: impl Into<String>) -> MdpStatus {
    set_error(msg);
    status
}

fn core_fail(e: mdp_core::Error) -> MdpStatus {
    fail(e.kind().into(), e.to_string())
}

fn guard(f: impl FnOnce() -> MdpStatus) -> MdpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == MdpStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(MdpStatus::Panic, "internal panic"),
    }
}

fn into_handle(mdp: Mdp, out: *mut *mut MdpHandle) -> MdpStatus {
    let h = Box::new(MdpHandle {
        mdp,
        zcfg: SoftZConfig::default(),
    });
    // SAFETY: the caller checked `out` for null and guarantees it is writable.
    unsafe { *out = Box::into_raw(h) };
    MdpStatus::Ok
}

/// Message describing the most recent failure on this thread, or an empty
/// string. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn mdp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mdp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opens an MDP container file. On success `*out` holds a handle to release
/// with [`mdp_close`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mdp_open(path: *const c_char, out: *mut *mut MdpHandle) -> MdpStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(MdpStatus::NullPointer, "null argument");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(MdpStatus::InvalidInput, "path is not valid UTF-8");
        };
        match mdp_read(Path::new(path)) {
            Ok(m) => into_handle(m, out),
            Err(e) => core_fail(e),
        }
    })
}

/// Opens an MDP container held in memory.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn mdp_open_bytes(data: *const u8, len: usize, out: *mut *mut MdpHandle) -> MdpStatus {
    guard(|| {
        if data.is_null() || out.is_null() {
            return fail(MdpStatus::NullPointer, "null argument");
        }
        match decode(std::slice::from_raw_parts(data, len)) {
            Ok(m) => into_handle(m, out),
            Err(e) => core_fail(e),
        }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `handle` must come from [`mdp_open`] or [`mdp_open_bytes`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mdp_close(handle: *mut MdpHandle) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mdp_info(handle: *const MdpHandle, out: *mut MdpInfo) -> MdpStatus {
    guard(|| {
        let (Some(h), false) = (handle.as_ref(), out.is_null()) else {
            return fail(MdpStatus::NullPointer, "null argument");
        };
        let p = &h.mdp.partition;
        *out = MdpInfo {
            width: h.mdp.mapping.width,
            height: h.mdp.mapping.height,
            shells: h.mdp.shell_count(),
            v_fov_slope: h.mdp.mapping.v_fov_slope,
            rho_min: p.rho_min(),
            rho_max: p.rho_max(),
            motion_bound: h.mdp.innermost_occupied_radius().unwrap_or(p.rho_min()),
            payload_bytes: h.mdp.payload_bytes(),
        };
        MdpStatus::Ok
    })
}

/// Radius range of shell `index`.
///
/// # Safety
/// `handle` must be live; `rho_lo` and `rho_hi` writable.
#[no_mangle]
pub unsafe extern "C" fn mdp_shell_range(
    handle: *const MdpHandle,
    index: usize,
    rho_lo: *mut f64,
    rho_hi: *mut f64,
) -> MdpStatus {
    guard(|| {
        let Some(h) = handle.as_ref() else {
            return fail(MdpStatus::NullPointer, "null handle");
        };
        if rho_lo.is_null() || rho_hi.is_null() {
            return fail(MdpStatus::NullPointer, "null output");
        }
        if index >= h.mdp.shell_count() {
            return fail(MdpStatus::InvalidInput, format!("shell {index} out of range"));
        }
        let (lo, hi) = h.mdp.partition.range(index);
        *rho_lo = lo;
        *rho_hi = hi;
        MdpStatus::Ok
    })
}

/// Sets the soft z-buffer sharpness `tau` and weight floor `epsilon`.
///
/// # Safety
/// `handle` must be live.
#[no_mangle]
pub unsafe extern "C" fn mdp_set_soft_z(handle: *mut MdpHandle, tau: f64, epsilon: f64) -> MdpStatus {
    guard(|| {
        let Some(h) = handle.as_mut() else {
            return fail(MdpStatus::NullPointer, "null handle");
        };
        match SoftZConfig::new(tau, epsilon) {
            Ok(z) => {
                h.zcfg = z;
                MdpStatus::Ok
            }
            Err(e) => core_fail(e),
        }
    })
}

/// Renders `pose` into `rgba`, `width * height * 4` floats of premultiplied
/// linear RGBA in row-major order. `*ordering_warning` (optional) is set to 1
/// when the pose lies outside the innermost occupied shell, 0 otherwise.
///
/// # Safety
/// `handle` must be live, `pose` readable, `rgba` writable for `rgba_len`
/// floats and `ordering_warning` null or writable.
#[no_mangle]
pub unsafe extern "C" fn mdp_render(
    handle: *const MdpHandle,
    pose: *const MdpPose,
    rgba: *mut f32,
    rgba_len: usize,
    ordering_warning: *mut i32,
) -> MdpStatus {
    guard(|| {
        let (Some(h), Some(pose)) = (handle.as_ref(), pose.as_ref()) else {
            return fail(MdpStatus::NullPointer, "null argument");
        };
        if rgba.is_null() {
            return fail(MdpStatus::NullPointer, "null output buffer");
        }
        let needed = pose.width.saturating_mul(pose.height).saturating_mul(4);
        if rgba_len < needed {
            return fail(
                MdpStatus::BufferTooSmall,
                format!("buffer holds {rgba_len} floats, {needed} required"),
            );
        }
        let mode = match pose.mode {
            m if m == MdpTargetMode::Panorama as u32 => PoseMode::Panorama,
            m if m == MdpTargetMode::Perspective as u32 => PoseMode::Perspective,
            m => return fail(MdpStatus::InvalidInput, format!("unknown target mode {m}")),
        };
        let req = PoseRequest {
            position: pose.position,
            orientation: pose.orientation,
            mode,
            hfov_deg: (pose.hfov_deg > 0.0).then_some(pose.hfov_deg),
            v_fov_slope: (pose.v_fov_slope > 0.0).then_some(pose.v_fov_slope),
            ..PoseRequest::identity(PoseMode::Panorama, pose.width, pose.height)
        };
        let out = match req
            .target(h.mdp.mapping.v_fov_slope)
            .and_then(|t| render(&h.mdp, &t, &h.zcfg))
        {
            Ok(o) => o,
            Err(e) => return core_fail(e),
        };
        let dst = std::slice::from_raw_parts_mut(rgba, needed);
        for (d, s) in dst.iter_mut().zip(&out.image.data) {
            *d = *s as f32;
        }
        if !ordering_warning.is_null() {
            *ordering_warning = i32::from(out.warning.is_some());
        }
        MdpStatus::Ok
    })
}
