//! C ABI for the tracker so other languages can drive it frame by frame.
//!
//! The surface is deliberately small: create a tracker handle (seeded or
//! from config/weights files), initialize it on a frame and box, then feed
//! frames. Frames are interleaved 8-bit RGB, row-major, `width * height * 3`
//! bytes. Every function returns a status code; `siamsa_last_error_message`
//! retrieves a human-readable description of the most recent failure on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use siamsa::config::TrackerConfig;
use siamsa::error::Error;
use siamsa::tensor::{Tensor, CHW};
use siamsa::tracker::{BBox, ModelWeights, Tracker};

/// Status codes returned by every API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiamsaStatus {
    /// The call succeeded.
    SiamsaOk = 0,
    /// A required pointer argument was null.
    SiamsaNullArgument = 1,
    /// An argument value was rejected (bad size, degenerate box, ...).
    SiamsaInvalidArgument = 2,
    /// The call requires an initialized tracker.
    SiamsaInvalidState = 3,
    /// A config or weights file could not be read or parsed.
    SiamsaParseError = 4,
    /// An internal invariant failed; this is a bug, not a usage error.
    SiamsaInternalError = 5,
}

/// Axis-aligned box in pixels: top-left corner plus extents.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiamsaBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// Opaque tracker handle. Create with one of the constructors, destroy with
/// `siamsa_tracker_free`. A handle is not thread-safe; use one per thread.
pub struct SiamsaTracker {
    inner: Tracker,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> SiamsaStatus {
    match err {
        Error::Parse(_) | Error::Dataset(_) => SiamsaStatus::SiamsaParseError,
        Error::Invariant(_) => SiamsaStatus::SiamsaInternalError,
        _ => SiamsaStatus::SiamsaInvalidArgument,
    }
}

fn fail(err: &Error) -> SiamsaStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn guard(f: impl FnOnce() -> SiamsaStatus) -> SiamsaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            SiamsaStatus::SiamsaInternalError
        }
    }
}

fn frame_tensor(data: *const u8, width: u32, height: u32) -> Result<Tensor, SiamsaStatus> {
    if data.is_null() {
        set_error("frame pointer is null");
        return Err(SiamsaStatus::SiamsaNullArgument);
    }
    if width == 0 || height == 0 {
        set_error("frame dimensions must be positive");
        return Err(SiamsaStatus::SiamsaInvalidArgument);
    }
    let (w, h) = (width as usize, height as usize);
    let n = w * h * 3;
    // SAFETY: the caller guarantees `data` points to `width*height*3`
    // readable bytes for the duration of the call.
    let bytes = unsafe { std::slice::from_raw_parts(data, n) };
    let mut out = vec![0.0f64; n];
    for y in 0..h {
        for x in 0..w {
            let px = (y * w + x) * 3;
            for c in 0..3 {
                out[(c * h + y) * w + x] = bytes[px + c] as f64 / 255.0;
            }
        }
    }
    Tensor::new(&CHW, &[3, h, w], out).map_err(|e| fail(&e))
}

fn cstr_path<'a>(ptr: *const c_char) -> Result<Option<&'a Path>, SiamsaStatus> {
    if ptr.is_null() {
        return Ok(None);
    }
    // SAFETY: the caller guarantees `ptr` is a valid NUL-terminated string.
    let s = unsafe { CStr::from_ptr(ptr) };
    match s.to_str() {
        Ok(s) => Ok(Some(Path::new(s))),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(SiamsaStatus::SiamsaInvalidArgument)
        }
    }
}

fn make_tracker(cfg: TrackerConfig, weights: Option<&Path>) -> Result<Tracker, SiamsaStatus> {
    let model = match weights {
        Some(p) => ModelWeights::from_file(&cfg, p).map_err(|e| fail(&e))?,
        None => ModelWeights::from_seed(&cfg).map_err(|e| fail(&e))?,
    };
    Tracker::new(cfg, model).map_err(|e| fail(&e))
}

/// Creates a tracker with the default configuration and seeded weights.
/// Writes the handle to `out`; on failure `out` is left untouched.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn siamsa_tracker_new(
    seed: u64,
    enable_psan: bool,
    enable_sa_apn: bool,
    out: *mut *mut SiamsaTracker,
) -> SiamsaStatus {
    guard(|| {
        if out.is_null() {
            set_error("output handle pointer is null");
            return SiamsaStatus::SiamsaNullArgument;
        }
        let cfg = TrackerConfig {
            seed,
            enable_psan,
            enable_sa_apn,
            ..TrackerConfig::default()
        };
        match make_tracker(cfg, None) {
            Ok(t) => {
                unsafe { *out = Box::into_raw(Box::new(SiamsaTracker { inner: t })) };
                SiamsaStatus::SiamsaOk
            }
            Err(status) => status,
        }
    })
}

/// Creates a tracker from a configuration file and an optional weights file
/// (pass null for seeded weights).
///
/// # Safety
/// `config_path` must be a valid NUL-terminated path; `weights_path` must
/// be null or a valid NUL-terminated path; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn siamsa_tracker_new_from_files(
    config_path: *const c_char,
    weights_path: *const c_char,
    out: *mut *mut SiamsaTracker,
) -> SiamsaStatus {
    guard(|| {
        if out.is_null() {
            set_error("output handle pointer is null");
            return SiamsaStatus::SiamsaNullArgument;
        }
        let config = match cstr_path(config_path) {
            Ok(Some(p)) => p,
            Ok(None) => {
                set_error("config path is null");
                return SiamsaStatus::SiamsaNullArgument;
            }
            Err(s) => return s,
        };
        let weights = match cstr_path(weights_path) {
            Ok(w) => w,
            Err(s) => return s,
        };
        let cfg = match TrackerConfig::load(config) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        };
        match make_tracker(cfg, weights) {
            Ok(t) => {
                unsafe { *out = Box::into_raw(Box::new(SiamsaTracker { inner: t })) };
                SiamsaStatus::SiamsaOk
            }
            Err(status) => status,
        }
    })
}

/// Initializes the tracker on a frame and the object's box.
///
/// # Safety
/// `handle` must come from a constructor and not be freed; `frame_rgb8`
/// must point to `width * height * 3` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn siamsa_tracker_init(
    handle: *mut SiamsaTracker,
    frame_rgb8: *const u8,
    width: u32,
    height: u32,
    init_box: SiamsaBox,
) -> SiamsaStatus {
    guard(|| {
        let tracker = match unsafe { handle.as_mut() } {
            Some(t) => t,
            None => {
                set_error("tracker handle is null");
                return SiamsaStatus::SiamsaNullArgument;
            }
        };
        let frame = match frame_tensor(frame_rgb8, width, height) {
            Ok(f) => f,
            Err(s) => return s,
        };
        let b = BBox::new(init_box.x, init_box.y, init_box.w, init_box.h);
        match tracker.inner.init(&frame, &b) {
            Ok(()) => SiamsaStatus::SiamsaOk,
            Err(e) => fail(&e),
        }
    })
}

/// Tracks one frame; writes the estimated box and its score in `[0, 1]`.
/// Fails with `SiamsaInvalidState` before `siamsa_tracker_init`.
///
/// # Safety
/// Same pointer contracts as `siamsa_tracker_init`; `out_box` and
/// `out_score` must each be valid or null (null means "don't care").
#[no_mangle]
pub unsafe extern "C" fn siamsa_tracker_track(
    handle: *mut SiamsaTracker,
    frame_rgb8: *const u8,
    width: u32,
    height: u32,
    out_box: *mut SiamsaBox,
    out_score: *mut f64,
) -> SiamsaStatus {
    guard(|| {
        let tracker = match unsafe { handle.as_mut() } {
            Some(t) => t,
            None => {
                set_error("tracker handle is null");
                return SiamsaStatus::SiamsaNullArgument;
            }
        };
        if tracker.inner.state().is_none() {
            set_error("siamsa_tracker_track called before siamsa_tracker_init");
            return SiamsaStatus::SiamsaInvalidState;
        }
        let frame = match frame_tensor(frame_rgb8, width, height) {
            Ok(f) => f,
            Err(s) => return s,
        };
        match tracker.inner.track_frame(&frame) {
            Ok((b, score)) => {
                if let Some(slot) = unsafe { out_box.as_mut() } {
                    *slot = SiamsaBox {
                        x: b.x,
                        y: b.y,
                        w: b.w,
                        h: b.h,
                    };
                }
                if let Some(slot) = unsafe { out_score.as_mut() } {
                    *slot = score;
                }
                SiamsaStatus::SiamsaOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Current box estimate without advancing a frame; fails before init.
///
/// # Safety
/// `handle` must be valid; `out_box` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn siamsa_tracker_current_box(
    handle: *const SiamsaTracker,
    out_box: *mut SiamsaBox,
) -> SiamsaStatus {
    guard(|| {
        let tracker = match unsafe { handle.as_ref() } {
            Some(t) => t,
            None => {
                set_error("tracker handle is null");
                return SiamsaStatus::SiamsaNullArgument;
            }
        };
        if out_box.is_null() {
            set_error("output box pointer is null");
            return SiamsaStatus::SiamsaNullArgument;
        }
        match tracker.inner.state() {
            Some(state) => {
                let b = state.current;
                unsafe {
                    *out_box = SiamsaBox {
                        x: b.x,
                        y: b.y,
                        w: b.w,
                        h: b.h,
                    };
                }
                SiamsaStatus::SiamsaOk
            }
            None => {
                set_error("tracker is not initialized");
                SiamsaStatus::SiamsaInvalidState
            }
        }
    })
}

/// Releases a tracker handle. Passing null is a no-op.
///
/// # Safety
/// `handle` must come from a constructor and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn siamsa_tracker_free(handle: *mut SiamsaTracker) {
    if !handle.is_null() {
        // SAFETY: the caller guarantees the handle came from Box::into_raw
        // in one of the constructors and is not used again.
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn siamsa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn siamsa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
