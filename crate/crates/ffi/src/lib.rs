//! C ABI over `sat-core`.
//!
//! Every entry point returns a [`SatStatus`]; on failure the message is kept
//! per thread and readable through [`sat_last_error`]. Panics never cross the
//! boundary. Tracker handles are opaque and owned by the caller, who must
//! release them with [`sat_tracker_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use sat_core::eval::overlap;
use sat_core::imaging::{BoundingBox, Image};
use sat_core::tracker::{MonitorReport, Tracker, TrackerConfig};
use sat_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatStatus {
    Ok = 0,
    /// A required pointer was null.
    ErrNull = 1,
    ErrInvalidArgument = 2,
    /// File, image or configuration I/O failed.
    ErrIo = 3,
    ErrNumeric = 4,
    /// A Rust panic was caught; the handle involved should be freed.
    ErrPanic = 5,
}

/// Top-left corner and extent, 0-based pixel coordinates.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatReport {
    pub s_max: f64,
    pub bk: f64,
    pub updated: bool,
    pub informative: bool,
}

/// Borrowed 8-bit frame, interleaved channels (1 = gray, 3 = RGB).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SatImage {
    pub data: *const u8,
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    /// Bytes per row; 0 means tightly packed.
    pub stride: usize,
}

/// Opaque tracker handle.
pub struct SatTracker {
    inner: Tracker,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> SatStatus {
    match err {
        Error::Io { .. } | Error::Image { .. } | Error::ColorTableUnavailable(_) | Error::Json(_) => {
            SatStatus::ErrIo
        }
        Error::Diverged(_) | Error::DegenerateResponse => SatStatus::ErrNumeric,
        _ => SatStatus::ErrInvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guarded(f: impl FnOnce() -> Result<(), (SatStatus, String)>) -> SatStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SatStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SatStatus::ErrPanic
        }
    }
}

fn core<T>(r: sat_core::Result<T>) -> Result<T, (SatStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (SatStatus, String) {
    (SatStatus::ErrNull, format!("{what} is null"))
}

/// # Safety
/// `img.data` must point to at least `stride * height` readable bytes.
unsafe fn read_image(img: &SatImage) -> Result<Image, (SatStatus, String)> {
    if img.data.is_null() {
        return Err(null("image data"));
    }
    let (w, h, ch) = (img.width as usize, img.height as usize, img.channels as usize);
    if w == 0 || h == 0 || !(ch == 1 || ch == 3) {
        return Err((
            SatStatus::ErrInvalidArgument,
            format!("bad image geometry {w}x{h}x{ch}"),
        ));
    }
    let row = w * ch;
    let stride = if img.stride == 0 { row } else { img.stride };
    if stride < row {
        return Err((SatStatus::ErrInvalidArgument, format!("stride {stride} below row size {row}")));
    }
    let bytes = std::slice::from_raw_parts(img.data, stride * (h - 1) + row);
    let mut packed = Vec::with_capacity(row * h);
    for y in 0..h {
        packed.extend_from_slice(&bytes[y * stride..y * stride + row]);
    }
    core(Image::from_u8(w, h, ch, &packed))
}

fn to_box(b: SatBox) -> BoundingBox {
    BoundingBox::new(b.x, b.y, b.w, b.h)
}

fn from_box(b: BoundingBox) -> SatBox {
    SatBox {
        x: b.x,
        y: b.y,
        w: b.w,
        h: b.h,
    }
}

fn from_report(r: MonitorReport) -> SatReport {
    SatReport {
        s_max: r.s_max,
        bk: r.bk,
        updated: r.updated,
        informative: r.informative,
    }
}

/// Creates a tracker on the first frame.
///
/// `config_path` may be null for defaults; `out_report` may be null.
///
/// # Safety
/// Pointers must be null or valid for the documented access.
#[no_mangle]
pub unsafe extern "C" fn sat_tracker_new(
    frame: *const SatImage,
    bbox: SatBox,
    config_path: *const c_char,
    out_tracker: *mut *mut SatTracker,
    out_report: *mut SatReport,
) -> SatStatus {
    guarded(|| {
        let out_tracker = out_tracker.as_mut().ok_or_else(|| null("out_tracker"))?;
        *out_tracker = std::ptr::null_mut();
        let frame = read_image(frame.as_ref().ok_or_else(|| null("frame"))?)?;
        let cfg = if config_path.is_null() {
            TrackerConfig::default()
        } else {
            let path = CStr::from_ptr(config_path)
                .to_str()
                .map_err(|_| (SatStatus::ErrInvalidArgument, "config path is not UTF-8".to_string()))?;
            core(TrackerConfig::load(PathBuf::from(path)))?
        };
        let (inner, report) = core(Tracker::init(&frame, to_box(bbox), cfg))?;
        if let Some(r) = out_report.as_mut() {
            *r = from_report(report);
        }
        *out_tracker = Box::into_raw(Box::new(SatTracker { inner }));
        Ok(())
    })
}

/// Processes the next frame. `out_report` may be null.
///
/// # Safety
/// `tracker` must come from [`sat_tracker_new`] and not be freed.
#[no_mangle]
pub unsafe extern "C" fn sat_tracker_step(
    tracker: *mut SatTracker,
    frame: *const SatImage,
    out_box: *mut SatBox,
    out_report: *mut SatReport,
) -> SatStatus {
    guarded(|| {
        let tracker = tracker.as_mut().ok_or_else(|| null("tracker"))?;
        let out_box = out_box.as_mut().ok_or_else(|| null("out_box"))?;
        let frame = read_image(frame.as_ref().ok_or_else(|| null("frame"))?)?;
        let (b, report) = core(tracker.inner.step(&frame))?;
        *out_box = from_box(b);
        if let Some(r) = out_report.as_mut() {
            *r = from_report(report);
        }
        Ok(())
    })
}

/// Current box without processing a frame.
///
/// # Safety
/// `tracker` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sat_tracker_box(tracker: *const SatTracker, out_box: *mut SatBox) -> SatStatus {
    guarded(|| {
        let tracker = tracker.as_ref().ok_or_else(|| null("tracker"))?;
        let out_box = out_box.as_mut().ok_or_else(|| null("out_box"))?;
        *out_box = from_box(tracker.inner.bbox());
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `tracker` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn sat_tracker_free(tracker: *mut SatTracker) {
    if !tracker.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(tracker))));
    }
}

/// Intersection over union of two boxes.
#[no_mangle]
pub extern "C" fn sat_overlap(a: SatBox, b: SatBox) -> f64 {
    overlap(&to_box(a), &to_box(b))
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn sat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn sat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
