//! C ABI over `billiard_counting`.
//!
//! Objects are opaque handles released with the matching `*_free` function. Every fallible call
//! returns a [`BcStatus`]; on failure the message is available from [`bc_last_error_message`] on
//! the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use billiard_counting::complexity::{position_complexity_flow, ComplexitySeries};
use billiard_counting::counting::{direction_counting_map, position_counting_flow, CountingSeries};
use billiard_counting::error::Error;
use billiard_counting::geom::Point;
use billiard_counting::polygon::{validate_polygon, Polygon, PolygonSpec};
use billiard_counting::stats::{closed_form_average, AverageKind};
use billiard_counting::unfold::{SplitOptions, DEFAULT_MAX_TILES};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed text or JSON.
    Schema = 2,
    /// Invalid polygon, point or parameter.
    Validation = 3,
    /// The beam cap was reached before the computation finished.
    BudgetExceeded = 4,
    /// Exceptional base point or direction.
    Exceptional = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcAverageKind {
    /// Integral of `gd_θ(n)` over directions, divided by `2π`.
    DirectionMap = 0,
    /// Integral of `gc_z(l)` over the table, divided by the area.
    PositionFlow = 1,
}

/// A validated billiard table.
pub struct BcPolygon(Polygon);

/// A counting function: singular orbits sorted by abscissa.
pub struct BcSeries(CountingSeries);

/// A complexity function.
pub struct BcComplexity(ComplexitySeries);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> BcStatus {
    match e {
        Error::Json(_) | Error::Schema(_) | Error::Io(_) => BcStatus::Schema,
        Error::BudgetExceeded { .. } => BcStatus::BudgetExceeded,
        Error::ExceptionalBasepoint { .. } | Error::ExceptionalDirection { .. } => BcStatus::Exceptional,
        Error::Integrity(_) | Error::UnfoldingIntegrity { .. } => BcStatus::Internal,
        _ => BcStatus::Validation,
    }
}

/// Runs `f`, recording its error and catching panics.
fn guard(f: impl FnOnce() -> Result<(), (BcStatus, String)>) -> BcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            BcStatus::Internal
        }
    }
}

fn lib<T>(r: Result<T, Error>) -> Result<T, (BcStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null() -> (BcStatus, String) {
    (BcStatus::NullPointer, "null pointer argument".into())
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, (BcStatus, String)> {
    p.as_ref().ok_or_else(null)
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), (BcStatus, String)> {
    if out.is_null() {
        return Err(null());
    }
    out.write(value);
    Ok(())
}

fn options(max_tiles: usize) -> SplitOptions {
    SplitOptions { max_tiles: if max_tiles == 0 { DEFAULT_MAX_TILES } else { max_tiles }, keep_history: false }
}

unsafe fn point(p: &Polygon, coords: *const f64, len: usize) -> Result<Point, (BcStatus, String)> {
    if coords.is_null() {
        return Err(null());
    }
    let z = lib(Point::new(p.model(), std::slice::from_raw_parts(coords, len)))?;
    if !p.contains(&z) {
        return Err((BcStatus::Validation, "base point is not in the interior of the table".into()));
    }
    Ok(z)
}

/// Message of the last failing call on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn bc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn bc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates a polygon file body.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bc_polygon_from_json(json: *const c_char, out: *mut *mut BcPolygon) -> BcStatus {
    guard(|| {
        if json.is_null() {
            return Err(null());
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| (BcStatus::Schema, e.to_string()))?;
        let spec: PolygonSpec = lib(serde_json::from_str(text).map_err(Error::from))?;
        let p = lib(validate_polygon(&spec))?;
        write(out, Box::into_raw(Box::new(BcPolygon(p))))
    })
}

/// # Safety
/// `p` must be null or a handle from [`bc_polygon_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bc_polygon_free(p: *mut BcPolygon) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of corners, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live polygon handle.
#[no_mangle]
pub unsafe extern "C" fn bc_polygon_corner_count(p: *const BcPolygon) -> usize {
    p.as_ref().map_or(0, |p| p.0.corner_count())
}

/// # Safety
/// `p` must be a live polygon handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bc_polygon_area(p: *const BcPolygon, out: *mut f64) -> BcStatus {
    guard(|| write(out, deref(p)?.0.area()))
}

/// Flow counting function `gc_z(l)`; `max_tiles = 0` selects the default cap. A series that hit the
/// cap is still returned, with [`bc_series_is_complete`] false.
///
/// # Safety
/// `p` must be a live polygon handle, `z` must point to `z_len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bc_count_position(
    p: *const BcPolygon,
    z: *const f64,
    z_len: usize,
    max_length: f64,
    max_tiles: usize,
    out: *mut *mut BcSeries,
) -> BcStatus {
    guard(|| {
        let p = &deref(p)?.0;
        let z = point(p, z, z_len)?;
        let g = lib(position_counting_flow(p, &z, max_length, options(max_tiles)))?;
        write(out, Box::into_raw(Box::new(BcSeries(g))))
    })
}

/// Map counting function `gd_θ(n)` on a planar polygon.
///
/// # Safety
/// `p` must be a live polygon handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bc_count_direction(
    p: *const BcPolygon,
    theta: f64,
    max_steps: usize,
    max_tiles: usize,
    out: *mut *mut BcSeries,
) -> BcStatus {
    guard(|| {
        let g = lib(direction_counting_map(&deref(p)?.0, theta, max_steps, options(max_tiles)))?;
        write(out, Box::into_raw(Box::new(BcSeries(g))))
    })
}

/// # Safety
/// `s` must be null or a series handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bc_series_free(s: *mut BcSeries) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of records, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live series handle.
#[no_mangle]
pub unsafe extern "C" fn bc_series_len(s: *const BcSeries) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `s` must be null or a live series handle.
#[no_mangle]
pub unsafe extern "C" fn bc_series_is_complete(s: *const BcSeries) -> bool {
    s.as_ref().is_some_and(|s| s.0.complete)
}

/// Value of the counting function at `x`, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live series handle.
#[no_mangle]
pub unsafe extern "C" fn bc_series_count(s: *const BcSeries, x: f64) -> usize {
    s.as_ref().map_or(0, |s| s.0.count(x))
}

/// Corner, length and step count of record `index`.
///
/// # Safety
/// `s` must be a live series handle; the output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bc_series_record(
    s: *const BcSeries,
    index: usize,
    corner: *mut usize,
    length: *mut f64,
    steps: *mut usize,
) -> BcStatus {
    guard(|| {
        let s = &deref(s)?.0;
        let r = s
            .records
            .get(index)
            .ok_or_else(|| (BcStatus::Validation, format!("record {index} of {}", s.len())))?;
        write(corner, r.corner)?;
        write(length, r.length)?;
        write(steps, r.steps)
    })
}

/// Serializes the series as JSON; release the string with [`bc_string_free`].
///
/// # Safety
/// `s` must be a live series handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bc_series_to_json(s: *const BcSeries, out: *mut *mut c_char) -> BcStatus {
    guard(|| {
        let text = lib(serde_json::to_string(&deref(s)?.0).map_err(Error::from))?;
        let c = CString::new(text).map_err(|e| (BcStatus::Internal, e.to_string()))?;
        write(out, c.into_raw())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Position complexity `h_z(l)`.
///
/// # Safety
/// `p` must be a live polygon handle, `z` must point to `z_len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bc_complexity_position(
    p: *const BcPolygon,
    z: *const f64,
    z_len: usize,
    max_length: f64,
    max_tiles: usize,
    out: *mut *mut BcComplexity,
) -> BcStatus {
    guard(|| {
        let p = &deref(p)?.0;
        let z = point(p, z, z_len)?;
        let h = lib(position_complexity_flow(p, &z, max_length, options(max_tiles)))?;
        write(out, Box::into_raw(Box::new(BcComplexity(h))))
    })
}

/// Value of the complexity function at `x`, or 0 for a null handle.
///
/// # Safety
/// `c` must be null or a live complexity handle.
#[no_mangle]
pub unsafe extern "C" fn bc_complexity_value(c: *const BcComplexity, x: f64) -> usize {
    c.as_ref().map_or(0, |c| c.0.value(x))
}

/// # Safety
/// `c` must be null or a complexity handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bc_complexity_free(c: *mut BcComplexity) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Closed-form normalized average, comparable with a sample mean; `kind` is a [`BcAverageKind`].
///
/// # Safety
/// `p` must be a live polygon handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bc_closed_form_average(
    p: *const BcPolygon,
    kind: u32,
    arg: f64,
    out: *mut f64,
) -> BcStatus {
    guard(|| {
        let kind = match kind {
            k if k == BcAverageKind::DirectionMap as u32 => AverageKind::DirectionMap,
            k if k == BcAverageKind::PositionFlow as u32 => AverageKind::PositionFlow,
            k => return Err((BcStatus::Validation, format!("unknown average kind {k}"))),
        };
        write(out, lib(closed_form_average(&deref(p)?.0, kind, arg))?.normalized)
    })
}
