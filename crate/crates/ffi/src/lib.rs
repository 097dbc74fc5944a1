//! C interface to cochlea-core. Objects are opaque handles released with the
//! matching `*_free` function. Every fallible call returns a [`CochleaStatus`];
//! on failure [`cochlea_last_error`] describes the problem.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use cochlea_core::array::{ArrayModel, Family};
use cochlea_core::cochlea::{CochleaModel, CochleaParams};
use cochlea_core::config::{config_distance, select_configuration, Configuration, WeightSet};
use cochlea_core::dvf::{build_dvf, DvfSet};
use cochlea_core::params::{ClParams, GpParams, SnakeParams};
use cochlea_core::phantom::{synth_case, PhantomSpec};
use cochlea_core::result::LocalizationResult;
use cochlea_core::{vec3, BoundingBox, Error, Volume3};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CochleaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    /// The algorithm ran but found no answer.
    Algorithm = 5,
    /// The output buffer is too small.
    BufferTooSmall = 6,
    Panic = 7,
}

/// A 3-D image.
pub struct CochleaVolume(Volume3);
/// A spiral cochlea model.
pub struct CochleaSpiral(CochleaModel);
/// Ordered contact positions, most apical first.
pub struct CochleaResult(LocalizationResult);
/// Distance-vs-frequency curves.
pub struct CochleaDvf(DvfSet);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CochleaStatus {
    match e.root() {
        Error::Io(_) => CochleaStatus::Io,
        Error::Parse(_) | Error::Format(_) => CochleaStatus::Parse,
        Error::InvalidArgument(_) | Error::SizeMismatch { .. } | Error::OutsideModel(_) | Error::Empty(_) => {
            CochleaStatus::InvalidArgument
        }
        _ => CochleaStatus::Algorithm,
    }
}

/// Runs `f`, recording errors and panics.
fn guard(f: impl FnOnce() -> Result<(), (CochleaStatus, String)>) -> CochleaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CochleaStatus::Ok
        }
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            CochleaStatus::Panic
        }
    }
}

type Fallible<T> = Result<T, (CochleaStatus, String)>;

fn core<T>(r: cochlea_core::Result<T>) -> Fallible<T> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (CochleaStatus, String) {
    (CochleaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Fallible<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn string(p: *const c_char, what: &str) -> Fallible<String> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| (CochleaStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Fallible<()> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

unsafe fn bbox(p: *const f64) -> Fallible<BoundingBox> {
    if p.is_null() {
        return Err(null("bounding box"));
    }
    let b = std::slice::from_raw_parts(p, 6);
    core(BoundingBox::new(vec3(b[0], b[1], b[2]), vec3(b[3], b[4], b[5])))
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cochlea_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn cochlea_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Volume from `dims[0] * dims[1] * dims[2]` samples, x fastest.
///
/// # Safety
/// `dims`, `spacing` and `origin` point to 3 values; `data` to `len` values.
#[no_mangle]
pub unsafe extern "C" fn cochlea_volume_new(
    dims: *const usize,
    spacing: *const f64,
    origin: *const f64,
    data: *const f32,
    len: usize,
    out: *mut *mut CochleaVolume,
) -> CochleaStatus {
    guard(|| {
        if dims.is_null() || spacing.is_null() || origin.is_null() || data.is_null() {
            return Err(null("volume argument"));
        }
        let d = std::slice::from_raw_parts(dims, 3);
        let s = std::slice::from_raw_parts(spacing, 3);
        let o = std::slice::from_raw_parts(origin, 3);
        let v = core(Volume3::new(
            [d[0], d[1], d[2]],
            [s[0], s[1], s[2]],
            [o[0], o[1], o[2]],
            std::slice::from_raw_parts(data, len).to_vec(),
        ))?;
        put(out, CochleaVolume(v))
    })
}

/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cochlea_volume_load(path: *const c_char, out: *mut *mut CochleaVolume) -> CochleaStatus {
    guard(|| {
        let p = PathBuf::from(string(path, "path")?);
        put(out, CochleaVolume(core(Volume3::load(p))?))
    })
}

/// # Safety
/// `v` is a live volume handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cochlea_volume_save(v: *const CochleaVolume, path: *const c_char) -> CochleaStatus {
    guard(|| core(deref(v, "volume")?.0.save(string(path, "path")?)))
}

/// # Safety
/// `v` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cochlea_volume_free(v: *mut CochleaVolume) {
    free(v)
}

/// Model with the built-in spiral parameters.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cochlea_model_default(out: *mut *mut CochleaSpiral) -> CochleaStatus {
    guard(|| put(out, CochleaSpiral(core(CochleaModel::new(CochleaParams::default()))?)))
}

/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cochlea_model_load(path: *const c_char, out: *mut *mut CochleaSpiral) -> CochleaStatus {
    guard(|| put(out, CochleaSpiral(core(CochleaModel::load(string(path, "path")?))?)))
}

/// # Safety
/// `m` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cochlea_model_free(m: *mut CochleaSpiral) {
    free(m)
}

/// Renders one phantom case for the named array preset. `bbox_out` receives
/// `min x, y, z, max x, y, z` of the region to search.
///
/// # Safety
/// `array` is a NUL-terminated string; `bbox_out` has room for 6 values;
/// the output handles are writable.
#[no_mangle]
pub unsafe extern "C" fn cochlea_phantom_case(
    array: *const c_char,
    seed: u64,
    clean: bool,
    volume_out: *mut *mut CochleaVolume,
    model_out: *mut *mut CochleaSpiral,
    truth_out: *mut *mut CochleaResult,
    bbox_out: *mut f64,
) -> CochleaStatus {
    guard(|| {
        if volume_out.is_null() || model_out.is_null() || truth_out.is_null() || bbox_out.is_null() {
            return Err(null("output"));
        }
        let a = core(ArrayModel::preset(&string(array, "array")?))?;
        let mut spec = if clean { PhantomSpec::clean(a) } else { PhantomSpec::new(a) };
        spec.seed = seed;
        let c = core(synth_case(&spec))?;
        let b = std::slice::from_raw_parts_mut(bbox_out, 6);
        b.copy_from_slice(&[c.bbox.min.x, c.bbox.min.y, c.bbox.min.z, c.bbox.max.x, c.bbox.max.y, c.bbox.max.z]);
        put(volume_out, CochleaVolume(c.volume))?;
        put(model_out, CochleaSpiral(c.model))?;
        put(truth_out, CochleaResult(c.truth))
    })
}

/// Graph path-finding localizer with default parameters.
///
/// # Safety
/// Handles are live; `bbox` has 6 values; `array` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cochlea_localize_gp(
    volume: *const CochleaVolume,
    bbox: *const f64,
    array: *const c_char,
    model: *const CochleaSpiral,
    out: *mut *mut CochleaResult,
) -> CochleaStatus {
    guard(|| {
        let a = core(ArrayModel::preset(&string(array, "array")?))?;
        let (v, m, b) = (deref(volume, "volume")?, deref(model, "model")?, self::bbox(bbox)?);
        let o = core(cochlea_core::graph::localize_gp(&v.0, &b, &a, &m.0, &GpParams::default()))?;
        put(out, CochleaResult(o.result))
    })
}

/// Centerline localizer with default parameters.
///
/// # Safety
/// As for [`cochlea_localize_gp`].
#[no_mangle]
pub unsafe extern "C" fn cochlea_localize_cl(
    volume: *const CochleaVolume,
    bbox: *const f64,
    array: *const c_char,
    model: *const CochleaSpiral,
    out: *mut *mut CochleaResult,
) -> CochleaStatus {
    guard(|| {
        let a = core(ArrayModel::preset(&string(array, "array")?))?;
        let (v, m, b) = (deref(volume, "volume")?, deref(model, "model")?, self::bbox(bbox)?);
        let o = core(cochlea_core::centerline::localize_cl(&v.0, &b, &a, &m.0, &ClParams::default()))?;
        put(out, CochleaResult(o.result))
    })
}

/// Active-contour localizer with default parameters.
///
/// # Safety
/// Handles are live; `bbox` has 6 values; `array` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cochlea_localize_snake(
    volume: *const CochleaVolume,
    bbox: *const f64,
    array: *const c_char,
    out: *mut *mut CochleaResult,
) -> CochleaStatus {
    guard(|| {
        let a = core(ArrayModel::preset(&string(array, "array")?))?;
        let (v, b) = (deref(volume, "volume")?, self::bbox(bbox)?);
        let o = core(cochlea_core::snake::localize_snake(&v.0, &b, &a, &SnakeParams::default()))?;
        put(out, CochleaResult(o.result))
    })
}

/// Result from `n` contact positions given as `x, y, z` triples.
///
/// # Safety
/// `xyz` has `3 * n` values; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cochlea_result_new(xyz: *const f64, n: usize, out: *mut *mut CochleaResult) -> CochleaStatus {
    guard(|| {
        if xyz.is_null() {
            return Err(null("coordinates"));
        }
        let v = std::slice::from_raw_parts(xyz, 3 * n);
        let pts = v.chunks(3).map(|c| vec3(c[0], c[1], c[2])).collect();
        put(out, CochleaResult(LocalizationResult::new("array", pts, None)))
    })
}

/// Number of contacts; 0 for a null handle.
///
/// # Safety
/// `r` is null or live.
#[no_mangle]
pub unsafe extern "C" fn cochlea_result_len(r: *const CochleaResult) -> usize {
    r.as_ref().map_or(0, |r| r.0.len())
}

/// Copies contact positions as `x, y, z` triples into `xyz` (room for `cap` values).
///
/// # Safety
/// `r` is live; `xyz` has room for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn cochlea_result_contacts(r: *const CochleaResult, xyz: *mut f64, cap: usize) -> CochleaStatus {
    guard(|| {
        let r = deref(r, "result")?;
        if xyz.is_null() {
            return Err(null("buffer"));
        }
        let need = 3 * r.0.len();
        if cap < need {
            return Err((CochleaStatus::BufferTooSmall, format!("need {need} values, have {cap}")));
        }
        let out = std::slice::from_raw_parts_mut(xyz, need);
        for (c, p) in out.chunks_mut(3).zip(&r.0.contacts) {
            c.copy_from_slice(&[p.x, p.y, p.z]);
        }
        Ok(())
    })
}

/// # Safety
/// `r` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cochlea_result_free(r: *mut CochleaResult) {
    free(r)
}

/// Curves of the contacts in `r` against `model` on a grid of `grid` frequencies.
///
/// # Safety
/// Handles are live; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cochlea_dvf_build(
    r: *const CochleaResult,
    model: *const CochleaSpiral,
    grid: usize,
    out: *mut *mut CochleaDvf,
) -> CochleaStatus {
    guard(|| {
        let set = core(build_dvf(&deref(r, "result")?.0, &deref(model, "model")?.0, grid))?;
        put(out, CochleaDvf(set))
    })
}

/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cochlea_dvf_load(path: *const c_char, out: *mut *mut CochleaDvf) -> CochleaStatus {
    guard(|| put(out, CochleaDvf(core(DvfSet::load(string(path, "path")?))?)))
}

/// # Safety
/// `d` is live; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cochlea_dvf_save(d: *const CochleaDvf, path: *const c_char) -> CochleaStatus {
    guard(|| core(deref(d, "dvf")?.0.save(string(path, "path")?)))
}

/// Number of curves; 0 for a null handle.
///
/// # Safety
/// `d` is null or live.
#[no_mangle]
pub unsafe extern "C" fn cochlea_dvf_len(d: *const CochleaDvf) -> usize {
    d.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `d` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cochlea_dvf_free(d: *mut CochleaDvf) {
    free(d)
}

/// Lowest-cost configuration under the published weights of `family`
/// (`MD`, `AB` or `CO`). Writes the `+`/`-` mask, NUL-terminated, into
/// `mask` (room for `cap` bytes) and the cost into `cost`.
///
/// # Safety
/// `d` is live; `family` is NUL-terminated; `mask` has `cap` bytes; `cost` is writable.
#[no_mangle]
pub unsafe extern "C" fn cochlea_config_select(
    d: *const CochleaDvf,
    family: *const c_char,
    mask: *mut c_char,
    cap: usize,
    cost: *mut f64,
) -> CochleaStatus {
    guard(|| {
        let set = deref(d, "dvf")?;
        let fam: Family = core(string(family, "family")?.parse())?;
        if mask.is_null() || cost.is_null() {
            return Err(null("output"));
        }
        let sel = core(select_configuration(&set.0, &WeightSet::preset(fam)))?;
        let s = sel.config.to_mask_string();
        if cap < s.len() + 1 {
            return Err((CochleaStatus::BufferTooSmall, format!("mask needs {} bytes", s.len() + 1)));
        }
        ptr::copy_nonoverlapping(s.as_ptr() as *const c_char, mask, s.len());
        *mask.add(s.len()) = 0;
        *cost = sel.cost;
        Ok(())
    })
}

/// Distance of `mask` from `reference`, both `+`/`-` strings.
///
/// # Safety
/// Both strings are NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn cochlea_config_distance(mask: *const c_char, reference: *const c_char, out: *mut f64) -> CochleaStatus {
    guard(|| {
        let m = core(Configuration::parse_mask(&string(mask, "mask")?))?;
        let r = core(Configuration::parse_mask(&string(reference, "reference")?))?;
        if out.is_null() {
            return Err(null("output"));
        }
        *out = core(config_distance(&m, &r))?;
        Ok(())
    })
}
