//! C ABI for sliprelax.
//!
//! Every function returns an [`SrStatus`]; on failure the message is
//! available from [`sr_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function. Strings returned
//! through out-parameters are owned by the caller and released with
//! [`sr_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use sliprelax::cli::{exit_code_for, run_command, Command, RunOptions, Scenario};
use sliprelax::fields::{curl_norm, planar_tv, Boundary, CurlMode, Grid3, PatchFrame, ScalarField3, Slice2, TvMode};
use sliprelax::slipsys::SlipSystem;
use sliprelax::smoothing::{mollify, truncate, Extension, KernelProfile, MollifierKernel};
use sliprelax::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A numerical guard tripped or a smoothing budget was exceeded.
    Guard = 3,
    Config = 4,
    Io = 5,
    /// A Rust panic was caught at the boundary.
    Internal = 6,
}

/// Scalar field on a cell-centred grid, stored x-fastest.
pub struct SrScalarField(ScalarField3);

/// Slip-plane normal with two Burgers directions.
pub struct SrSlipSystem(SlipSystem);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_for(e: &Error) -> SrStatus {
    match e {
        Error::Guard { .. } | Error::Budget { .. } => SrStatus::Guard,
        Error::Config { .. } => SrStatus::Config,
        Error::Io { .. } => SrStatus::Io,
        _ => SrStatus::InvalidArgument,
    }
}

struct Fail(SrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_for(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SrStatus::NullPointer, format!("`{what}` is null"))
}

fn guarded(f: impl FnOnce() -> Result<(), Fail>) -> SrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SrStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside sliprelax".into());
            SrStatus::Internal
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn as_field<'a>(h: *const SrScalarField) -> Result<&'a ScalarField3, Fail> {
    h.as_ref().map(|f| &f.0).ok_or_else(|| null("field"))
}

unsafe fn vec3(p: *const f64, what: &str) -> Result<[f64; 3], Fail> {
    let s = slice(p, 3, what)?;
    Ok([s[0], s[1], s[2]])
}

unsafe fn put_field(out: *mut *mut SrScalarField, f: ScalarField3) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(SrScalarField(f)));
    Ok(())
}

unsafe fn string_arg(p: *const c_char, what: &str) -> Result<String, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail(SrStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn sr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a field on the box `[0, extents]` with `resolution` cells per
/// axis; `values` holds `nx·ny·nz` entries, x-fastest.
///
/// # Safety
/// `extents` and `resolution` point to 3 elements, `values` to `len`.
#[no_mangle]
pub unsafe extern "C" fn sr_scalar_field_new(
    extents: *const f64,
    resolution: *const usize,
    values: *const f64,
    len: usize,
    out: *mut *mut SrScalarField,
) -> SrStatus {
    guarded(|| {
        let ext = vec3(extents, "extents")?;
        let res = slice(resolution, 3, "resolution")?;
        let grid = Grid3::new(ext, [res[0], res[1], res[2]], [0.0; 3])?;
        let v = slice(values, len, "values")?.to_vec();
        put_field(out, ScalarField3::new(grid, PatchFrame::identity(), v)?)
    })
}

/// # Safety
/// `field` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sr_scalar_field_free(field: *mut SrScalarField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Number of cells in `field`, or 0 for null.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sr_scalar_field_len(field: *const SrScalarField) -> usize {
    field.as_ref().map_or(0, |f| f.0.values().len())
}

/// Copies the values of `field` into `out`, which holds `len` entries.
///
/// # Safety
/// `field` must be live; `out` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn sr_scalar_field_values(field: *const SrScalarField, out: *mut f64, len: usize) -> SrStatus {
    guarded(|| {
        let f = as_field(field)?;
        if len != f.values().len() {
            return Err(Fail(
                SrStatus::InvalidArgument,
                format!("buffer holds {len} values, field has {}", f.values().len()),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(f.values().as_ptr(), out, len);
        Ok(())
    })
}

/// Total variation of one `ny × nz` slice (y-fastest) with replicated
/// boundaries.
///
/// # Safety
/// `values` must hold `ny·nz` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_planar_tv(
    values: *const f64,
    ny: usize,
    nz: usize,
    hy: f64,
    hz: f64,
    out: *mut f64,
) -> SrStatus {
    guarded(|| {
        let v = slice(values, ny * nz, "values")?.to_vec();
        let s = Slice2::new(ny, nz, v)?;
        let tv = planar_tv(&[&s], (hy, hz), TvMode::Single, Boundary::Replicate)?;
        *out.as_mut().ok_or_else(|| null("out"))? = tv;
        Ok(())
    })
}

/// Slice-integrated total variation of `field` along x.
///
/// # Safety
/// `field` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_curl_norm(field: *const SrScalarField, out: *mut f64) -> SrStatus {
    guarded(|| {
        let f = as_field(field)?;
        let v = curl_norm(&[f], CurlMode::SingleSum, Boundary::Replicate)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Clamps `field` to `[-level, level]` into a new handle.
///
/// # Safety
/// `field` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_truncate(field: *const SrScalarField, level: f64, out: *mut *mut SrScalarField) -> SrStatus {
    guarded(|| put_field(out, truncate(as_field(field)?, level)?))
}

/// Convolves `field` with the default kernel of the given radius. With
/// `reflect` every face is an even mirror; otherwise values outside are
/// zero and the support must stay clear of the faces.
///
/// # Safety
/// `field` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_mollify(
    field: *const SrScalarField,
    radius: f64,
    reflect: bool,
    out: *mut *mut SrScalarField,
) -> SrStatus {
    guarded(|| {
        let f = as_field(field)?;
        let kernel = MollifierKernel::new(radius, f.grid(), KernelProfile::default())?;
        let ext = if reflect {
            Extension::Reflect([[true; 2]; 3])
        } else {
            Extension::Zero
        };
        put_field(out, mollify(f, &kernel, ext)?)
    })
}

/// # Safety
/// `m`, `b1` and `b2` point to 3 elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_slip_system_new(
    m: *const f64,
    b1: *const f64,
    b2: *const f64,
    out: *mut *mut SrSlipSystem,
) -> SrStatus {
    guarded(|| {
        let sys = SlipSystem::new(vec3(m, "m")?, vec3(b1, "b1")?, vec3(b2, "b2")?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(SrSlipSystem(sys)));
        Ok(())
    })
}

/// # Safety
/// `system` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sr_slip_system_free(system: *mut SrSlipSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Splits an in-plane slip vector `s` into `c1·b1 + c2·b2`.
///
/// # Safety
/// `system` must be live, `s` point to 3 elements, `c1`/`c2` be writable.
#[no_mangle]
pub unsafe extern "C" fn sr_decompose_slip(
    system: *const SrSlipSystem,
    s: *const f64,
    c1: *mut f64,
    c2: *mut f64,
) -> SrStatus {
    guarded(|| {
        let sys = &system.as_ref().ok_or_else(|| null("system"))?.0;
        let (a, b) = sys.decompose(vec3(s, "s")?);
        *c1.as_mut().ok_or_else(|| null("c1"))? = a;
        *c2.as_mut().ok_or_else(|| null("c2"))? = b;
        Ok(())
    })
}

/// Runs a command (`energy`, `laminate`, `smooth`, `verify`, `export`) on a
/// JSON scenario. Relative paths in the scenario resolve against
/// `base_dir` (null: current directory); files go to `out_dir` (null: no
/// files). `seed` may be null. On success `report` receives the JSON report
/// and `exit_code` the command-line exit status; on a command failure the
/// status is set and `exit_code` still receives the matching status.
///
/// # Safety
/// String arguments must be null or NUL-terminated; out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn sr_run_command(
    command: *const c_char,
    config_json: *const c_char,
    base_dir: *const c_char,
    out_dir: *const c_char,
    seed: *const u64,
    deterministic: bool,
    report: *mut *mut c_char,
    exit_code: *mut i32,
) -> SrStatus {
    guarded(|| {
        if report.is_null() {
            return Err(null("report"));
        }
        let code_out = exit_code.as_mut().ok_or_else(|| null("exit_code"))?;
        let name = string_arg(command, "command")?;
        let command = Command::parse_name(&name)
            .ok_or_else(|| Fail(SrStatus::InvalidArgument, format!("unknown command `{name}`")))?;
        let text = string_arg(config_json, "config_json")?;
        let base = if base_dir.is_null() {
            PathBuf::from(".")
        } else {
            PathBuf::from(string_arg(base_dir, "base_dir")?)
        };
        let opts = RunOptions {
            out: if out_dir.is_null() {
                None
            } else {
                Some(PathBuf::from(string_arg(out_dir, "out_dir")?))
            },
            seed: seed.as_ref().copied(),
            deterministic,
        };
        let outcome = Scenario::parse(&text, base)
            .and_then(|s| run_command(command, &s, &opts))
            .map_err(|e| {
                *code_out = exit_code_for(&e);
                Fail::from(e)
            })?;
        let json = serde_json::to_string(&outcome.report).map_err(|e| Fail(SrStatus::Internal, e.to_string()))?;
        *report = CString::new(json).map_err(|e| Fail(SrStatus::Internal, e.to_string()))?.into_raw();
        *code_out = outcome.exit_code;
        Ok(())
    })
}
