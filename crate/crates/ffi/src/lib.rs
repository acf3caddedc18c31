//! C interface to `ltp-ddpc`.
//!
//! Objects are opaque heap handles created by `ltpd_*_new`/`ltpd_*_from_json`
//! and released with the matching `ltpd_*_free`. Every fallible call returns an
//! [`LtpdStatus`]; on failure a description is available from
//! [`ltpd_last_error`] on the same thread until the next failing call.
//! Matrices cross the boundary as column-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ltp_ddpc::bench::{build_msd_plant, MsdParams};
use ltp_ddpc::control::{Controller, ControllerConfig};
use ltp_ddpc::datapipe::{build_data_matrices, collect_offline, DataMatrices};
use ltp_ddpc::plant::{InputLaw, Plant};
use ltp_ddpc::{Error, LtpSystem};
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LtpdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    InsufficientData = 4,
    Infeasible = 5,
    Solver = 6,
    Parse = 7,
    Io = 8,
    Panic = 9,
}

/// Periodic state-space model.
pub struct LtpdSystem(LtpSystem);
/// Offline data matrices, one set per index.
pub struct LtpdData(DataMatrices);
/// Configured predictive controller.
pub struct LtpdController(Controller);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LtpdStatus {
    match e {
        Error::Interval { .. } | Error::InvalidArgument(_) => LtpdStatus::InvalidArgument,
        Error::Dimension(_) => LtpdStatus::Dimension,
        Error::InsufficientData(_) => LtpdStatus::InsufficientData,
        Error::Infeasible => LtpdStatus::Infeasible,
        Error::Solver(_) => LtpdStatus::Solver,
        Error::Json(_) | Error::Csv(_) => LtpdStatus::Parse,
        Error::Io(_) => LtpdStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (LtpdStatus, String)>) -> LtpdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LtpdStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LtpdStatus::Panic
        }
    }
}

fn lib<T>(r: ltp_ddpc::Result<T>) -> Result<T, (LtpdStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (LtpdStatus, String) {
    (LtpdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, (LtpdStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (LtpdStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (LtpdStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(h: *const T, what: &str) -> Result<&'a T, (LtpdStatus, String)> {
    h.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out(dst: *mut f64, len: usize, src: &[f64], what: &str) -> Result<(), (LtpdStatus, String)> {
    if len != src.len() {
        return Err((LtpdStatus::Dimension, format!("{what} has room for {len} values, {} needed", src.len())));
    }
    if len > 0 {
        if dst.is_null() {
            return Err(null(what));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), dst, len);
    }
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), (LtpdStatus, String)> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. Owned by the library.
#[no_mangle]
pub extern "C" fn ltpd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ltpd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ltpd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a system from JSON (`{"T","n","m","p","A","B","C","D"}`).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ltpd_system_from_json(json: *const c_char, out: *mut *mut LtpdSystem) -> LtpdStatus {
    guard(|| {
        let s = str_arg(json, "json")?;
        put(out, LtpdSystem(lib(LtpSystem::from_json(s))?))
    })
}

/// The spring-damper benchmark plant discretized with step `dt` and period `period`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ltpd_system_msd(dt: f64, period: usize, out: *mut *mut LtpdSystem) -> LtpdStatus {
    guard(|| put(out, LtpdSystem(lib(build_msd_plant(&MsdParams::default(), dt, period))?)))
}

/// # Safety
/// `sys` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ltpd_system_free(sys: *mut LtpdSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Writes `(n, m, p, T)`.
///
/// # Safety
/// `sys` must be a live handle and `dims` must point to four writable values.
#[no_mangle]
pub unsafe extern "C" fn ltpd_system_dims(sys: *const LtpdSystem, dims: *mut usize) -> LtpdStatus {
    guard(|| {
        let s = &handle(sys, "system")?.0;
        if dims.is_null() {
            return Err(null("dims"));
        }
        let v = [s.n(), s.m(), s.p(), s.period()];
        ptr::copy_nonoverlapping(v.as_ptr(), dims, 4);
        Ok(())
    })
}

/// Serializes the system; release the result with [`ltpd_string_free`].
///
/// # Safety
/// `sys` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ltpd_system_to_json(sys: *const LtpdSystem, out: *mut *mut c_char) -> LtpdStatus {
    guard(|| {
        let s = lib(handle(sys, "system")?.0.to_json())?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = CString::new(s).map_err(|e| (LtpdStatus::Parse, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Simulates `steps` steps from `x0` at time `t1`. `u` is `m x steps` and
/// `y_out` receives `p x steps`, both column-major.
///
/// # Safety
/// Pointers must reference arrays of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ltpd_system_simulate(
    sys: *const LtpdSystem,
    t1: i64,
    x0: *const f64,
    x0_len: usize,
    u: *const f64,
    steps: usize,
    y_out: *mut f64,
    y_len: usize,
) -> LtpdStatus {
    guard(|| {
        let s = &handle(sys, "system")?.0;
        let x = DVector::from_column_slice(slice_arg(x0, x0_len, "x0")?);
        let u = DMatrix::from_column_slice(s.m(), steps, slice_arg(u, s.m() * steps, "u")?);
        let sim = lib(s.simulate(t1, &x, &u))?;
        write_out(y_out, y_len, sim.traj.y_matrix().as_slice(), "y_out")
    })
}

/// Drives `sys` from rest at time `t_d1` with `length` unit-variance Gaussian
/// inputs (stream `seed`) and builds the data matrices for horizons `l`, `n`.
///
/// # Safety
/// `sys` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ltpd_data_collect(
    sys: *const LtpdSystem,
    t_d1: i64,
    length: usize,
    l: usize,
    n: usize,
    seed: u64,
    out: *mut *mut LtpdData,
) -> LtpdStatus {
    guard(|| {
        let s = &handle(sys, "system")?.0;
        let mut plant = lib(Plant::new(s.clone(), t_d1, DVector::zeros(s.n())))?;
        let w = lib(collect_offline(&mut plant, t_d1, length, InputLaw::Gaussian { variance: 1.0 }, seed))?;
        put(out, LtpdData(lib(build_data_matrices(&w, l, n, s.period()))?))
    })
}

/// Parses data matrices from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ltpd_data_from_json(json: *const c_char, out: *mut *mut LtpdData) -> LtpdStatus {
    guard(|| {
        let s = str_arg(json, "json")?;
        put(out, LtpdData(lib(DataMatrices::from_json(s))?))
    })
}

/// # Safety
/// `data` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ltpd_data_free(data: *mut LtpdData) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Index of the data set matching time `t`; fails when the record start is unknown.
///
/// # Safety
/// `data` must be a live handle and `theta` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ltpd_data_proper_index(data: *const LtpdData, t: i64, theta: *mut usize) -> LtpdStatus {
    guard(|| {
        let d = &handle(data, "data")?.0;
        let th = d
            .proper_index(t)
            .ok_or_else(|| (LtpdStatus::InvalidArgument, "data record start is unknown".to_string()))?;
        if theta.is_null() {
            return Err(null("theta"));
        }
        *theta = th;
        Ok(())
    })
}

unsafe fn parse_config(json: *const c_char) -> Result<ControllerConfig, (LtpdStatus, String)> {
    let s = str_arg(json, "config")?;
    serde_json::from_str(s).map_err(|e| (LtpdStatus::Parse, e.to_string()))
}

/// Data-driven controller; `config` is a controller configuration in JSON
/// whose mode is one of `pdeepc`, `pspc`, `reg_pdeepc`, `reg_pspc`.
///
/// # Safety
/// `data` must be a live handle, `config` a NUL-terminated string, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ltpd_controller_new_data(
    data: *const LtpdData,
    config: *const c_char,
    out: *mut *mut LtpdController,
) -> LtpdStatus {
    guard(|| {
        let d = handle(data, "data")?.0.clone();
        let cfg = parse_config(config)?;
        put(out, LtpdController(lib(Controller::data_driven(d, cfg))?))
    })
}

/// Model-based controller (mode `mpc`).
///
/// # Safety
/// `sys` must be a live handle, `config` a NUL-terminated string, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ltpd_controller_new_model(
    sys: *const LtpdSystem,
    config: *const c_char,
    out: *mut *mut LtpdController,
) -> LtpdStatus {
    guard(|| {
        let s = handle(sys, "system")?.0.clone();
        let cfg = parse_config(config)?;
        put(out, LtpdController(lib(Controller::model_based(s, cfg))?))
    })
}

/// # Safety
/// `ctl` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ltpd_controller_free(ctl: *mut LtpdController) {
    if !ctl.is_null() {
        drop(Box::from_raw(ctl));
    }
}

/// Solves with data set `theta` for the past `[u_p; y_p]` (`(m+p)L` values)
/// and stacked reference `r` (`pN`); writes the optimal inputs (`mN`) and,
/// when `y_out` is non-NULL, the predicted outputs (`pN`).
///
/// # Safety
/// Pointers must reference arrays of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ltpd_controller_solve_data(
    ctl: *const LtpdController,
    theta: usize,
    w_past: *const f64,
    w_len: usize,
    r: *const f64,
    r_len: usize,
    u_out: *mut f64,
    u_len: usize,
    y_out: *mut f64,
    y_len: usize,
) -> LtpdStatus {
    guard(|| {
        let c = &handle(ctl, "controller")?.0;
        let w = DVector::from_column_slice(slice_arg(w_past, w_len, "w_past")?);
        let r = DVector::from_column_slice(slice_arg(r, r_len, "r")?);
        let sol = lib(c.solve_data(theta, &w, &r))?;
        write_out(u_out, u_len, sol.u_star.as_slice(), "u_out")?;
        if !y_out.is_null() {
            write_out(y_out, y_len, sol.y_star.as_slice(), "y_out")?;
        }
        Ok(())
    })
}

/// Solves from state `x` (`n`) at time `t`; outputs as in [`ltpd_controller_solve_data`].
///
/// # Safety
/// Pointers must reference arrays of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ltpd_controller_solve_model(
    ctl: *const LtpdController,
    t: i64,
    x: *const f64,
    x_len: usize,
    r: *const f64,
    r_len: usize,
    u_out: *mut f64,
    u_len: usize,
    y_out: *mut f64,
    y_len: usize,
) -> LtpdStatus {
    guard(|| {
        let c = &handle(ctl, "controller")?.0;
        let x = DVector::from_column_slice(slice_arg(x, x_len, "x")?);
        let r = DVector::from_column_slice(slice_arg(r, r_len, "r")?);
        let sol = lib(c.solve_model(t, &x, &r))?;
        write_out(u_out, u_len, sol.u_star.as_slice(), "u_out")?;
        if !y_out.is_null() {
            write_out(y_out, y_len, sol.y_star.as_slice(), "y_out")?;
        }
        Ok(())
    })
}
