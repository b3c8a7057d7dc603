//! C ABI for the fracgrow simulator.
//!
//! The surface follows the usual opaque-handle pattern: a configuration is
//! parsed from a JSON document into a `FracgrowConfig`, simulated into a
//! `FracgrowTrajectory`, and interrogated through accessor functions.
//! Structured reports come back as JSON strings allocated by this library
//! and released with [`fracgrow_string_free`]. Every fallible call returns
//! a [`FracgrowStatus`]; the most recent error message is retrievable per
//! thread via [`fracgrow_last_error_message`].
//!
//! All functions are panic-safe: a Rust panic is caught at the boundary
//! and surfaces as `InternalError`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use fracgrow::asymptotics::check_assumptions;
use fracgrow::config::{parse_config, LoadedConfig};
use fracgrow::scheme::{apriori_report, residual_report, simulate, Trajectory};

/// Status codes mirroring the CLI exit-code contract (2 = configuration,
/// 3 = solver, 4 = assumption refusal).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracgrowStatus {
    Ok = 0,
    NullPointer = 1,
    ConfigError = 2,
    SolverError = 3,
    AssumptionError = 4,
    Utf8Error = 5,
    InternalError = 6,
}

/// Field selector for trajectory accessors.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracgrowField {
    ChemicalPotential = 0,
    TumorFraction = 1,
    Nutrient = 2,
    Selection = 3,
}

/// Opaque parsed configuration handle.
pub struct FracgrowConfig {
    inner: LoadedConfig,
}

/// Opaque trajectory handle.
pub struct FracgrowTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &fracgrow::Error) -> FracgrowStatus {
    match err.exit_code() {
        2 => FracgrowStatus::ConfigError,
        4 => FracgrowStatus::AssumptionError,
        _ => FracgrowStatus::SolverError,
    }
}

fn guard(f: impl FnOnce() -> FracgrowStatus) -> FracgrowStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic crossed the ffi boundary");
            FracgrowStatus::InternalError
        }
    }
}

fn json_out(value: String, out: *mut *mut c_char) -> FracgrowStatus {
    match CString::new(value) {
        Ok(cstring) => {
            unsafe { *out = cstring.into_raw() };
            FracgrowStatus::Ok
        }
        Err(_) => {
            set_error("report contained an interior NUL byte");
            FracgrowStatus::InternalError
        }
    }
}

/// Copy the last error message of this thread into `buffer` (NUL
/// terminated, truncated to `capacity`). Returns the full message length
/// in bytes, excluding the terminator; call with a null buffer to query
/// the required capacity.
///
/// # Safety
/// `buffer` must either be null or point to at least `capacity` writable
/// bytes.
#[no_mangle]
pub unsafe extern "C" fn fracgrow_last_error_message(
    buffer: *mut c_char,
    capacity: usize,
) -> usize {
    LAST_ERROR.with(|slot| {
        let cur = slot.borrow();
        let bytes = cur.as_bytes();
        if !buffer.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buffer as *mut u8, n);
            *buffer.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static version string of the underlying library.
#[no_mangle]
pub extern "C" fn fracgrow_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Parse a JSON configuration document into an opaque handle.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must point to a
/// writable pointer slot. On success the caller owns the handle and must
/// release it with [`fracgrow_config_free`].
#[no_mangle]
pub unsafe extern "C" fn fracgrow_config_parse(
    json: *const c_char,
    out: *mut *mut FracgrowConfig,
) -> FracgrowStatus {
    if json.is_null() || out.is_null() {
        set_error("null pointer passed to fracgrow_config_parse");
        return FracgrowStatus::NullPointer;
    }
    guard(|| {
        let text = match CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("configuration document is not valid UTF-8");
                return FracgrowStatus::Utf8Error;
            }
        };
        match parse_config(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(FracgrowConfig { inner }));
                FracgrowStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Release a configuration handle. Passing null is a no-op.
///
/// # Safety
/// `config` must be null or a pointer previously returned by
/// [`fracgrow_config_parse`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn fracgrow_config_free(config: *mut FracgrowConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Run the configured simulation into an opaque trajectory handle.
///
/// # Safety
/// `config` must be a live handle from [`fracgrow_config_parse`]; `out`
/// must point to a writable pointer slot. On success the caller owns the
/// trajectory and must release it with [`fracgrow_trajectory_free`].
#[no_mangle]
pub unsafe extern "C" fn fracgrow_simulate(
    config: *const FracgrowConfig,
    out: *mut *mut FracgrowTrajectory,
) -> FracgrowStatus {
    if config.is_null() || out.is_null() {
        set_error("null pointer passed to fracgrow_simulate");
        return FracgrowStatus::NullPointer;
    }
    guard(|| match simulate(&(*config).inner.problem) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(FracgrowTrajectory { inner }));
            FracgrowStatus::Ok
        }
        Err(failure) => {
            set_error(&failure.to_string());
            status_of(&failure.error)
        }
    })
}

/// Release a trajectory handle. Passing null is a no-op.
///
/// # Safety
/// `trajectory` must be null or a pointer previously returned by
/// [`fracgrow_simulate`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn fracgrow_trajectory_free(trajectory: *mut FracgrowTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// Number of stored states (time levels).
///
/// # Safety
/// `trajectory` must be a live handle; null yields 0.
#[no_mangle]
pub unsafe extern "C" fn fracgrow_trajectory_states(
    trajectory: *const FracgrowTrajectory,
) -> usize {
    if trajectory.is_null() {
        return 0;
    }
    (*trajectory).inner.len()
}

/// Number of spectral coefficients of one field.
///
/// # Safety
/// `trajectory` must be a live handle; null yields 0.
#[no_mangle]
pub unsafe extern "C" fn fracgrow_trajectory_modes(
    trajectory: *const FracgrowTrajectory,
    field: FracgrowField,
) -> usize {
    if trajectory.is_null() {
        return 0;
    }
    let cfg = &(*trajectory).inner.config;
    match field {
        FracgrowField::ChemicalPotential => cfg.op_a.basis().n_modes(),
        FracgrowField::TumorFraction | FracgrowField::Selection => cfg.op_b.basis().n_modes(),
        FracgrowField::Nutrient => cfg.op_c.basis().n_modes(),
    }
}

/// Time of the `state`-th stored level.
///
/// # Safety
/// `trajectory` must be a live handle and `out` a writable double slot.
#[no_mangle]
pub unsafe extern "C" fn fracgrow_trajectory_time(
    trajectory: *const FracgrowTrajectory,
    state: usize,
    out: *mut f64,
) -> FracgrowStatus {
    if trajectory.is_null() || out.is_null() {
        set_error("null pointer passed to fracgrow_trajectory_time");
        return FracgrowStatus::NullPointer;
    }
    let traj = &(*trajectory).inner;
    if state >= traj.len() {
        set_error("state index out of range");
        return FracgrowStatus::ConfigError;
    }
    *out = traj.states[state].time;
    FracgrowStatus::Ok
}

/// Copy the spectral coefficients of one field at one state into
/// `buffer`. `len` must equal the field's mode count.
///
/// # Safety
/// `trajectory` must be a live handle and `buffer` must point to at least
/// `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fracgrow_trajectory_coefficients(
    trajectory: *const FracgrowTrajectory,
    state: usize,
    field: FracgrowField,
    buffer: *mut f64,
    len: usize,
) -> FracgrowStatus {
    if trajectory.is_null() || buffer.is_null() {
        set_error("null pointer passed to fracgrow_trajectory_coefficients");
        return FracgrowStatus::NullPointer;
    }
    let traj = &(*trajectory).inner;
    if state >= traj.len() {
        set_error("state index out of range");
        return FracgrowStatus::ConfigError;
    }
    let st = &traj.states[state];
    let coeffs = match field {
        FracgrowField::ChemicalPotential => st.mu.coeffs(),
        FracgrowField::TumorFraction => st.phi.coeffs(),
        FracgrowField::Nutrient => st.s_nutrient.coeffs(),
        FracgrowField::Selection => st.xi.coeffs(),
    };
    if len != coeffs.len() {
        set_error("buffer length does not match the field's mode count");
        return FracgrowStatus::ConfigError;
    }
    std::ptr::copy_nonoverlapping(coeffs.as_ptr(), buffer, len);
    FracgrowStatus::Ok
}

/// Serialize the a-priori-estimate report of a trajectory as JSON.
///
/// # Safety
/// `trajectory` must be a live handle; `out` receives an owned string to
/// release with [`fracgrow_string_free`].
#[no_mangle]
pub unsafe extern "C" fn fracgrow_estimate_report_json(
    trajectory: *const FracgrowTrajectory,
    out: *mut *mut c_char,
) -> FracgrowStatus {
    if trajectory.is_null() || out.is_null() {
        set_error("null pointer passed to fracgrow_estimate_report_json");
        return FracgrowStatus::NullPointer;
    }
    guard(|| match apriori_report(&(*trajectory).inner) {
        Ok(report) => json_out(
            serde_json::to_string_pretty(&report).unwrap_or_default(),
            out,
        ),
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    })
}

/// Serialize the per-equation residual report of a trajectory as JSON.
///
/// # Safety
/// Same contract as [`fracgrow_estimate_report_json`].
#[no_mangle]
pub unsafe extern "C" fn fracgrow_residual_report_json(
    trajectory: *const FracgrowTrajectory,
    out: *mut *mut c_char,
) -> FracgrowStatus {
    if trajectory.is_null() || out.is_null() {
        set_error("null pointer passed to fracgrow_residual_report_json");
        return FracgrowStatus::NullPointer;
    }
    guard(|| match residual_report(&(*trajectory).inner) {
        Ok(report) => json_out(
            serde_json::to_string_pretty(&report).unwrap_or_default(),
            out,
        ),
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    })
}

/// Serialize the recomputed structural-assumption flags of a configuration
/// as JSON.
///
/// # Safety
/// `config` must be a live handle; `out` receives an owned string to
/// release with [`fracgrow_string_free`].
#[no_mangle]
pub unsafe extern "C" fn fracgrow_check_assumptions_json(
    config: *const FracgrowConfig,
    out: *mut *mut c_char,
) -> FracgrowStatus {
    if config.is_null() || out.is_null() {
        set_error("null pointer passed to fracgrow_check_assumptions_json");
        return FracgrowStatus::NullPointer;
    }
    guard(|| {
        let check = check_assumptions(&(*config).inner.problem);
        json_out(
            serde_json::to_string_pretty(&check).unwrap_or_default(),
            out,
        )
    })
}

/// Run the built-in invariant suites and serialize the results as JSON.
///
/// # Safety
/// `out` must point to a writable pointer slot; the returned string is
/// released with [`fracgrow_string_free`].
#[no_mangle]
pub unsafe extern "C" fn fracgrow_verify_json(out: *mut *mut c_char) -> FracgrowStatus {
    if out.is_null() {
        set_error("null pointer passed to fracgrow_verify_json");
        return FracgrowStatus::NullPointer;
    }
    guard(|| match fracgrow::verify::run_all() {
        Ok(suites) => {
            let all_passed = suites.iter().all(|s| s.passed());
            let status = if all_passed {
                FracgrowStatus::Ok
            } else {
                set_error("one or more verification checks failed");
                FracgrowStatus::SolverError
            };
            let emit = json_out(
                serde_json::to_string_pretty(&suites).unwrap_or_default(),
                out,
            );
            if emit != FracgrowStatus::Ok {
                emit
            } else {
                status
            }
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    })
}

/// Release a string allocated by this library. Passing null is a no-op.
///
/// # Safety
/// `s` must be null or an owned string returned by one of the `_json`
/// functions, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fracgrow_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn cstring(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    unsafe fn last_error() -> String {
        let needed = fracgrow_last_error_message(ptr::null_mut(), 0);
        let mut buf = vec![0_u8; needed + 1];
        fracgrow_last_error_message(buf.as_mut_ptr() as *mut c_char, buf.len());
        String::from_utf8_lossy(&buf[..needed]).into_owned()
    }

    #[test]
    fn parse_simulate_and_read_back() {
        unsafe {
            let json = cstring(r#"{"space": {"n_modes": 6}, "time": {"T": 0.01, "h": 0.001}}"#);
            let mut cfg: *mut FracgrowConfig = ptr::null_mut();
            assert_eq!(
                fracgrow_config_parse(json.as_ptr(), &mut cfg),
                FracgrowStatus::Ok
            );

            let mut traj: *mut FracgrowTrajectory = ptr::null_mut();
            assert_eq!(fracgrow_simulate(cfg, &mut traj), FracgrowStatus::Ok);
            assert_eq!(fracgrow_trajectory_states(traj), 11);
            assert_eq!(
                fracgrow_trajectory_modes(traj, FracgrowField::TumorFraction),
                6
            );

            let mut t = f64::NAN;
            assert_eq!(
                fracgrow_trajectory_time(traj, 10, &mut t),
                FracgrowStatus::Ok
            );
            assert!((t - 0.01).abs() < 1e-12);

            let mut buf = vec![0.0_f64; 6];
            assert_eq!(
                fracgrow_trajectory_coefficients(
                    traj,
                    5,
                    FracgrowField::TumorFraction,
                    buf.as_mut_ptr(),
                    buf.len()
                ),
                FracgrowStatus::Ok
            );
            assert!(buf.iter().any(|c| c.abs() > 1e-6));

            // wrong buffer length is rejected
            assert_eq!(
                fracgrow_trajectory_coefficients(
                    traj,
                    5,
                    FracgrowField::TumorFraction,
                    buf.as_mut_ptr(),
                    3
                ),
                FracgrowStatus::ConfigError
            );

            let mut report: *mut c_char = ptr::null_mut();
            assert_eq!(
                fracgrow_estimate_report_json(traj, &mut report),
                FracgrowStatus::Ok
            );
            let text = CStr::from_ptr(report).to_str().unwrap();
            assert!(text.contains("implied_k1"));
            fracgrow_string_free(report);

            let mut residuals: *mut c_char = ptr::null_mut();
            assert_eq!(
                fracgrow_residual_report_json(traj, &mut residuals),
                FracgrowStatus::Ok
            );
            assert!(CStr::from_ptr(residuals)
                .to_str()
                .unwrap()
                .contains("max_residual_phi"));
            fracgrow_string_free(residuals);

            let mut assumptions: *mut c_char = ptr::null_mut();
            assert_eq!(
                fracgrow_check_assumptions_json(cfg, &mut assumptions),
                FracgrowStatus::Ok
            );
            assert!(CStr::from_ptr(assumptions)
                .to_str()
                .unwrap()
                .contains("a6_ok"));
            fracgrow_string_free(assumptions);

            fracgrow_trajectory_free(traj);
            fracgrow_config_free(cfg);
        }
    }

    #[test]
    fn config_error_surfaces_status_and_message() {
        unsafe {
            let json = cstring(r#"{"potential": {"kind": "logarithmic", "c1": 0.5}}"#);
            let mut cfg: *mut FracgrowConfig = ptr::null_mut();
            assert_eq!(
                fracgrow_config_parse(json.as_ptr(), &mut cfg),
                FracgrowStatus::ConfigError
            );
            assert!(last_error().contains("c1 > 1"));
        }
    }

    #[test]
    fn null_pointers_reported() {
        unsafe {
            let mut cfg: *mut FracgrowConfig = ptr::null_mut();
            assert_eq!(
                fracgrow_config_parse(ptr::null(), &mut cfg),
                FracgrowStatus::NullPointer
            );
            let mut traj: *mut FracgrowTrajectory = ptr::null_mut();
            assert_eq!(
                fracgrow_simulate(ptr::null(), &mut traj),
                FracgrowStatus::NullPointer
            );
            assert_eq!(fracgrow_trajectory_states(ptr::null()), 0);
            fracgrow_config_free(ptr::null_mut());
            fracgrow_trajectory_free(ptr::null_mut());
            fracgrow_string_free(ptr::null_mut());
        }
    }

    #[test]
    fn solver_failure_maps_to_status_3() {
        unsafe {
            let json = cstring(
                r#"{
                    "space": {"n_modes": 4},
                    "time": {"T": 0.01, "h": 0.001},
                    "newton": {"tol": 1e-300, "max_iter": 1}
                }"#,
            );
            let mut cfg: *mut FracgrowConfig = ptr::null_mut();
            assert_eq!(
                fracgrow_config_parse(json.as_ptr(), &mut cfg),
                FracgrowStatus::Ok
            );
            let mut traj: *mut FracgrowTrajectory = ptr::null_mut();
            assert_eq!(
                fracgrow_simulate(cfg, &mut traj),
                FracgrowStatus::SolverError
            );
            assert!(last_error().contains("newton"));
            fracgrow_config_free(cfg);
        }
    }

    #[test]
    fn version_is_a_c_string() {
        let v = fracgrow_version();
        let text = unsafe { CStr::from_ptr(v) }.to_str().unwrap();
        assert_eq!(text, env!("CARGO_PKG_VERSION"));
    }
}
