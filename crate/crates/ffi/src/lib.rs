//! C ABI for the simulation engine.
//!
//! The interface follows the usual opaque-handle pattern: create a simulation
//! from a scenario file or TOML string, optionally override a few parameters,
//! run it, then read the result digest. All functions return an error code;
//! `shiresim_error_name` maps codes to stable strings.

use shiresim::config::TraceLevel;
use shiresim::runtime::RunOutcome;
use shiresim::{ScenarioConfig, SimError};
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

/// Error codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiresimStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ValidationError = 4,
    RunFailed = 5,
    NotRun = 6,
    BufferTooSmall = 7,
}

fn status_of(err: &SimError) -> ShiresimStatus {
    match err {
        SimError::Parse(_) | SimError::Io(_) => ShiresimStatus::ParseError,
        SimError::Validation { .. } => ShiresimStatus::ValidationError,
        _ => ShiresimStatus::RunFailed,
    }
}

/// Opaque simulation handle.
pub struct ShiresimSim {
    cfg: ScenarioConfig,
    outcome: Option<RunOutcome>,
    last_error: Option<CString>,
}

impl ShiresimSim {
    fn record_error(&mut self, e: &SimError) {
        self.last_error = CString::new(e.to_string()).ok();
    }
}

unsafe fn cstr<'a>(p: *const c_char) -> Result<&'a str, ShiresimStatus> {
    if p.is_null() {
        return Err(ShiresimStatus::NullArgument);
    }
    CStr::from_ptr(p).to_str().map_err(|_| ShiresimStatus::InvalidUtf8)
}

/// Create a simulation from a scenario file. On success writes a handle to
/// `out`; the caller frees it with `shiresim_free`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shiresim_new_from_file(
    path: *const c_char,
    out: *mut *mut ShiresimSim,
) -> ShiresimStatus {
    if out.is_null() {
        return ShiresimStatus::NullArgument;
    }
    let path = match cstr(path) {
        Ok(s) => s,
        Err(st) => return st,
    };
    match ScenarioConfig::load(Path::new(path)) {
        Ok(cfg) => {
            let sim = Box::new(ShiresimSim { cfg, outcome: None, last_error: None });
            *out = Box::into_raw(sim);
            ShiresimStatus::Ok
        }
        Err(e) => {
            *out = ptr::null_mut();
            status_of(&e)
        }
    }
}

/// Create a simulation from scenario TOML text.
///
/// # Safety
/// `toml_text` must be a valid NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shiresim_new_from_toml(
    toml_text: *const c_char,
    out: *mut *mut ShiresimSim,
) -> ShiresimStatus {
    if out.is_null() {
        return ShiresimStatus::NullArgument;
    }
    let text = match cstr(toml_text) {
        Ok(s) => s,
        Err(st) => return st,
    };
    match ScenarioConfig::from_toml(text) {
        Ok(cfg) => {
            let sim = Box::new(ShiresimSim { cfg, outcome: None, last_error: None });
            *out = Box::into_raw(sim);
            ShiresimStatus::Ok
        }
        Err(e) => {
            *out = ptr::null_mut();
            status_of(&e)
        }
    }
}

/// Override the number of logical processes.
///
/// # Safety
/// `sim` must be a live handle from a constructor.
#[no_mangle]
pub unsafe extern "C" fn shiresim_set_lps(sim: *mut ShiresimSim, n_lps: u32) -> ShiresimStatus {
    let Some(sim) = sim.as_mut() else { return ShiresimStatus::NullArgument };
    if n_lps == 0 {
        return ShiresimStatus::ValidationError;
    }
    sim.cfg.n_lps = n_lps;
    ShiresimStatus::Ok
}

/// Override the global seed.
///
/// # Safety
/// `sim` must be a live handle from a constructor.
#[no_mangle]
pub unsafe extern "C" fn shiresim_set_seed(sim: *mut ShiresimSim, seed: u64) -> ShiresimStatus {
    let Some(sim) = sim.as_mut() else { return ShiresimStatus::NullArgument };
    sim.cfg.seed = seed;
    ShiresimStatus::Ok
}

/// Override the number of coarse steps.
///
/// # Safety
/// `sim` must be a live handle from a constructor.
#[no_mangle]
pub unsafe extern "C" fn shiresim_set_steps(sim: *mut ShiresimSim, steps: u64) -> ShiresimStatus {
    let Some(sim) = sim.as_mut() else { return ShiresimStatus::NullArgument };
    if steps == 0 {
        return ShiresimStatus::ValidationError;
    }
    sim.cfg.total_coarse_steps = steps;
    ShiresimStatus::Ok
}

/// Enable or disable adaptive migration (nonzero = enabled).
///
/// # Safety
/// `sim` must be a live handle from a constructor.
#[no_mangle]
pub unsafe extern "C" fn shiresim_set_migration(
    sim: *mut ShiresimSim,
    enabled: i32,
) -> ShiresimStatus {
    let Some(sim) = sim.as_mut() else { return ShiresimStatus::NullArgument };
    sim.cfg.migration.enabled = enabled != 0;
    ShiresimStatus::Ok
}

/// Run the simulation to completion. Tracing is forced off for embedded use.
///
/// # Safety
/// `sim` must be a live handle from a constructor.
#[no_mangle]
pub unsafe extern "C" fn shiresim_run(sim: *mut ShiresimSim) -> ShiresimStatus {
    let Some(sim) = sim.as_mut() else { return ShiresimStatus::NullArgument };
    sim.cfg.trace = TraceLevel::Off;
    match shiresim::run(&sim.cfg) {
        Ok(outcome) => {
            sim.outcome = Some(outcome);
            ShiresimStatus::Ok
        }
        Err(e) => {
            let st = status_of(&e);
            sim.record_error(&e);
            st
        }
    }
}

/// Copy the hex digest of a finished run (64 chars + NUL) into `buf`.
///
/// # Safety
/// `sim` must be a live handle; `buf` must point to at least `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn shiresim_digest_hex(
    sim: *const ShiresimSim,
    buf: *mut c_char,
    len: usize,
) -> ShiresimStatus {
    let Some(sim) = sim.as_ref() else { return ShiresimStatus::NullArgument };
    if buf.is_null() {
        return ShiresimStatus::NullArgument;
    }
    let Some(outcome) = &sim.outcome else { return ShiresimStatus::NotRun };
    let hex = outcome.digest.hex();
    if len < hex.len() + 1 {
        return ShiresimStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(hex.as_ptr(), buf as *mut u8, hex.len());
    *buf.add(hex.len()) = 0;
    ShiresimStatus::Ok
}

/// Total coarse steps the configured scenario will run.
///
/// # Safety
/// `sim` must be a live handle from a constructor.
#[no_mangle]
pub unsafe extern "C" fn shiresim_total_steps(sim: *const ShiresimSim) -> u64 {
    sim.as_ref().map_or(0, |s| s.cfg.total_coarse_steps)
}

/// Message of the last run error on this handle, or NULL. Valid until the
/// next call on the same handle.
///
/// # Safety
/// `sim` must be a live handle from a constructor.
#[no_mangle]
pub unsafe extern "C" fn shiresim_last_error(sim: *const ShiresimSim) -> *const c_char {
    sim.as_ref()
        .and_then(|s| s.last_error.as_ref())
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// Stable name of a status code.
#[no_mangle]
pub extern "C" fn shiresim_error_name(status: ShiresimStatus) -> *const c_char {
    let name: &'static [u8] = match status {
        ShiresimStatus::Ok => b"ok\0",
        ShiresimStatus::NullArgument => b"null-argument\0",
        ShiresimStatus::InvalidUtf8 => b"invalid-utf8\0",
        ShiresimStatus::ParseError => b"parse-error\0",
        ShiresimStatus::ValidationError => b"validation-error\0",
        ShiresimStatus::RunFailed => b"run-failed\0",
        ShiresimStatus::NotRun => b"not-run\0",
        ShiresimStatus::BufferTooSmall => b"buffer-too-small\0",
    };
    name.as_ptr() as *const c_char
}

/// Destroy a handle. NULL is a no-op.
///
/// # Safety
/// `sim` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn shiresim_free(sim: *mut ShiresimSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
