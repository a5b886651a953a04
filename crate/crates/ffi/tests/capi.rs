//! Exercises the C ABI through the exported symbols, including the error
//! paths a C caller can hit. The digest read through the ABI is checked
//! against a run of the underlying library with the same configuration.

use shiresim_ffi::*;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

const SCENARIO: &str = r#"
    seed = 21
    total_coarse_steps = 40
    n_lps = 2
    trace = "stats"
    [area]
    width = 400.0
    height = 400.0
    [counts]
    sensors = 10
    producers = 10
    consumers = 60
    relays = 10
"#;

unsafe fn new_sim(toml: &str) -> (*mut ShiresimSim, ShiresimStatus) {
    let text = CString::new(toml).unwrap();
    let mut sim: *mut ShiresimSim = ptr::null_mut();
    let st = shiresim_new_from_toml(text.as_ptr(), &mut sim);
    (sim, st)
}

unsafe fn digest_of(sim: *const ShiresimSim) -> String {
    let mut buf = [0 as c_char; 65];
    assert_eq!(shiresim_digest_hex(sim, buf.as_mut_ptr(), buf.len()), ShiresimStatus::Ok);
    CStr::from_ptr(buf.as_ptr()).to_str().unwrap().to_owned()
}

#[test]
fn run_and_digest_match_native_library() {
    unsafe {
        let (sim, st) = new_sim(SCENARIO);
        assert_eq!(st, ShiresimStatus::Ok);
        assert_eq!(shiresim_set_seed(sim, 99), ShiresimStatus::Ok);
        assert_eq!(shiresim_set_lps(sim, 4), ShiresimStatus::Ok);
        assert_eq!(shiresim_set_steps(sim, 50), ShiresimStatus::Ok);
        assert_eq!(shiresim_set_migration(sim, 0), ShiresimStatus::Ok);
        assert_eq!(shiresim_total_steps(sim), 50);
        assert_eq!(shiresim_run(sim), ShiresimStatus::Ok);
        let via_abi = digest_of(sim);
        shiresim_free(sim);

        let mut cfg = shiresim::ScenarioConfig::from_toml(SCENARIO).unwrap();
        cfg.seed = 99;
        cfg.n_lps = 4;
        cfg.total_coarse_steps = 50;
        cfg.migration.enabled = false;
        cfg.trace = shiresim::config::TraceLevel::Off;
        let native = shiresim::run(&cfg).unwrap();
        assert_eq!(via_abi, native.digest.hex());
    }
}

#[test]
fn constructor_error_paths() {
    unsafe {
        // Null out-pointer and null text.
        let text = CString::new(SCENARIO).unwrap();
        assert_eq!(
            shiresim_new_from_toml(text.as_ptr(), ptr::null_mut()),
            ShiresimStatus::NullArgument
        );
        let mut sim: *mut ShiresimSim = ptr::null_mut();
        assert_eq!(shiresim_new_from_toml(ptr::null(), &mut sim), ShiresimStatus::NullArgument);

        // Broken TOML and unknown keys both surface as parse errors.
        let (sim, st) = new_sim("seed = ");
        assert_eq!(st, ShiresimStatus::ParseError);
        assert!(sim.is_null());
        let (sim, st) = new_sim("no_such_key = 1");
        assert_eq!(st, ShiresimStatus::ParseError);
        assert!(sim.is_null());

        // Well-formed TOML with an impossible scenario fails validation.
        let invalid = format!(
            "{SCENARIO}\n[[multilevel.regions]]\nid = 0\nbounds = [0.0, 0.0, 900.0, 900.0]\n"
        );
        let (sim, st) = new_sim(&invalid);
        assert_eq!(st, ShiresimStatus::ValidationError);
        assert!(sim.is_null());

        // Missing file.
        let path = CString::new("/nonexistent/scenario.cfg").unwrap();
        let mut sim: *mut ShiresimSim = ptr::null_mut();
        assert_eq!(shiresim_new_from_file(path.as_ptr(), &mut sim), ShiresimStatus::ParseError);
    }
}

#[test]
fn runtime_error_paths() {
    unsafe {
        let (sim, st) = new_sim(SCENARIO);
        assert_eq!(st, ShiresimStatus::Ok);

        // Reading the digest before running is rejected.
        let mut buf = [0 as c_char; 65];
        assert_eq!(
            shiresim_digest_hex(sim, buf.as_mut_ptr(), buf.len()),
            ShiresimStatus::NotRun
        );

        // Invalid overrides are rejected at the call.
        assert_eq!(shiresim_set_lps(sim, 0), ShiresimStatus::ValidationError);
        assert_eq!(shiresim_set_steps(sim, 0), ShiresimStatus::ValidationError);

        // Run, then probe the short-buffer path.
        assert_eq!(shiresim_run(sim), ShiresimStatus::Ok);
        assert!(shiresim_last_error(sim).is_null());
        let mut short = [0 as c_char; 16];
        assert_eq!(
            shiresim_digest_hex(sim, short.as_mut_ptr(), short.len()),
            ShiresimStatus::BufferTooSmall
        );
        assert_eq!(digest_of(sim).len(), 64);
        shiresim_free(sim);

        // Null-handle calls are safe no-ops with a status.
        assert_eq!(shiresim_run(ptr::null_mut()), ShiresimStatus::NullArgument);
        assert_eq!(shiresim_total_steps(ptr::null()), 0);
        assert!(shiresim_last_error(ptr::null()).is_null());
        shiresim_free(ptr::null_mut());
    }
}

#[test]
fn status_names_are_stable() {
    let cases = [
        (ShiresimStatus::Ok, "ok"),
        (ShiresimStatus::NullArgument, "null-argument"),
        (ShiresimStatus::InvalidUtf8, "invalid-utf8"),
        (ShiresimStatus::ParseError, "parse-error"),
        (ShiresimStatus::ValidationError, "validation-error"),
        (ShiresimStatus::RunFailed, "run-failed"),
        (ShiresimStatus::NotRun, "not-run"),
        (ShiresimStatus::BufferTooSmall, "buffer-too-small"),
    ];
    for (st, want) in cases {
        let got = unsafe { CStr::from_ptr(shiresim_error_name(st)) };
        assert_eq!(got.to_str().unwrap(), want);
    }
}

#[test]
fn generated_header_covers_the_abi() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/shiresim.h");
    let text = std::fs::read_to_string(header).expect("header generated at build time");
    for sym in [
        "shiresim_new_from_file",
        "shiresim_new_from_toml",
        "shiresim_set_lps",
        "shiresim_set_seed",
        "shiresim_set_steps",
        "shiresim_set_migration",
        "shiresim_run",
        "shiresim_digest_hex",
        "shiresim_total_steps",
        "shiresim_last_error",
        "shiresim_error_name",
        "shiresim_free",
        "ShiresimStatus",
        "ShiresimSim",
    ] {
        assert!(text.contains(sym), "header is missing {sym}");
    }
}
