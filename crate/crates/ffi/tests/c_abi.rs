//! The C surface driven exactly as a foreign binding would: JSON strings
//! in, opaque handle out, explicit frees.

use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::ptr;

use openset_ffi::*;

#[test]
fn full_run_through_the_c_surface() {
    let config = CString::new(
        r#"{
            "seed": 3,
            "iterations": 40,
            "samples_per_class": 30,
            "background_samples": 20,
            "test_samples_per_class": 12,
            "test_background_samples": 10,
            "unknown_samples_per_cluster": 8,
            "hidden": [12],
            "feature_dim": 6,
            "embed_dim": 6
        }"#,
    )
    .unwrap();

    let mut run: *mut OsRun = ptr::null_mut();
    let status = unsafe { os_run_experiment(config.as_ptr(), &mut run) };
    assert_eq!(status, OsStatus::Ok);
    assert!(!run.is_null());

    let report = unsafe { CStr::from_ptr(os_run_report_json(run)) }
        .to_str()
        .unwrap()
        .to_string();
    let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert!(parsed["metrics"]["map_known"].as_f64().unwrap() > 0.0);
    assert_eq!(parsed["seed"].as_u64(), Some(3));

    let checkpoint = unsafe { CStr::from_ptr(os_run_checkpoint_json(run)) }
        .to_str()
        .unwrap()
        .to_string();
    assert!(openset::model::checkpoint_from_json(&checkpoint).is_ok());

    unsafe { os_run_free(run) };
}

#[test]
fn invalid_config_reports_error() {
    let config = CString::new(r#"{"blur": -1.0}"#).unwrap();
    let mut run: *mut OsRun = ptr::null_mut();
    let status = unsafe { os_run_experiment(config.as_ptr(), &mut run) };
    assert_eq!(status, OsStatus::InvalidArgument);
    assert!(run.is_null());
    let msg = os_last_error_message();
    assert!(!msg.is_null());
    let text = unsafe { CStr::from_ptr(msg) }.to_str().unwrap().to_string();
    assert!(text.contains("blur"), "unexpected message: {text}");
    unsafe { os_string_free(msg) };

    let status = unsafe { os_run_experiment(ptr::null(), &mut run) };
    assert_eq!(status, OsStatus::NullArgument);
}

#[test]
fn divergence_of_identical_clouds_is_zero() {
    let points = [0.0_f64, 0.0, 1.0, 1.0, 2.0, 0.5];
    let mut out = f64::NAN;
    let status = unsafe {
        os_sinkhorn_divergence(points.as_ptr(), 3, points.as_ptr(), 3, 2, 1.0, 0.1, &mut out)
    };
    assert_eq!(status, OsStatus::Ok);
    assert!(out.abs() <= 1e-9, "self-divergence {out}");
}

#[test]
fn generated_header_covers_the_surface() {
    let header = std::fs::read_to_string(
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/openset.h"),
    )
    .expect("header generated at build time");
    for symbol in [
        "os_version",
        "os_default_config_json",
        "os_run_experiment",
        "os_run_report_json",
        "os_run_checkpoint_json",
        "os_run_free",
        "os_sinkhorn_divergence",
        "os_score_dump",
        "os_string_free",
        "os_last_error_message",
        "os_status_t",
        "os_run_t",
    ] {
        assert!(header.contains(symbol), "{symbol} missing from header");
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(os_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

// the header declares strings as c_char pointers; keep the test honest
// about the platform type
#[allow(dead_code)]
fn _typecheck(p: *const c_char) -> *const c_char {
    p
}
