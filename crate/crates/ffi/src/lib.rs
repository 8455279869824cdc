//! C ABI for the openset library.
//!
//! The surface follows the usual opaque-handle pattern: constructors return
//! pointers to opaque structs, every function returns an [`OsStatus`] code
//! (or a pointer that is null on failure), and the last error message is
//! retrievable per thread via [`os_last_error_message`]. All strings are
//! UTF-8, NUL-terminated, and owned by whoever the function documents.
//!
//! The generated header lands in `include/openset.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use openset::eval::{dump_metric_rows, metrics_to_csv, parse_dump_jsonl};
use openset::model::checkpoint_to_json;
use openset::numerics::DenseVector;
use openset::pipeline::{run_experiment, TrainConfig};
use openset::transport::{sinkhorn_divergence, EmpiricalMeasure};

/// Result codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OsStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Arguments or configuration were rejected.
    InvalidArgument = 2,
    /// The numerics failed (non-finite values, Sinkhorn blow-up).
    NumericalFailure = 3,
    /// A string argument was not valid UTF-8.
    Utf8Error = 4,
    /// An internal panic was caught at the boundary.
    InternalError = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let owned = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(owned));
}

fn status_of(err: &openset::Error) -> OsStatus {
    if err.is_numerical() {
        OsStatus::NumericalFailure
    } else {
        OsStatus::InvalidArgument
    }
}

/// Completed training run: report and checkpoint, both as JSON.
pub struct OsRun {
    report_json: CString,
    checkpoint_json: CString,
}

fn guarded<F: FnOnce() -> OsStatus>(f: F) -> OsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            OsStatus::InternalError
        }
    }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, OsStatus> {
    if ptr.is_null() {
        set_last_error("null string argument");
        return Err(OsStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8");
        OsStatus::Utf8Error
    })
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn os_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// The last error message raised on this thread, or null if none.
/// Free with [`os_string_free`].
#[no_mangle]
pub extern "C" fn os_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// The default configuration as pretty JSON. Free with [`os_string_free`].
#[no_mangle]
pub extern "C" fn os_default_config_json() -> *mut c_char {
    match TrainConfig::default().to_json() {
        Ok(json) => CString::new(json).map_or(ptr::null_mut(), CString::into_raw),
        Err(_) => ptr::null_mut(),
    }
}

/// Generate data, train and evaluate under a JSON configuration (any
/// subset of fields; missing ones take defaults). On success `*out_run`
/// owns the result and must be released with [`os_run_free`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string or null; `out_run` must
/// point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn os_run_experiment(
    config_json: *const c_char,
    out_run: *mut *mut OsRun,
) -> OsStatus {
    guarded(|| {
        if out_run.is_null() {
            set_last_error("out_run is null");
            return OsStatus::NullArgument;
        }
        let text = match cstr_arg(config_json) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let cfg = match TrainConfig::from_json(text) {
            Ok(cfg) => cfg,
            Err(e) => {
                set_last_error(&e.to_string());
                return OsStatus::InvalidArgument;
            }
        };
        match run_experiment(&cfg) {
            Ok(out) => {
                let report = out.report.to_json().unwrap_or_default();
                let checkpoint = checkpoint_to_json(&out.params).unwrap_or_default();
                let run = Box::new(OsRun {
                    report_json: CString::new(report).unwrap_or_default(),
                    checkpoint_json: CString::new(checkpoint).unwrap_or_default(),
                });
                *out_run = Box::into_raw(run);
                OsStatus::Ok
            }
            Err(e) => {
                set_last_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// The run report as JSON. Borrowed from the handle: valid until
/// [`os_run_free`]; do not free separately.
///
/// # Safety
/// `run` must be a live pointer from [`os_run_experiment`].
#[no_mangle]
pub unsafe extern "C" fn os_run_report_json(run: *const OsRun) -> *const c_char {
    if run.is_null() {
        return ptr::null();
    }
    (*run).report_json.as_ptr()
}

/// The trained parameters as checkpoint JSON. Borrowed from the handle.
///
/// # Safety
/// `run` must be a live pointer from [`os_run_experiment`].
#[no_mangle]
pub unsafe extern "C" fn os_run_checkpoint_json(run: *const OsRun) -> *const c_char {
    if run.is_null() {
        return ptr::null();
    }
    (*run).checkpoint_json.as_ptr()
}

/// Release a run handle.
///
/// # Safety
/// `run` must come from [`os_run_experiment`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn os_run_free(run: *mut OsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Debiased Sinkhorn divergence between two uniformly weighted point
/// clouds, row-major `n x dim` and `m x dim`, with L1 ground cost raised
/// to `cost_power` and regularization length-scale `blur`.
///
/// # Safety
/// `p_points` must hold `p_len * dim` doubles, `q_points` `q_len * dim`;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn os_sinkhorn_divergence(
    p_points: *const f64,
    p_len: usize,
    q_points: *const f64,
    q_len: usize,
    dim: usize,
    cost_power: f64,
    blur: f64,
    out: *mut f64,
) -> OsStatus {
    guarded(|| {
        if p_points.is_null() || q_points.is_null() || out.is_null() {
            set_last_error("null pointer argument");
            return OsStatus::NullArgument;
        }
        if p_len == 0 || q_len == 0 || dim == 0 {
            set_last_error("empty point cloud");
            return OsStatus::InvalidArgument;
        }
        let gather = |ptr: *const f64, len: usize| -> Vec<DenseVector> {
            (0..len)
                .map(|i| {
                    let row = std::slice::from_raw_parts(ptr.add(i * dim), dim);
                    DenseVector::new(row.to_vec())
                })
                .collect()
        };
        let p = match EmpiricalMeasure::uniform(gather(p_points, p_len)) {
            Ok(m) => m,
            Err(e) => {
                set_last_error(&e.to_string());
                return status_of(&e);
            }
        };
        let q = match EmpiricalMeasure::uniform(gather(q_points, q_len)) {
            Ok(m) => m,
            Err(e) => {
                set_last_error(&e.to_string());
                return status_of(&e);
            }
        };
        match sinkhorn_divergence(&p, &q, cost_power, blur) {
            Ok(value) => {
                *out = value;
                OsStatus::Ok
            }
            Err(e) => {
                set_last_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Score a JSON-lines detection dump; on success `*out_csv` holds the
/// `metric,threshold,value` CSV (free with [`os_string_free`]).
///
/// # Safety
/// `jsonl` must be a NUL-terminated string or null; `out_csv` must point
/// to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn os_score_dump(
    jsonl: *const c_char,
    out_csv: *mut *mut c_char,
) -> OsStatus {
    guarded(|| {
        if out_csv.is_null() {
            set_last_error("out_csv is null");
            return OsStatus::NullArgument;
        }
        let text = match cstr_arg(jsonl) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let result = parse_dump_jsonl(text).and_then(|records| {
            if records.is_empty() {
                return Err(openset::Error::EmptyInput);
            }
            dump_metric_rows(&records)
        });
        match result {
            Ok(rows) => {
                let csv = metrics_to_csv(&rows);
                *out_csv = CString::new(csv).unwrap_or_default().into_raw();
                OsStatus::Ok
            }
            Err(e) => {
                set_last_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from an openset function documented to transfer
/// ownership, and must not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn os_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
