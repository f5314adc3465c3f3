//! C ABI for the fairsel engine.
//!
//! Every fallible function returns an [`FsStatus`] and writes results
//! through out-pointers. On failure the message is kept per thread and can
//! be read with [`fs_last_error`]. Tables and proxies are opaque handles
//! released with their `_free` functions.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use fairsel::cli::{run_cli, EXIT_OK, EXIT_USAGE};
use fairsel::data::{inject_label_bias, load_table, save_table, BiasSpec, DatasetTable, Split};
use fairsel::metrics;
use fairsel::model::ModelSpec;
use fairsel::proxy::{build_holdout_proxy, load_file_proxy, ProxyPredictor, ProxyTraining};
use fairsel::selection::fair_score;
use fairsel::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numeric = 3,
    Parse = 4,
    Io = 5,
    Coverage = 6,
    Unavailable = 7,
    Failed = 8,
    Panic = 9,
}

/// Opaque dataset handle.
pub struct FsTable(DatasetTable);

/// Opaque proxy-model handle.
pub struct FsProxy(ProxyPredictor);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: FsStatus, message: impl Into<String>) -> FsStatus {
    set_error(message);
    status
}

fn from_error(err: Error) -> FsStatus {
    let status = match &err {
        Error::Input(_) => FsStatus::InvalidInput,
        Error::Numeric(_) => FsStatus::Numeric,
        Error::Parse { .. } => FsStatus::Parse,
        Error::Io { .. } => FsStatus::Io,
        Error::Coverage(_) => FsStatus::Coverage,
        Error::Unavailable(_) => FsStatus::Unavailable,
    };
    fail(status, err.to_string())
}

fn guard(body: impl FnOnce() -> FsStatus) -> FsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|_| fail(FsStatus::Panic, "internal panic"))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, FsStatus> {
    if p.is_null() {
        return Err(fail(FsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(FsStatus::InvalidInput, format!("{what} is not valid UTF-8")))
}

unsafe fn labels(p: *const u32, n: usize, what: &str) -> Result<Vec<usize>, FsStatus> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(fail(FsStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n).iter().map(|&v| v as usize).collect())
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! try_fs {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => return from_error(err),
        }
    };
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next fallible call on the same thread.
#[no_mangle]
pub extern "C" fn fs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a dataset CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fs_table_load(path: *const c_char, out: *mut *mut FsTable) -> FsStatus {
    guard(|| {
        if out.is_null() {
            return fail(FsStatus::NullPointer, "out is null");
        }
        let path = try_status!(path_arg(path, "path"));
        let table = try_fs!(load_table(&path, Split::Train));
        *out = Box::into_raw(Box::new(FsTable(table)));
        FsStatus::Ok
    })
}

/// Writes a table as CSV.
///
/// # Safety
/// `table` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fs_table_save(table: *const FsTable, path: *const c_char) -> FsStatus {
    guard(|| {
        let Some(t) = table.as_ref() else {
            return fail(FsStatus::NullPointer, "table is null");
        };
        let path = try_status!(path_arg(path, "path"));
        try_fs!(save_table(&t.0, &path));
        FsStatus::Ok
    })
}

/// Releases a table. Null is ignored.
///
/// # Safety
/// `table` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fs_table_free(table: *mut FsTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Number of rows in a table.
///
/// # Safety
/// `table` must come from this library and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_table_len(table: *const FsTable, out: *mut usize) -> FsStatus {
    guard(|| match (table.as_ref(), out.is_null()) {
        (Some(t), false) => {
            *out = t.0.len();
            FsStatus::Ok
        }
        _ => fail(FsStatus::NullPointer, "table or out is null"),
    })
}

/// Number of rows whose observed label differs from the clean one.
///
/// # Safety
/// `table` must come from this library and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_table_flipped(table: *const FsTable, out: *mut usize) -> FsStatus {
    guard(|| match (table.as_ref(), out.is_null()) {
        (Some(t), false) => {
            *out = t.0.iter().filter(|e| e.is_flipped() == Some(true)).count();
            FsStatus::Ok
        }
        _ => fail(FsStatus::NullPointer, "table or out is null"),
    })
}

/// Flips labels of `target_group` in both directions with probability
/// `rho`, returning a new table.
///
/// # Safety
/// `table` must come from this library and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_table_inject_bias(
    table: *const FsTable,
    rho: f64,
    target_group: u32,
    seed: u64,
    out: *mut *mut FsTable,
) -> FsStatus {
    guard(|| {
        let (Some(t), false) = (table.as_ref(), out.is_null()) else {
            return fail(FsStatus::NullPointer, "table or out is null");
        };
        let groups = t.0.num_groups().max(target_group as usize + 1);
        let bias = try_fs!(BiasSpec::symmetric(rho, groups, &[target_group as usize]));
        let biased = try_fs!(inject_label_bias(&t.0, &bias, seed));
        *out = Box::into_raw(Box::new(FsTable(biased)));
        FsStatus::Ok
    })
}

/// Trains a linear proxy on a clean holdout table.
///
/// # Safety
/// `holdout` must come from this library and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_proxy_train(
    holdout: *const FsTable,
    include_sensitive: bool,
    epochs: u32,
    seed: u64,
    out: *mut *mut FsProxy,
) -> FsStatus {
    guard(|| {
        let (Some(t), false) = (holdout.as_ref(), out.is_null()) else {
            return fail(FsStatus::NullPointer, "holdout or out is null");
        };
        let spec = ModelSpec::linear(t.0.feature_dim(), t.0.num_classes().max(2)).with_sensitive(include_sensitive);
        let training = ProxyTraining {
            epochs: epochs as usize,
            seed,
            ..Default::default()
        };
        let proxy = try_fs!(build_holdout_proxy(&t.0, spec, &training));
        *out = Box::into_raw(Box::new(FsProxy(proxy)));
        FsStatus::Ok
    })
}

/// Loads per-example proxy predictions from CSV.
///
/// # Safety
/// `path` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fs_proxy_load(path: *const c_char, out: *mut *mut FsProxy) -> FsStatus {
    guard(|| {
        if out.is_null() {
            return fail(FsStatus::NullPointer, "out is null");
        }
        let path = try_status!(path_arg(path, "path"));
        let proxy = try_fs!(load_file_proxy(&path));
        *out = Box::into_raw(Box::new(FsProxy(proxy)));
        FsStatus::Ok
    })
}

/// Releases a proxy. Null is ignored.
///
/// # Safety
/// `proxy` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fs_proxy_free(proxy: *mut FsProxy) {
    if !proxy.is_null() {
        drop(Box::from_raw(proxy));
    }
}

/// Class probabilities of the proxy for row `row` of `table`, written to
/// `out` which must hold `capacity >= num_classes` values.
///
/// # Safety
/// Handles must come from this library; `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn fs_proxy_predict(
    proxy: *const FsProxy,
    table: *const FsTable,
    row: usize,
    out: *mut f64,
    capacity: usize,
) -> FsStatus {
    guard(|| {
        let (Some(p), Some(t), false) = (proxy.as_ref(), table.as_ref(), out.is_null()) else {
            return fail(FsStatus::NullPointer, "proxy, table or out is null");
        };
        let Some(ex) = t.0.examples().get(row) else {
            return fail(FsStatus::InvalidInput, format!("row {row} out of range"));
        };
        let probs = try_fs!(p.0.predict(ex));
        if capacity < probs.len() {
            return fail(FsStatus::InvalidInput, format!("need room for {} classes", probs.len()));
        }
        std::slice::from_raw_parts_mut(out, probs.len()).copy_from_slice(&probs);
        FsStatus::Ok
    })
}

/// Fair selection score `train + (1 - alpha) * proxy - gamma * peer`.
#[no_mangle]
pub extern "C" fn fs_fair_score(train_loss: f64, proxy_loss: f64, peer_term: f64, alpha: f64, gamma: f64) -> f64 {
    fair_score(train_loss, proxy_loss, peer_term, alpha, gamma)
}

fn metric_out(value: Option<f64>, out: *mut f64, name: &str) -> FsStatus {
    match value {
        Some(v) => {
            // SAFETY: checked non-null by the caller
            unsafe { *out = v };
            FsStatus::Ok
        }
        None => fail(FsStatus::Unavailable, format!("{name} is undefined for this input")),
    }
}

/// Demographic-parity gap between the two groups.
///
/// # Safety
/// Arrays must hold `n` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_delta_dp(predictions: *const u32, groups: *const u32, n: usize, out: *mut f64) -> FsStatus {
    guard(|| {
        if out.is_null() {
            return fail(FsStatus::NullPointer, "out is null");
        }
        let p = try_status!(labels(predictions, n, "predictions"));
        let g = try_status!(labels(groups, n, "groups"));
        metric_out(metrics::delta_dp(&p, &g), out, "delta_dp")
    })
}

/// Equal-opportunity gap between the two groups.
///
/// # Safety
/// Arrays must hold `n` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_delta_deo(
    predictions: *const u32,
    labels_in: *const u32,
    groups: *const u32,
    n: usize,
    out: *mut f64,
) -> FsStatus {
    guard(|| {
        if out.is_null() {
            return fail(FsStatus::NullPointer, "out is null");
        }
        let p = try_status!(labels(predictions, n, "predictions"));
        let y = try_status!(labels(labels_in, n, "labels"));
        let g = try_status!(labels(groups, n, "groups"));
        metric_out(metrics::delta_deo(&p, &y, &g), out, "delta_deo")
    })
}

/// Ratio of the smaller to the larger group positive rate.
///
/// # Safety
/// Arrays must hold `n` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fs_p_percent(predictions: *const u32, groups: *const u32, n: usize, out: *mut f64) -> FsStatus {
    guard(|| {
        if out.is_null() {
            return fail(FsStatus::NullPointer, "out is null");
        }
        let p = try_status!(labels(predictions, n, "predictions"));
        let g = try_status!(labels(groups, n, "groups"));
        metric_out(metrics::p_percent_rule(&p, &g), out, "p_percent")
    })
}

fn cli_status(args: Vec<std::ffi::OsString>) -> FsStatus {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_cli(args, &mut out, &mut err);
    let text = String::from_utf8_lossy(if err.is_empty() { &out } else { &err }).trim().to_string();
    match code {
        EXIT_OK => FsStatus::Ok,
        EXIT_USAGE => fail(FsStatus::InvalidInput, text),
        _ => fail(FsStatus::Failed, text),
    }
}

/// Runs a full training job described by a TOML config. `out_dir` may be
/// null to use the directory named in the config.
///
/// # Safety
/// `config` must be NUL-terminated; `out_dir` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fs_train_from_config(config: *const c_char, out_dir: *const c_char) -> FsStatus {
    guard(|| {
        let config = try_status!(path_arg(config, "config"));
        let mut args: Vec<std::ffi::OsString> = vec!["fairsel".into(), "train".into(), "--config".into(), config.into()];
        if !out_dir.is_null() {
            let dir = try_status!(path_arg(out_dir, "out_dir"));
            args.push("--out-dir".into());
            args.push(dir.into());
        }
        cli_status(args)
    })
}

/// Runs the analytical self-checks.
#[no_mangle]
pub extern "C" fn fs_verify(seed: u64) -> FsStatus {
    guard(|| cli_status(vec!["fairsel".into(), "verify".into(), "--seed".into(), seed.to_string().into()]))
}
