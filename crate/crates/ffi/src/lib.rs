//! C ABI over the staggered difference-in-differences toolkit.
//!
//! The surface is deliberately small: load or generate a panel into an
//! opaque dataset handle, run one of the estimators against it with a JSON
//! configuration, and read the result back as a JSON document. All strings
//! are NUL-terminated UTF-8. Functions returning a pointer return NULL on
//! failure; the cause is then available from [`attgt_last_error_code`] and
//! [`attgt_last_error_message`], which report the most recent failure on
//! the calling thread.
//!
//! Error codes match the CLI exit codes: 2 invalid configuration, 3 input
//! data problem, 4 estimation failure, 5 incompatible runs. A NULL pointer
//! argument reports code 2.
//!
//! The reference header lives in `include/attgt.h`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use attgt::aggregate::{aggregate_event, aggregate_group, aggregate_overall};
use attgt::bootstrap::{attach_bands, multiplier_bootstrap};
use attgt::design::DesignConfig;
use attgt::dgp::{generate, DgpSpec};
use attgt::diagnostics::{bacon_decompose, twfe_estimate, twfe_weights};
use attgt::error::{Error, Result};
use attgt::gt::att_gt_all;
use attgt::impute::{fit_untreated_twfe, impute_att};
use attgt::panel::{aggregate_cells, load_csv, CsvSchema, PanelDataset};

/// Opaque panel handle. Create with [`attgt_dataset_load_csv`] or
/// [`attgt_dataset_generate`], release with [`attgt_dataset_free`].
pub struct AttgtDataset(PanelDataset);

/// Opaque result handle wrapping one JSON document. Serialize with
/// [`attgt_result_json`], release with [`attgt_result_free`].
pub struct AttgtResult(serde_json::Value);

thread_local! {
    static LAST_ERROR: RefCell<Option<(c_int, CString)>> = const { RefCell::new(None) };
}

fn set_error(code: c_int, message: &str) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some((code, message)));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn record(e: &Error) {
    set_error(c_int::from(e.category()), &e.to_string());
}

/// Runs `body` with panic isolation and converts the outcome into a raw
/// pointer, updating the thread-local error slot either way.
fn guarded<T>(body: impl FnOnce() -> Result<T>) -> *mut T {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(value)) => Box::into_raw(Box::new(value)),
        Ok(Err(e)) => {
            record(&e);
            std::ptr::null_mut()
        }
        Err(_) => {
            set_error(4, "internal panic");
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `ptr` must be NULL or a NUL-terminated string valid for the call.
unsafe fn required_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str> {
    if ptr.is_null() {
        return Err(Error::InvalidConfig(format!("{what} pointer is NULL")));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| Error::InvalidConfig(format!("{what} is not valid UTF-8")))
}

/// Parses `ptr` as JSON into `T`, or falls back to `T::default()` when
/// `ptr` is NULL.
///
/// # Safety
/// As for [`required_str`].
unsafe fn optional_json<T: serde::de::DeserializeOwned + Default>(
    ptr: *const c_char,
    what: &str,
) -> Result<T> {
    if ptr.is_null() {
        return Ok(T::default());
    }
    let text = unsafe { required_str(ptr, what) }?;
    serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("invalid {what}: {e}")))
}

/// # Safety
/// `ds` must be a live handle from this library.
unsafe fn dataset<'a>(ds: *const AttgtDataset) -> Result<&'a PanelDataset> {
    if ds.is_null() {
        return Err(Error::InvalidConfig("dataset pointer is NULL".into()));
    }
    Ok(unsafe { &(*ds).0 })
}

fn json_result(value: Result<serde_json::Value>) -> Result<AttgtResult> {
    value.map(AttgtResult)
}

/// Library version as a static NUL-terminated string. Never NULL, never
/// freed by the caller.
#[no_mangle]
pub extern "C" fn attgt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Error code of the most recent failed call on this thread, or 0.
#[no_mangle]
pub extern "C" fn attgt_last_error_code() -> c_int {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(0, |(code, _)| *code))
}

/// Message of the most recent failed call on this thread, or NULL when no
/// failure is pending. The caller owns the returned string and must
/// release it with [`attgt_string_free`].
#[no_mangle]
pub extern "C" fn attgt_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null_mut(), |(_, msg)| msg.clone().into_raw())
    })
}

/// Releases a string returned by this library. NULL is a no-op.
///
/// # Safety
/// `s` must be NULL or an unreleased string produced by this library.
#[no_mangle]
pub unsafe extern "C" fn attgt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Loads a panel from a CSV file. `schema_json` maps columns (NULL for
/// the default layout: unit, period, first_treat, outcome, weight,
/// cluster). Returns NULL on failure.
///
/// # Safety
/// Both arguments must be NULL or valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn attgt_dataset_load_csv(
    path: *const c_char,
    schema_json: *const c_char,
) -> *mut AttgtDataset {
    guarded(|| {
        let path = unsafe { required_str(path, "path") }?;
        let schema: CsvSchema = unsafe { optional_json(schema_json, "schema") }?;
        let records = load_csv(Path::new(path), &schema)?;
        Ok(AttgtDataset(aggregate_cells(&records)?))
    })
}

/// Generates a synthetic panel from a JSON generator specification.
/// Returns NULL on failure.
///
/// # Safety
/// `spec_json` must be NULL or a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn attgt_dataset_generate(spec_json: *const c_char) -> *mut AttgtDataset {
    guarded(|| {
        let text = unsafe { required_str(spec_json, "generator spec") }?;
        let spec: DgpSpec = serde_json::from_str(text)
            .map_err(|e| Error::InvalidSpec(format!("invalid generator spec: {e}")))?;
        let (ds, _) = generate(&spec)?;
        Ok(AttgtDataset(ds))
    })
}

/// Releases a dataset handle. NULL is a no-op.
///
/// # Safety
/// `ds` must be NULL or an unreleased handle from this library.
#[no_mangle]
pub unsafe extern "C" fn attgt_dataset_free(ds: *mut AttgtDataset) {
    if !ds.is_null() {
        drop(unsafe { Box::from_raw(ds) });
    }
}

/// True-effect summary implied by a generator specification, as a JSON
/// document `{att, group, overall, event}`. The caller owns the returned
/// string. Returns NULL on failure.
///
/// # Safety
/// `spec_json` must be NULL or a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn attgt_truth_json(spec_json: *const c_char) -> *mut c_char {
    clear_error();
    let truth = (|| -> Result<CString> {
        let text = unsafe { required_str(spec_json, "generator spec") }?;
        let spec: DgpSpec = serde_json::from_str(text)
            .map_err(|e| Error::InvalidSpec(format!("invalid generator spec: {e}")))?;
        let (_, truth) = generate(&spec)?;
        let json = serde_json::to_string(&truth)?;
        Ok(CString::new(json).expect("serde_json emits no NUL"))
    })();
    match truth {
        Ok(s) => s.into_raw(),
        Err(e) => {
            record(&e);
            std::ptr::null_mut()
        }
    }
}

fn estimate_document(ds: &PanelDataset, design: &DesignConfig) -> Result<serde_json::Value> {
    let table = att_gt_all(ds, design)?;
    let overall = aggregate_overall(&table)?;
    let by_group = aggregate_group(&table)?;
    let by_event = aggregate_event(&table, design.event_window)?;
    let banded = |agg: &attgt::aggregate::AggregationResult| {
        let band = multiplier_bootstrap(&agg.influence_set(), &design.bootstrap)?;
        attach_bands(agg, &band)
    };
    Ok(serde_json::json!({
        "estimator": "group_time",
        "att_gt": table,
        "overall": banded(&overall)?,
        "by_group": banded(&by_group)?,
        "by_event": banded(&by_event)?,
    }))
}

/// Estimates group-time effects with aggregations and bootstrap bands.
/// `config_json` is a design configuration (NULL for defaults). Returns a
/// result handle, or NULL on failure.
///
/// # Safety
/// `ds` must be a live dataset handle; `config_json` NULL or a valid
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn attgt_estimate(
    ds: *const AttgtDataset,
    config_json: *const c_char,
) -> *mut AttgtResult {
    guarded(|| {
        let ds = unsafe { dataset(ds) }?;
        let design: DesignConfig = unsafe { optional_json(config_json, "design config") }?;
        json_result(estimate_document(ds, &design))
    })
}

/// Pooled two-way fixed-effects benchmark with its implicit cell weights
/// and, when the panel allows it, the timing decomposition. Returns a
/// result handle, or NULL on failure.
///
/// # Safety
/// `ds` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn attgt_diagnose(ds: *const AttgtDataset) -> *mut AttgtResult {
    guarded(|| {
        let ds = unsafe { dataset(ds) }?;
        let twfe = twfe_estimate(ds)?;
        let weights = twfe_weights(ds)?;
        let (bacon, skipped) = match bacon_decompose(ds) {
            Ok(b) => (Some(b), None),
            Err(e @ (Error::UnbalancedPanel(_) | Error::AlwaysTreated { .. })) => {
                (None, Some(e.to_string()))
            }
            Err(e) => return Err(e),
        };
        json_result(Ok(serde_json::json!({
            "twfe": twfe,
            "weights": weights,
            "bacon": bacon,
            "bacon_skipped": skipped,
        })))
    })
}

/// Imputation cross-check: fits untreated two-way effects, imputes
/// per-cell counterfactuals, and reports overall, event, and placebo
/// summaries. `config_json` is a design configuration whose event window
/// and bootstrap settings are used (NULL for defaults). Returns a result
/// handle, or NULL on failure.
///
/// # Safety
/// `ds` must be a live dataset handle; `config_json` NULL or a valid
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn attgt_impute(
    ds: *const AttgtDataset,
    config_json: *const c_char,
) -> *mut AttgtResult {
    guarded(|| {
        let ds = unsafe { dataset(ds) }?;
        let design: DesignConfig = unsafe { optional_json(config_json, "design config") }?;
        let fe = fit_untreated_twfe(ds)?;
        let res = impute_att(ds, &fe, design.event_window, &design.bootstrap)?;
        json_result(Ok(serde_json::json!({
            "fit": fe,
            "overall": res.overall,
            "by_event": res.by_event,
            "placebos": res.placebos,
            "metadata": res.metadata,
        })))
    })
}

/// Serializes a result handle as a JSON document. The caller owns the
/// returned string. Returns NULL on failure.
///
/// # Safety
/// `res` must be a live result handle from this library.
#[no_mangle]
pub unsafe extern "C" fn attgt_result_json(res: *const AttgtResult) -> *mut c_char {
    clear_error();
    if res.is_null() {
        set_error(2, "result pointer is NULL");
        return std::ptr::null_mut();
    }
    let json = serde_json::to_string(unsafe { &(*res).0 }).expect("value serializes");
    CString::new(json).expect("serde_json emits no NUL").into_raw()
}

/// Releases a result handle. NULL is a no-op.
///
/// # Safety
/// `res` must be NULL or an unreleased handle from this library.
#[no_mangle]
pub unsafe extern "C" fn attgt_result_free(res: *mut AttgtResult) {
    if !res.is_null() {
        drop(unsafe { Box::from_raw(res) });
    }
}
