//! C interface to the triage engine.
//!
//! Every function returns a [`TriageStatus`]. On failure a message is kept
//! per thread and can be read with [`triage_last_error`]. Strings handed out
//! by the library must be released with [`triage_string_free`]; handles with
//! their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use triage_core::classify::Classifier;
use triage_core::driftmon::{pelt_segment, DetectorConfig, OnlineDetector};
use triage_core::explain::{explain, ExplainerConfig};
use triage_core::service::ModelArtifact;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriageStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    BadArtifact = 4,
    AssignmentImpossible = 5,
    InvalidArgument = 6,
    Unsupported = 7,
    BufferTooSmall = 8,
    Panic = 99,
}

/// A loaded model artifact.
pub struct TriageModel {
    artifact: ModelArtifact,
}

/// An online drift detector fed one daily accuracy at a time.
pub struct TriageMonitor {
    detector: OnlineDetector,
}

/// A raised drift alert. Days are 1-based positions in the pushed stream.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TriageAlert {
    pub day: usize,
    pub boundary: usize,
    pub pre_mean: f64,
    pub post_mean: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

type Failure = (TriageStatus, String);

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TriageStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TriageStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TriageStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    (TriageStatus::NullArgument, format!("{name} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        (
            TriageStatus::InvalidUtf8,
            format!("{name} is not valid UTF-8"),
        )
    })
}

fn to_c(s: &str) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("nul bytes removed")
        .into_raw()
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn triage_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn triage_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads an artifact file written by `triage train`.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn triage_model_load(
    path: *const c_char,
    out: *mut *mut TriageModel,
) -> TriageStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let artifact = ModelArtifact::load(path).map_err(|e| {
            let status = match e {
                triage_core::service::ArtifactError::Io { .. } => TriageStatus::Io,
                _ => TriageStatus::BadArtifact,
            };
            (status, e.to_string())
        })?;
        *out = Box::into_raw(Box::new(TriageModel { artifact }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`triage_model_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn triage_model_free(model: *mut TriageModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of teams the model can assign; 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn triage_model_class_count(model: *const TriageModel) -> usize {
    model.as_ref().map_or(0, |m| m.artifact.classes().len())
}

/// Predicts the team for a report. `*team_out` receives a string to free
/// with [`triage_string_free`].
///
/// # Safety
/// Pointers must be valid; text arguments nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn triage_model_predict(
    model: *const TriageModel,
    summary: *const c_char,
    description: *const c_char,
    team_out: *mut *mut c_char,
) -> TriageStatus {
    guard(|| {
        if team_out.is_null() {
            return Err(null("team_out"));
        }
        *team_out = ptr::null_mut();
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let art = &m.artifact;
        let x = art.pipeline.vectorize_tokens(&art.pipeline.tokens(
            str_arg(summary, "summary")?,
            str_arg(description, "description")?,
        ));
        if x.is_empty() {
            return Err((
                TriageStatus::AssignmentImpossible,
                "the report has no known terms".into(),
            ));
        }
        *team_out = to_c(art.model.predict(&x).as_str());
        Ok(())
    })
}

/// Explains the predicted team as a JSON object with `k` terms.
///
/// # Safety
/// Pointers must be valid; text arguments nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn triage_model_explain_json(
    model: *const TriageModel,
    report_id: *const c_char,
    summary: *const c_char,
    description: *const c_char,
    k: usize,
    seed: u64,
    json_out: *mut *mut c_char,
) -> TriageStatus {
    guard(|| {
        if json_out.is_null() {
            return Err(null("json_out"));
        }
        *json_out = ptr::null_mut();
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let art = &m.artifact;
        let tokens = art.pipeline.tokens(
            str_arg(summary, "summary")?,
            str_arg(description, "description")?,
        );
        let cfg = ExplainerConfig {
            k,
            seed,
            ..ExplainerConfig::default()
        };
        let e = explain(
            str_arg(report_id, "report_id")?,
            &tokens,
            &art.model,
            &art.pipeline,
            &cfg,
        )
        .map_err(|e| {
            let status = match e {
                triage_core::explain::ExplainError::NothingToExplain => {
                    TriageStatus::AssignmentImpossible
                }
                triage_core::explain::ExplainError::Unsupported(_) => TriageStatus::Unsupported,
                _ => TriageStatus::InvalidArgument,
            };
            (status, e.to_string())
        })?;
        *json_out = to_c(&e.to_json());
        Ok(())
    })
}

/// Creates a drift monitor. Pass `penalty < 0` or zero sizes to take the
/// defaults.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn triage_monitor_new(
    penalty: f64,
    min_segment: usize,
    min_history: usize,
    out: *mut *mut TriageMonitor,
) -> TriageStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let d = DetectorConfig::default();
        let cfg = DetectorConfig {
            penalty: if penalty < 0.0 { d.penalty } else { penalty },
            min_segment: if min_segment == 0 {
                d.min_segment
            } else {
                min_segment
            },
            min_history: if min_history == 0 {
                d.min_history
            } else {
                min_history
            },
        };
        let detector =
            OnlineDetector::new(cfg).map_err(|e| (TriageStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(TriageMonitor { detector }));
        Ok(())
    })
}

/// # Safety
/// `monitor` must come from [`triage_monitor_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn triage_monitor_free(monitor: *mut TriageMonitor) {
    if !monitor.is_null() {
        drop(Box::from_raw(monitor));
    }
}

/// Appends one day's accuracy. `*raised` is set when this push raises the
/// alert, which happens at most once per monitor; `alert` may be null.
///
/// # Safety
/// `monitor` must be a live handle; `raised` writable; `alert` writable or null.
#[no_mangle]
pub unsafe extern "C" fn triage_monitor_push(
    monitor: *mut TriageMonitor,
    accuracy: f64,
    raised: *mut bool,
    alert: *mut TriageAlert,
) -> TriageStatus {
    guard(|| {
        if raised.is_null() {
            return Err(null("raised"));
        }
        let m = monitor.as_mut().ok_or_else(|| null("monitor"))?;
        if !accuracy.is_finite() {
            return Err((
                TriageStatus::InvalidArgument,
                "accuracy must be finite".into(),
            ));
        }
        let fired = m.detector.push(accuracy);
        *raised = fired.is_some();
        if let (Some(a), Some(slot)) = (fired, alert.as_mut()) {
            *slot = TriageAlert {
                day: a.day,
                boundary: a.boundary,
                pre_mean: a.pre_mean,
                post_mean: a.post_mean,
            };
        }
        Ok(())
    })
}

/// Offline change-point segmentation. Writes up to `capacity` boundary
/// indices (0-based start of each new segment) and the total count to
/// `*count`; returns `BufferTooSmall` if they did not all fit.
///
/// # Safety
/// `series` must point to `len` doubles; `out` to `capacity` slots (may be
/// null when `capacity` is 0); `count` writable.
#[no_mangle]
pub unsafe extern "C" fn triage_pelt_segment(
    series: *const f64,
    len: usize,
    penalty: f64,
    min_segment: usize,
    out: *mut usize,
    capacity: usize,
    count: *mut usize,
) -> TriageStatus {
    guard(|| {
        if count.is_null() {
            return Err(null("count"));
        }
        if series.is_null() && len > 0 {
            return Err(null("series"));
        }
        if out.is_null() && capacity > 0 {
            return Err(null("out"));
        }
        let data = if len == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(series, len)
        };
        let res = pelt_segment(data, penalty, min_segment)
            .map_err(|e| (TriageStatus::InvalidArgument, e.to_string()))?;
        *count = res.change_points.len();
        for (i, &cp) in res.change_points.iter().take(capacity).enumerate() {
            *out.add(i) = cp;
        }
        if res.change_points.len() > capacity {
            return Err((
                TriageStatus::BufferTooSmall,
                format!("{} boundaries", res.change_points.len()),
            ));
        }
        Ok(())
    })
}
