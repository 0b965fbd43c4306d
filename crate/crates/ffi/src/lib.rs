//! C ABI for `admmpb`.
//!
//! Conventions:
//! - Every fallible function returns an [`AdmmpbStatus`]; results come back
//!   through out-pointers that are written only on success.
//! - Objects are opaque handles created by `admmpb_*_new`/`_load`/`train`
//!   functions and released with the matching `_free` function.
//! - After a non-OK status, `admmpb_last_error()` returns a message for the
//!   calling thread. The pointer stays valid until the next failing call on
//!   the same thread.
//! - Strings returned by the library are released with `admmpb_string_free`.
//! - Panics never cross the boundary; they map to `ADMMPB_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use admmpb::bench::{evaluate, train_admm_pb, train_cbf_baseline, Bench, ExperimentConfig, IndicatorReport, Method};
use admmpb::io::{load_checkpoint, save_checkpoint, CheckpointHeader};
use admmpb::stable_ops::{ContractiveOperator, ThetaVector};
use admmpb::Error;

/// Result codes of every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmmpbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Io = 4,
    Checkpoint = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Panic = 8,
    Internal = 9,
}

/// Experiment configuration handle.
pub struct AdmmpbConfig {
    inner: ExperimentConfig,
}

/// Trained (or loaded) operator parameters together with the training-loss
/// trace and the operator settings they were trained under.
pub struct AdmmpbModel {
    header: CheckpointHeader,
    theta: ThetaVector,
    loss_trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    omega: Option<f64>,
}

/// Test-bank indicators of one model.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AdmmpbIndicators {
    /// total variation of the training-loss trace
    pub delta_loss: f64,
    pub lq_mean: f64,
    pub ca_mean: f64,
    pub violation: f64,
    pub violation_times_lq: f64,
    pub min_obstacle_distance: f64,
    /// 1 when no test trajectory enters the obstacle, else 0
    pub collision_free: i32,
}

impl From<&IndicatorReport> for AdmmpbIndicators {
    fn from(r: &IndicatorReport) -> Self {
        Self {
            delta_loss: r.delta_loss,
            lq_mean: r.lq_mean,
            ca_mean: r.ca_mean,
            violation: r.violation,
            violation_times_lq: r.violation_times_lq,
            min_obstacle_distance: r.min_obstacle_distance,
            collision_free: i32::from(r.collision_free),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AdmmpbStatus {
    match e {
        Error::InvalidConfig(_) | Error::DimensionMismatch { .. } => AdmmpbStatus::InvalidConfig,
        Error::Io(_) => AdmmpbStatus::Io,
        Error::Checkpoint(_) | Error::Json(_) => AdmmpbStatus::Checkpoint,
        Error::NonFinite { .. }
        | Error::NonFiniteGradient { .. }
        | Error::Diverged { .. }
        | Error::Iteration { .. } => AdmmpbStatus::Numerical,
        _ => AdmmpbStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into a status and recording the
/// message for `admmpb_last_error`.
fn guard(f: impl FnOnce() -> Result<(), (AdmmpbStatus, String)>) -> AdmmpbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AdmmpbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            AdmmpbStatus::Panic
        }
    }
}

fn lib(e: Error) -> (AdmmpbStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (AdmmpbStatus, String) {
    (AdmmpbStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (AdmmpbStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (AdmmpbStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (AdmmpbStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (AdmmpbStatus::InvalidArgument, format!("`{what}` is not valid UTF-8")))
}

/// Message of the last failing call on this thread, or null if none.
#[no_mangle]
pub extern "C" fn admmpb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn admmpb_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn admmpb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a configuration with the built-in defaults.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn admmpb_config_new(out: *mut *mut AdmmpbConfig) -> AdmmpbStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        *out = Box::into_raw(Box::new(AdmmpbConfig {
            inner: ExperimentConfig::default(),
        }));
        Ok(())
    })
}

/// Parses a JSON configuration; missing fields take their defaults.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn admmpb_config_from_json(json: *const c_char, out: *mut *mut AdmmpbConfig) -> AdmmpbStatus {
    guard(|| {
        let text = as_str(json, "json")?;
        let out = as_mut(out, "out")?;
        let inner: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| (AdmmpbStatus::InvalidConfig, e.to_string()))?;
        inner.validate().map_err(lib)?;
        *out = Box::into_raw(Box::new(AdmmpbConfig { inner }));
        Ok(())
    })
}

/// Serializes the configuration to JSON. Free the result with
/// `admmpb_string_free`.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn admmpb_config_to_json(cfg: *const AdmmpbConfig, out: *mut *mut c_char) -> AdmmpbStatus {
    guard(|| {
        let cfg = as_ref(cfg, "cfg")?;
        let out = as_mut(out, "out")?;
        let text = serde_json::to_string_pretty(&cfg.inner).map_err(|e| (AdmmpbStatus::Internal, e.to_string()))?;
        *out = CString::new(text)
            .map_err(|e| (AdmmpbStatus::Internal, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// Applies the reduced desk-scale preset.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn admmpb_config_desk_scale(cfg: *mut AdmmpbConfig) -> AdmmpbStatus {
    guard(|| {
        let cfg = as_mut(cfg, "cfg")?;
        cfg.inner = cfg.inner.clone().desk_scale();
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn admmpb_config_set_seed(cfg: *mut AdmmpbConfig, seed: u64) -> AdmmpbStatus {
    guard(|| {
        as_mut(cfg, "cfg")?.inner.seed = seed;
        Ok(())
    })
}

/// Sets the number of outer ADMM iterations.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn admmpb_config_set_max_iters(cfg: *mut AdmmpbConfig, max_iters: usize) -> AdmmpbStatus {
    guard(|| {
        as_mut(cfg, "cfg")?.inner.admm.max_iters = max_iters;
        Ok(())
    })
}

/// Sets the number of baseline training epochs.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn admmpb_config_set_baseline_epochs(cfg: *mut AdmmpbConfig, epochs: usize) -> AdmmpbStatus {
    guard(|| {
        as_mut(cfg, "cfg")?.inner.baseline.epochs = epochs;
        Ok(())
    })
}

/// Releases a configuration. Null is ignored.
///
/// # Safety
/// `cfg` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn admmpb_config_free(cfg: *mut AdmmpbConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

fn header_for(cfg: &ExperimentConfig) -> CheckpointHeader {
    CheckpointHeader::new(cfg.operator.dims, cfg.operator.kappa, cfg.operator.prescale, cfg.seed)
}

/// Trains with ADMM-PB.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn admmpb_train_admm(cfg: *const AdmmpbConfig, out: *mut *mut AdmmpbModel) -> AdmmpbStatus {
    guard(|| {
        let cfg = as_ref(cfg, "cfg")?;
        let out = as_mut(out, "out")?;
        let bench = Bench::new(cfg.inner.clone()).map_err(lib)?;
        let run = train_admm_pb(&bench, None).map_err(lib)?;
        *out = Box::into_raw(Box::new(AdmmpbModel {
            header: header_for(&cfg.inner),
            theta: run.theta,
            loss_trace: run.loss_trace,
            iterations: run.log.len(),
            converged: run.converged,
            omega: None,
        }));
        Ok(())
    })
}

/// Trains the CBF-penalty baseline with weight `omega`.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn admmpb_train_baseline(
    cfg: *const AdmmpbConfig,
    omega: f64,
    out: *mut *mut AdmmpbModel,
) -> AdmmpbStatus {
    guard(|| {
        let cfg = as_ref(cfg, "cfg")?;
        let out = as_mut(out, "out")?;
        let bench = Bench::new(cfg.inner.clone()).map_err(lib)?;
        let run = train_cbf_baseline(&bench, omega).map_err(lib)?;
        *out = Box::into_raw(Box::new(AdmmpbModel {
            header: header_for(&cfg.inner),
            theta: run.theta,
            iterations: run.loss_trace.len(),
            loss_trace: run.loss_trace,
            converged: false,
            omega: Some(omega),
        }));
        Ok(())
    })
}

/// Evaluates `model` on the test bank of `cfg`.
///
/// # Safety
/// `cfg` and `model` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn admmpb_evaluate(
    cfg: *const AdmmpbConfig,
    model: *const AdmmpbModel,
    out: *mut AdmmpbIndicators,
) -> AdmmpbStatus {
    guard(|| {
        let cfg = as_ref(cfg, "cfg")?;
        let model = as_ref(model, "model")?;
        let out = as_mut(out, "out")?;
        let op = &cfg.inner.operator;
        if model.header.dims != op.dims || model.header.kappa != op.kappa || model.header.prescale != op.prescale {
            return Err((
                AdmmpbStatus::InvalidArgument,
                "model operator settings do not match the configuration".into(),
            ));
        }
        let bench = Bench::new(cfg.inner.clone()).map_err(lib)?;
        let method = Method {
            name: if model.omega.is_some() { "CBF" } else { "ADMM-PB" },
            omega: model.omega,
        };
        let report = evaluate(&bench, method, &model.theta, &model.loss_trace).map_err(lib)?;
        *out = AdmmpbIndicators::from(&report);
        Ok(())
    })
}

/// Writes the model parameters as a checkpoint file.
///
/// # Safety
/// `model` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn admmpb_model_save(model: *const AdmmpbModel, path: *const c_char) -> AdmmpbStatus {
    guard(|| {
        let model = as_ref(model, "model")?;
        let path = as_str(path, "path")?;
        save_checkpoint(Path::new(path), &model.header, &model.theta).map_err(lib)
    })
}

/// Loads a checkpoint. The loaded model has an empty loss trace.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn admmpb_model_load(path: *const c_char, out: *mut *mut AdmmpbModel) -> AdmmpbStatus {
    guard(|| {
        let path = as_str(path, "path")?;
        let out = as_mut(out, "out")?;
        let (header, theta) = load_checkpoint(Path::new(path)).map_err(lib)?;
        *out = Box::into_raw(Box::new(AdmmpbModel {
            header,
            theta,
            loss_trace: Vec::new(),
            iterations: 0,
            converged: false,
            omega: None,
        }));
        Ok(())
    })
}

/// Number of parameters of the model.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn admmpb_model_param_count(model: *const AdmmpbModel, out: *mut usize) -> AdmmpbStatus {
    guard(|| {
        *as_mut(out, "out")? = as_ref(model, "model")?.theta.len();
        Ok(())
    })
}

/// Copies the parameters into `buf`, which must hold at least
/// `admmpb_model_param_count` values.
///
/// # Safety
/// `model` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn admmpb_model_params(model: *const AdmmpbModel, buf: *mut f64, len: usize) -> AdmmpbStatus {
    guard(|| copy_out(as_ref(model, "model")?.theta.as_slice(), buf, len))
}

/// Length of the training-loss trace.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn admmpb_model_trace_len(model: *const AdmmpbModel, out: *mut usize) -> AdmmpbStatus {
    guard(|| {
        *as_mut(out, "out")? = as_ref(model, "model")?.loss_trace.len();
        Ok(())
    })
}

/// Copies the training-loss trace into `buf`.
///
/// # Safety
/// `model` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn admmpb_model_trace(model: *const AdmmpbModel, buf: *mut f64, len: usize) -> AdmmpbStatus {
    guard(|| copy_out(&as_ref(model, "model")?.loss_trace, buf, len))
}

/// Outer iterations (ADMM) or epochs (baseline) run, and whether ADMM met
/// its stopping tolerances (1) or not (0).
///
/// # Safety
/// `model` must be a live handle; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn admmpb_model_progress(
    model: *const AdmmpbModel,
    iterations: *mut usize,
    converged: *mut i32,
) -> AdmmpbStatus {
    guard(|| {
        let model = as_ref(model, "model")?;
        *as_mut(iterations, "iterations")? = model.iterations;
        *as_mut(converged, "converged")? = i32::from(model.converged);
        Ok(())
    })
}

/// A-priori l2 gain bound of the model's operator.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn admmpb_model_gain_bound(model: *const AdmmpbModel, out: *mut f64) -> AdmmpbStatus {
    guard(|| {
        let model = as_ref(model, "model")?;
        let out = as_mut(out, "out")?;
        let op =
            ContractiveOperator::new(model.theta.clone(), model.header.kappa, model.header.prescale).map_err(lib)?;
        *out = op.gain_bound();
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn admmpb_model_free(model: *mut AdmmpbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), (AdmmpbStatus, String)> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len < src.len() {
        return Err((
            AdmmpbStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    std::slice::from_raw_parts_mut(buf, src.len()).copy_from_slice(src);
    Ok(())
}
