//! C ABI over the mimo-noma optimizer.
//!
//! Handles are opaque and owned by the caller once returned; free them with the
//! matching `*_free`. Every fallible call returns an [`MnStatus`] and, on
//! failure, stores a message readable through [`mn_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mimo_noma::network::{build_topology, pair_users, sample_channels, Channels, ClusterPlan, NetworkConfig, UeId};
use mimo_noma::optimizer::{run_path_following, Algorithm, IterationTrace, OptimizerSettings, RunStatus};
use mimo_noma::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Unknown algorithm name, index out of range and similar.
    InvalidArgument = 3,
    /// Rejected configuration, cluster plan or JSON.
    InvalidConfig = 4,
    /// Linear algebra or conic solver failure.
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MnRunStatus {
    Converged = 0,
    IterationCap = 1,
    InitFailed = 2,
    NumericalFailure = 3,
    Stalled = 4,
}

/// One network draw: configuration, channels and cluster plan.
pub struct MnScenario {
    config: NetworkConfig,
    channels: Channels,
    plan: ClusterPlan,
}

/// Outcome of one optimizer run.
pub struct MnResult {
    trace: IterationTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MnStatus {
    match e {
        Error::InvalidConfig(_) | Error::InvalidPlan(_) | Error::Dimension(_) | Error::Json(_) => {
            MnStatus::InvalidConfig
        }
        Error::UnknownMinorant(_) => MnStatus::InvalidArgument,
        Error::NotPositiveDefinite(_) | Error::TrustRegion(_) | Error::Domain(_) | Error::Backend(_) => {
            MnStatus::Numerical
        }
        Error::Io(_) | Error::Csv(_) => MnStatus::Io,
    }
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), (MnStatus, String)>) -> MnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MnStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {message}"));
            MnStatus::Panic
        }
    }
}

fn lib(e: Error) -> (MnStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (MnStatus, String) {
    (MnStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (MnStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| (MnStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (MnStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Draws a topology, channels and a cluster plan from `seed`.
///
/// `config_json` is a network configuration object (missing fields take the
/// defaults); null or `"{}"` gives the default layout.
///
/// # Safety
/// `config_json` must be null or a valid NUL-terminated string; `out` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mn_scenario_new(
    config_json: *const c_char,
    seed: u64,
    cluster_size: usize,
    out: *mut *mut MnScenario,
) -> MnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let config: NetworkConfig = if config_json.is_null() {
            NetworkConfig::default()
        } else {
            serde_json::from_str(text(config_json, "config_json")?).map_err(|e| lib(e.into()))?
        };
        config.validate().map_err(lib)?;
        let topo = build_topology(&config, seed).map_err(lib)?;
        let channels = sample_channels(&topo, &config, seed).map_err(lib)?;
        let plan = pair_users(&topo, &config, cluster_size, seed).map_err(lib)?;
        *out = Box::into_raw(Box::new(MnScenario { config, channels, plan }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or come from [`mn_scenario_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mn_scenario_free(scenario: *mut MnScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Total UEs in the network, or 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mn_scenario_num_ues(scenario: *const MnScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.config.total_users())
}

/// Runs one algorithm (`qp`, `sdp`, `soc`, `comp-qp` or `dpc-qp`) with default
/// settings. An infeasible QoS target is not an error: the result reports
/// [`MnRunStatus::InitFailed`].
///
/// # Safety
/// `scenario` must be a live handle, `algorithm` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mn_optimize(
    scenario: *const MnScenario,
    algorithm: *const c_char,
    out: *mut *mut MnResult,
) -> MnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let s = handle(scenario, "scenario")?;
        let name = text(algorithm, "algorithm")?;
        let algorithm: Algorithm = name.parse().map_err(|e: Error| (MnStatus::InvalidArgument, e.to_string()))?;
        let settings = OptimizerSettings {
            cluster_generalization: s.plan.max_cluster_size() > 2,
            ..OptimizerSettings::for_algorithm(algorithm)
        };
        let trace = run_path_following(&s.channels, &s.plan, &s.config, &settings).map_err(lib)?;
        *out = Box::into_raw(Box::new(MnResult { trace }));
        Ok(())
    })
}

/// # Safety
/// `result` must be null or come from [`mn_optimize`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mn_result_free(result: *mut MnResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `result` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mn_result_status(result: *const MnResult, out: *mut MnRunStatus) -> MnStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = match r.trace.status {
            RunStatus::Converged => MnRunStatus::Converged,
            RunStatus::IterationCap => MnRunStatus::IterationCap,
            RunStatus::InitFailed { .. } => MnRunStatus::InitFailed,
            RunStatus::NumericalFailure => MnRunStatus::NumericalFailure,
            RunStatus::Stalled => MnRunStatus::Stalled,
        };
        Ok(())
    })
}

/// Sum throughput of the final point, bps/Hz.
///
/// # Safety
/// `result` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mn_result_total_bps_hz(result: *const MnResult, out: *mut f64) -> MnStatus {
    guard(|| {
        let r = handle(result, "result")?;
        *out.as_mut().ok_or_else(|| null("out"))? = r.trace.report.total_bps_hz();
        Ok(())
    })
}

/// Path-following iterations after initialization.
///
/// # Safety
/// `result` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mn_result_iterations(result: *const MnResult, out: *mut usize) -> MnStatus {
    guard(|| {
        let r = handle(result, "result")?;
        *out.as_mut().ok_or_else(|| null("out"))? = r.trace.iterations();
        Ok(())
    })
}

/// Final throughput of UE `ue` in cell `cell`, bps/Hz.
///
/// # Safety
/// `result` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mn_result_ue_rate(result: *const MnResult, cell: usize, ue: usize, out: *mut f64) -> MnStatus {
    guard(|| {
        let r = handle(result, "result")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let report = &r.trace.report;
        if cell >= report.n_cells || ue >= report.users_per_cell {
            return Err((
                MnStatus::InvalidArgument,
                format!("UE ({cell}, {ue}) outside {} cells x {} UEs", report.n_cells, report.users_per_cell),
            ));
        }
        *out = report.rate_bps_hz(UeId::new(cell, ue));
        Ok(())
    })
}

/// The full iteration trace as JSON. Release the string with [`mn_string_free`].
///
/// # Safety
/// `result` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mn_result_to_json(result: *const MnResult, out: *mut *mut c_char) -> MnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let r = handle(result, "result")?;
        let json = r.trace.to_json().map_err(lib)?;
        *out = CString::new(json).map_err(|e| (MnStatus::InvalidUtf8, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn mn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
