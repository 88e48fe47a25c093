//! C ABI for the wssim simulator.
//!
//! Scenarios and reports are opaque handles owned by the caller and
//! released with their `_free` function. Every fallible call returns a
//! [`WssimStatus`]; on failure `wssim_last_error_message` describes the
//! error for the calling thread. Strings returned through `char **` out
//! parameters must be released with `wssim_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use wssim::runner::{self, analysis};
use wssim::trace::{export_json_dag, export_paje};
use wssim::{ScenarioConfig, SimError, SimulationReport};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WssimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Simulation = 4,
    Analysis = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// A parsed and validated scenario.
pub struct WssimScenario(ScenarioConfig);

/// The outcome of one replication.
pub struct WssimReport(SimulationReport);

/// Counters of one run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WssimStats {
    pub makespan: u64,
    pub steal_requests_sent: u64,
    pub steal_requests_total: u64,
    pub steal_success: u64,
    pub steal_fail: u64,
    pub total_work_executed: u64,
    pub merge_work_executed: u64,
    pub tasks_created: u64,
    pub tasks_completed: u64,
    pub t_startup_end: u64,
    pub t_plateau_end: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn status_of(err: &SimError) -> WssimStatus {
    match err {
        SimError::InvalidConfig(_) | SimError::Json(_) | SimError::Io(_) | SimError::Cycle(_) => WssimStatus::InvalidConfig,
        SimError::Analysis(_) => WssimStatus::Analysis,
        _ => WssimStatus::Simulation,
    }
}

/// Runs `f`, recording errors and turning panics into `Panic`.
fn guard(f: impl FnOnce() -> Result<(), (WssimStatus, String)>) -> WssimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            WssimStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("panic inside wssim");
            WssimStatus::Panic
        }
    }
}

fn sim_err(err: SimError) -> (WssimStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(name: &str) -> (WssimStatus, String) {
    (WssimStatus::NullPointer, format!("{name} is null"))
}

unsafe fn write_string(text: String, out: *mut *mut c_char) -> Result<(), (WssimStatus, String)> {
    let c = CString::new(text).map_err(|e| (WssimStatus::Simulation, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next wssim call on the same thread.
#[no_mangle]
pub extern "C" fn wssim_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a JSON scenario. On success `*out` owns a new handle.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wssim_scenario_from_json(json: *const c_char, out: *mut *mut WssimScenario) -> WssimStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (WssimStatus::InvalidUtf8, e.to_string()))?;
        let config = ScenarioConfig::from_json(text).map_err(sim_err)?;
        config.validate().map_err(sim_err)?;
        *out = Box::into_raw(Box::new(WssimScenario(config)));
        Ok(())
    })
}

/// Number of replications of a scenario; 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wssim_scenario_replications(scenario: *const WssimScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.0.replications)
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wssim_scenario_free(scenario: *mut WssimScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs replication `replication` of a scenario. On success `*out` owns
/// a new report.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wssim_run(
    scenario: *const WssimScenario,
    replication: usize,
    out: *mut *mut WssimReport,
) -> WssimStatus {
    guard(|| {
        let scenario = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if replication >= scenario.0.replications {
            return Err((
                WssimStatus::OutOfRange,
                format!("replication {replication} of {}", scenario.0.replications),
            ));
        }
        let report = runner::run_replication(&scenario.0, replication).map_err(sim_err)?;
        *out = Box::into_raw(Box::new(WssimReport(report)));
        Ok(())
    })
}

/// Makespan of a run; 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wssim_report_makespan(report: *const WssimReport) -> u64 {
    report.as_ref().map_or(0, |r| r.0.makespan())
}

/// Copies the counters of a run into `*out`.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wssim_report_stats(report: *const WssimReport, out: *mut WssimStats) -> WssimStatus {
    guard(|| {
        let report = report.as_ref().ok_or_else(|| null("report"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = &report.0.stats;
        *out = WssimStats {
            makespan: s.makespan,
            steal_requests_sent: s.steal_requests_sent,
            steal_requests_total: s.steal_requests_total,
            steal_success: s.steal_success,
            steal_fail: s.steal_fail,
            total_work_executed: s.total_work_executed,
            merge_work_executed: s.merge_work_executed,
            tasks_created: s.tasks_created as u64,
            tasks_completed: s.tasks_completed as u64,
            t_startup_end: s.t_startup_end,
            t_plateau_end: s.t_plateau_end,
        };
        Ok(())
    })
}

/// Paje trace of a run; free `*out` with `wssim_string_free`.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wssim_report_paje(report: *const WssimReport, out: *mut *mut c_char) -> WssimStatus {
    guard(|| {
        let report = report.as_ref().ok_or_else(|| null("report"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_string(export_paje(&report.0.trace), out)
    })
}

/// Executed task graph of a run as JSON; free `*out` with `wssim_string_free`.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wssim_report_json_dag(report: *const WssimReport, out: *mut *mut c_char) -> WssimStatus {
    guard(|| {
        let report = report.as_ref().ok_or_else(|| null("report"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_string(export_json_dag(&report.0.app), out)
    })
}

/// Releases a report. Null is ignored.
///
/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wssim_report_free(report: *mut WssimReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `text` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wssim_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

/// Ratio of the theoretical overhead (constant `gamma`) to the simulated
/// overhead `makespan - W/p`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wssim_overhead_ratio(
    makespan: f64,
    work: u64,
    p: usize,
    latency: u64,
    gamma: f64,
    out: *mut f64,
) -> WssimStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if p == 0 {
            return Err((WssimStatus::OutOfRange, "p must be positive".into()));
        }
        *out = analysis::overhead_ratio(makespan, work, p, latency, gamma, analysis::LogForm::WOverLatency)
            .ok_or_else(|| (WssimStatus::Analysis, "overhead is not positive or latency is zero".to_string()))?;
        Ok(())
    })
}

/// Latency at which the predicted makespan reaches 1.1 W/p for overhead
/// constant `c`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wssim_limit_latency_theoretical(work: u64, p: usize, c: f64, out: *mut f64) -> WssimStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if p == 0 {
            return Err((WssimStatus::OutOfRange, "p must be positive".into()));
        }
        *out = analysis::limit_latency_theoretical(work, p, c).map_err(sim_err)?;
        Ok(())
    })
}
