//! C interface to the simulator.
//!
//! Scenarios and reports are opaque heap objects owned by the caller and
//! released with their `_free` function. Every fallible call returns a
//! [`TwtsimStatus`]; the text of the most recent failure on the calling
//! thread is available from [`twtsim_last_error`]. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use twtsim::harness::{run_scenario, ConfigError, RunReport, ScenarioConfig};
use twtsim::overhead::{control_messages, OverheadQuery, TwtMode};
use twtsim::twt::{decode_element, encode_element, TwtMessage};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwtsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ConfigParse = 3,
    ConfigInvalid = 4,
    Simulation = 5,
    Codec = 6,
    BufferTooSmall = 7,
    InvalidArgument = 8,
    Panic = 9,
}

/// Management-overhead agreement mode.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwtsimOverheadMode {
    IndividualPeriodic = 0,
    IndividualAperiodic = 1,
    BroadcastPeriodic = 2,
    BroadcastAperiodic = 3,
}

/// Scenario configuration handle.
pub struct TwtsimScenario(ScenarioConfig);

/// Finished run handle.
pub struct TwtsimReport(RunReport);

/// Headline figures of a run. `mean_delay_us` is NaN when nothing was
/// delivered after the warm-up.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TwtsimSummary {
    pub mean_delay_us: f64,
    pub mean_queue: f64,
    pub arrival_rate_pps: f64,
    pub throughput_bps: f64,
    pub idle_fraction: f64,
    pub collision_fraction: f64,
    pub delivered: u64,
    pub dropped: u64,
    pub events: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn fail(status: TwtsimStatus, msg: impl Into<String>) -> TwtsimStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting a panic into [`TwtsimStatus::Panic`].
fn guard(f: impl FnOnce() -> TwtsimStatus) -> TwtsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(TwtsimStatus::Panic, msg)
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, TwtsimStatus> {
    if p.is_null() {
        return Err(fail(TwtsimStatus::NullPointer, format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(TwtsimStatus::InvalidUtf8, format!("{name}: {e}")))
}

fn config_status(e: ConfigError) -> TwtsimStatus {
    let status = match e {
        ConfigError::Parse(_) => TwtsimStatus::ConfigParse,
        ConfigError::Invalid(_) | ConfigError::UnknownPreset(_) => TwtsimStatus::ConfigInvalid,
    };
    fail(status, e.to_string())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("NULs removed").into_raw()
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn twtsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn twtsim_status_str(status: TwtsimStatus) -> *const c_char {
    let s: &'static CStr = match status {
        TwtsimStatus::Ok => c"ok",
        TwtsimStatus::NullPointer => c"null pointer",
        TwtsimStatus::InvalidUtf8 => c"invalid UTF-8",
        TwtsimStatus::ConfigParse => c"config parse error",
        TwtsimStatus::ConfigInvalid => c"invalid config",
        TwtsimStatus::Simulation => c"simulation error",
        TwtsimStatus::Codec => c"codec error",
        TwtsimStatus::BufferTooSmall => c"buffer too small",
        TwtsimStatus::InvalidArgument => c"invalid argument",
        TwtsimStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Creates a scenario from a named preset.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn twtsim_scenario_preset(name: *const c_char, out: *mut *mut TwtsimScenario) -> TwtsimStatus {
    guard(|| {
        if out.is_null() {
            return fail(TwtsimStatus::NullPointer, "out is NULL");
        }
        let name = match str_arg(name, "name") {
            Ok(s) => s,
            Err(s) => return s,
        };
        match ScenarioConfig::preset(name) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(TwtsimScenario(c)));
                TwtsimStatus::Ok
            }
            Err(e) => config_status(e),
        }
    })
}

/// Parses a TOML scenario; missing keys take preset values.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn twtsim_scenario_from_toml(
    toml: *const c_char,
    out: *mut *mut TwtsimScenario,
) -> TwtsimStatus {
    guard(|| {
        if out.is_null() {
            return fail(TwtsimStatus::NullPointer, "out is NULL");
        }
        let text = match str_arg(toml, "toml") {
            Ok(s) => s,
            Err(s) => return s,
        };
        match ScenarioConfig::parse(text) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(TwtsimScenario(c)));
                TwtsimStatus::Ok
            }
            Err(e) => config_status(e),
        }
    })
}

/// # Safety
/// `scenario` must come from a `twtsim_scenario_*` constructor or be NULL.
#[no_mangle]
pub unsafe extern "C" fn twtsim_scenario_free(scenario: *mut TwtsimScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `scenario` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn twtsim_scenario_set_seed(scenario: *mut TwtsimScenario, seed: u64) -> TwtsimStatus {
    match scenario.as_mut() {
        Some(s) => {
            s.0.seed = seed;
            TwtsimStatus::Ok
        }
        None => fail(TwtsimStatus::NullPointer, "scenario is NULL"),
    }
}

/// Sets the simulated duration; rejected unless positive and finite.
///
/// # Safety
/// `scenario` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn twtsim_scenario_set_duration(scenario: *mut TwtsimScenario, seconds: f64) -> TwtsimStatus {
    let Some(s) = scenario.as_mut() else {
        return fail(TwtsimStatus::NullPointer, "scenario is NULL");
    };
    if !(seconds > 0.0 && seconds.is_finite()) {
        return fail(TwtsimStatus::InvalidArgument, format!("duration {seconds} s"));
    }
    s.0.duration_s = seconds;
    TwtsimStatus::Ok
}

/// Sets the per-station offered load in Mbit/s.
///
/// # Safety
/// `scenario` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn twtsim_scenario_set_load(scenario: *mut TwtsimScenario, mbps: f64) -> TwtsimStatus {
    let Some(s) = scenario.as_mut() else {
        return fail(TwtsimStatus::NullPointer, "scenario is NULL");
    };
    if !(mbps >= 0.0 && mbps.is_finite()) {
        return fail(TwtsimStatus::InvalidArgument, format!("load {mbps} Mbit/s"));
    }
    s.0.load_mbps = mbps;
    TwtsimStatus::Ok
}

/// Serializes the scenario as TOML. Free the result with
/// [`twtsim_string_free`].
///
/// # Safety
/// `scenario` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn twtsim_scenario_to_toml(scenario: *const TwtsimScenario) -> *mut c_char {
    match scenario.as_ref() {
        Some(s) => into_c_string(s.0.to_toml()),
        None => {
            set_error("scenario is NULL");
            ptr::null_mut()
        }
    }
}

/// Runs one simulation.
///
/// # Safety
/// `scenario` must be a live scenario handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn twtsim_run(scenario: *const TwtsimScenario, out: *mut *mut TwtsimReport) -> TwtsimStatus {
    guard(|| {
        let (Some(s), false) = (scenario.as_ref(), out.is_null()) else {
            return fail(TwtsimStatus::NullPointer, "scenario or out is NULL");
        };
        match run_scenario(&s.0) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(TwtsimReport(r)));
                TwtsimStatus::Ok
            }
            Err(twtsim::harness::SimError::Config(e)) => config_status(e),
            Err(e) => fail(TwtsimStatus::Simulation, e.to_string()),
        }
    })
}

/// # Safety
/// `report` must come from [`twtsim_run`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn twtsim_report_free(report: *mut TwtsimReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be a live report handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn twtsim_report_summary(report: *const TwtsimReport, out: *mut TwtsimSummary) -> TwtsimStatus {
    let (Some(r), Some(out)) = (report.as_ref(), out.as_mut()) else {
        return fail(TwtsimStatus::NullPointer, "report or out is NULL");
    };
    let m = &r.0.metrics;
    *out = TwtsimSummary {
        mean_delay_us: m.mean_delay_us.unwrap_or(f64::NAN),
        mean_queue: m.mean_queue,
        arrival_rate_pps: m.arrival_rate_pps,
        throughput_bps: m.throughput_bps,
        idle_fraction: m.channel.idle_fraction,
        collision_fraction: m.channel.collision_fraction,
        delivered: m.delivered,
        dropped: m.dropped,
        events: r.0.events,
    };
    TwtsimStatus::Ok
}

/// Full report as pretty-printed JSON. Free with [`twtsim_string_free`].
///
/// # Safety
/// `report` must be a live report handle.
#[no_mangle]
pub unsafe extern "C" fn twtsim_report_json(report: *const TwtsimReport) -> *mut c_char {
    match report.as_ref() {
        Some(r) => into_c_string(r.0.to_json()),
        None => {
            set_error("report is NULL");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn twtsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Total management messages over one hour for `n_stations` and
/// `updates_per_hour`.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn twtsim_overhead_messages(
    mode: TwtsimOverheadMode,
    n_stations: u64,
    updates_per_hour: u64,
    out: *mut u64,
) -> TwtsimStatus {
    let Some(out) = out.as_mut() else {
        return fail(TwtsimStatus::NullPointer, "out is NULL");
    };
    let mode = match mode {
        TwtsimOverheadMode::IndividualPeriodic => TwtMode::IP,
        TwtsimOverheadMode::IndividualAperiodic => TwtMode::IA,
        TwtsimOverheadMode::BroadcastPeriodic => TwtMode::BP,
        TwtsimOverheadMode::BroadcastAperiodic => TwtMode::BA,
    };
    *out = control_messages(&OverheadQuery::new(mode, n_stations, updates_per_hour)).total;
    TwtsimStatus::Ok
}

/// Encodes a JSON message into `buf`. `written` receives the element length,
/// also when the buffer is too small.
///
/// # Safety
/// `json` must be a NUL-terminated string, `buf` must have `cap` writable
/// bytes (or be NULL with `cap == 0`) and `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn twtsim_codec_encode_json(
    json: *const c_char,
    buf: *mut u8,
    cap: usize,
    written: *mut usize,
) -> TwtsimStatus {
    guard(|| {
        let Some(written) = written.as_mut() else {
            return fail(TwtsimStatus::NullPointer, "written is NULL");
        };
        let text = match str_arg(json, "json") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let msg: TwtMessage = match serde_json::from_str(text) {
            Ok(m) => m,
            Err(e) => return fail(TwtsimStatus::Codec, format!("message JSON: {e}")),
        };
        let bytes = match encode_element(&msg) {
            Ok(b) => b,
            Err(e) => return fail(TwtsimStatus::Codec, e.to_string()),
        };
        *written = bytes.len();
        if bytes.len() > cap || buf.is_null() {
            return fail(
                TwtsimStatus::BufferTooSmall,
                format!("{} bytes needed, {cap} available", bytes.len()),
            );
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf, bytes.len());
        TwtsimStatus::Ok
    })
}

/// Decodes an element and stores its JSON form in `out`; free it with
/// [`twtsim_string_free`].
///
/// # Safety
/// `bytes` must point to `len` readable bytes and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn twtsim_codec_decode_json(bytes: *const u8, len: usize, out: *mut *mut c_char) -> TwtsimStatus {
    guard(|| {
        if out.is_null() || (bytes.is_null() && len > 0) {
            return fail(TwtsimStatus::NullPointer, "bytes or out is NULL");
        }
        let data = if len == 0 { &[][..] } else { std::slice::from_raw_parts(bytes, len) };
        match decode_element(data) {
            Ok(m) => {
                *out = into_c_string(serde_json::to_string(&m).expect("message serializes"));
                TwtsimStatus::Ok
            }
            Err(e) => fail(TwtsimStatus::Codec, e.to_string()),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> String {
        unsafe { CStr::from_ptr(twtsim_last_error()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn scenario_run_summary() {
        unsafe {
            let mut s = ptr::null_mut();
            assert_eq!(twtsim_scenario_from_toml(c"access = 'dcf'".as_ptr(), &mut s), TwtsimStatus::Ok);
            assert_eq!(twtsim_scenario_set_duration(s, 1.0), TwtsimStatus::Ok);
            assert_eq!(twtsim_scenario_set_load(s, 2.0), TwtsimStatus::Ok);
            let mut r = ptr::null_mut();
            assert_eq!(twtsim_run(s, &mut r), TwtsimStatus::Ok);
            let mut sum = TwtsimSummary::default();
            assert_eq!(twtsim_report_summary(r, &mut sum), TwtsimStatus::Ok);
            assert!(sum.delivered > 0 && sum.mean_delay_us > 0.0);
            let json = twtsim_report_json(r);
            assert!(CStr::from_ptr(json).to_str().unwrap().contains("\"trace_digest\""));
            twtsim_string_free(json);
            twtsim_report_free(r);
            twtsim_scenario_free(s);
        }
    }

    #[test]
    fn config_errors_map_to_codes() {
        unsafe {
            let mut s = ptr::null_mut();
            assert_eq!(twtsim_scenario_from_toml(c"bogus = 1".as_ptr(), &mut s), TwtsimStatus::ConfigParse);
            assert!(last_error().contains("bogus"));
            assert_eq!(
                twtsim_scenario_from_toml(c"duration_s = -2".as_ptr(), &mut s),
                TwtsimStatus::ConfigInvalid
            );
            assert_eq!(twtsim_scenario_preset(c"nope".as_ptr(), &mut s), TwtsimStatus::ConfigInvalid);
            assert!(s.is_null());
            assert_eq!(twtsim_scenario_preset(ptr::null(), &mut s), TwtsimStatus::NullPointer);
            assert_eq!(twtsim_run(ptr::null(), ptr::null_mut()), TwtsimStatus::NullPointer);
        }
    }

    #[test]
    fn setters_validate() {
        unsafe {
            let mut s = ptr::null_mut();
            assert_eq!(twtsim_scenario_preset(c"paper-3.4".as_ptr(), &mut s), TwtsimStatus::Ok);
            assert_eq!(twtsim_scenario_set_duration(s, f64::NAN), TwtsimStatus::InvalidArgument);
            assert_eq!(twtsim_scenario_set_load(s, -1.0), TwtsimStatus::InvalidArgument);
            assert_eq!(twtsim_scenario_set_seed(s, 77), TwtsimStatus::Ok);
            let t = twtsim_scenario_to_toml(s);
            assert!(CStr::from_ptr(t).to_str().unwrap().contains("seed = 77"));
            twtsim_string_free(t);
            twtsim_scenario_free(s);
        }
    }

    #[test]
    fn overhead_cells() {
        let mut v = 0;
        unsafe {
            assert_eq!(
                twtsim_overhead_messages(TwtsimOverheadMode::IndividualAperiodic, 100, 100, &mut v),
                TwtsimStatus::Ok
            );
            assert_eq!(v, 10_200);
            twtsim_overhead_messages(TwtsimOverheadMode::BroadcastAperiodic, 100, 10, &mut v);
            assert_eq!(v, 210);
        }
    }

    #[test]
    fn codec_round_trip_and_errors() {
        let msg = cr#"{"direction":"Response","command":"Reject","agreement_id":3,"params":null,"broadcast":null}"#;
        unsafe {
            let mut n = 0;
            assert_eq!(
                twtsim_codec_encode_json(msg.as_ptr(), ptr::null_mut(), 0, &mut n),
                TwtsimStatus::BufferTooSmall
            );
            let mut buf = vec![0u8; n];
            assert_eq!(twtsim_codec_encode_json(msg.as_ptr(), buf.as_mut_ptr(), n, &mut n), TwtsimStatus::Ok);
            let mut json = ptr::null_mut();
            assert_eq!(twtsim_codec_decode_json(buf.as_ptr(), n, &mut json), TwtsimStatus::Ok);
            let back = CStr::from_ptr(json).to_str().unwrap().to_owned();
            twtsim_string_free(json);
            assert_eq!(back, msg.to_str().unwrap());
            assert_eq!(twtsim_codec_decode_json(buf.as_ptr(), n - 1, &mut json), TwtsimStatus::Codec);
            assert!(!last_error().is_empty());
        }
    }

    #[test]
    fn status_names_are_static() {
        let s = unsafe { CStr::from_ptr(twtsim_status_str(TwtsimStatus::BufferTooSmall)) };
        assert_eq!(s.to_str().unwrap(), "buffer too small");
    }
}
