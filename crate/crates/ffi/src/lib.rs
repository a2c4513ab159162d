//! C interface to `cavity-reservoir`.
//!
//! Scenarios and run results live behind opaque handles. Every fallible call
//! returns a [`CrStatus`]; on failure the message is available from
//! [`cr_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cavity_reservoir::cli::{self, RunReport};
use cavity_reservoir::linalg::c;
use cavity_reservoir::metrics;
use cavity_reservoir::scenario::ScenarioConfig;
use cavity_reservoir::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrStatus {
    Ok = 0,
    /// Null pointer, invalid UTF-8 or undersized buffer.
    InvalidArgument = 1,
    /// Bad scenario key, value or preset.
    Config = 2,
    /// Truncation guard, state invariant or convergence failure.
    Numerical = 3,
    Io = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

/// Opaque scenario configuration.
pub struct CrScenario(ScenarioConfig);

/// Opaque result of a completed run.
pub struct CrRun(RunReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> CrStatus {
    match err {
        Error::Io(_) => CrStatus::Io,
        e if e.is_numerical() => CrStatus::Numerical,
        _ => CrStatus::Config,
    }
}

struct Fail(CrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: &str) -> Fail {
    Fail(CrStatus::InvalidArgument, msg.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CrStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside cavity-reservoir".into());
            CrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(&format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| invalid(&format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| invalid(&format!("{what} is null")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn cr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a scenario from a built-in preset (`cat2`, `cat3`, `squeeze`, `banana`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cr_scenario_preset(name: *const c_char, out: *mut *mut CrScenario) -> CrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = ScenarioConfig::preset(str_arg(name, "name")?)?;
        *out = Box::into_raw(Box::new(CrScenario(cfg)));
        Ok(())
    })
}

/// Parses scenario text (`key = value` lines). A `preset` key selects the base.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cr_scenario_parse(text: *const c_char, out: *mut *mut CrScenario) -> CrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = ScenarioConfig::parse(str_arg(text, "text")?, None)?;
        *out = Box::into_raw(Box::new(CrScenario(cfg)));
        Ok(())
    })
}

/// Sets one scenario key, e.g. `reservoir.n_samples` to `50`.
///
/// # Safety
/// `scenario` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn cr_scenario_set(
    scenario: *mut CrScenario,
    key: *const c_char,
    value: *const c_char,
) -> CrStatus {
    guard(|| {
        let sc = out_arg(scenario, "scenario")?;
        let (key, value) = (str_arg(key, "key")?, str_arg(value, "value")?);
        let mut next = sc.0.clone();
        next.apply_all([(key, value)])?;
        sc.0 = next;
        Ok(())
    })
}

/// Scenario as text that `cr_scenario_parse` reads back. Free with
/// `cr_string_free`; null on failure.
///
/// # Safety
/// `scenario` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cr_scenario_to_string(scenario: *const CrScenario) -> *mut c_char {
    match scenario.as_ref() {
        Some(sc) => into_c_string(sc.0.serialize()),
        None => {
            set_error("scenario is null".into());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `scenario` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cr_scenario_free(scenario: *mut CrScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the scenario from the vacuum, including its configured analyses.
/// Nothing is written to disk.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cr_run_execute(scenario: *const CrScenario, out: *mut *mut CrRun) -> CrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let sc = ref_arg(scenario, "scenario")?;
        let report = cli::execute(&sc.0, &[])?;
        *out = Box::into_raw(Box::new(CrRun(report)));
        Ok(())
    })
}

/// Writes metrics, state, Wigner grid and summary files into `dir`.
///
/// # Safety
/// `run` must be a live handle and `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn cr_run_write(run: *const CrRun, dir: *const c_char) -> CrStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        cli::write_artifacts(&run.0, Path::new(str_arg(dir, "dir")?))?;
        Ok(())
    })
}

/// # Safety
/// `run` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cr_run_free(run: *mut CrRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Mean photon number of the final field state; NaN for a null handle.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cr_run_mean_photon(run: *const CrRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.0.n_bar())
}

/// Purity of the final field state; NaN for a null handle.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cr_run_purity(run: *const CrRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.0.purity())
}

/// Fidelity with the fitted cat state; NaN when no fit was requested.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cr_run_fidelity(run: *const CrRun) -> f64 {
    run.as_ref().and_then(|r| r.0.fidelity()).unwrap_or(f64::NAN)
}

/// Squeezing in dB of the final state; NaN when not requested.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cr_run_squeezing_db(run: *const CrRun) -> f64 {
    run.as_ref().and_then(|r| r.0.squeezing.map(|s| s.db)).unwrap_or(f64::NAN)
}

/// Number of atom samples in the run.
///
/// # Safety
/// `run` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cr_run_num_samples(run: *const CrRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.trajectory.records.len() - 1)
}

/// Per-sample history, `len` entries each: `n_bar`, `purity` and `fidelity`
/// (any of them may be null). `len` must equal `cr_run_num_samples + 1`.
///
/// # Safety
/// Non-null buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cr_run_history(
    run: *const CrRun,
    n_bar: *mut f64,
    purity: *mut f64,
    fidelity: *mut f64,
    len: usize,
) -> CrStatus {
    guard(|| {
        let recs = &ref_arg(run, "run")?.0.trajectory.records;
        if len != recs.len() {
            return Err(invalid(&format!("history has {} entries, buffer has {len}", recs.len())));
        }
        for (i, r) in recs.iter().enumerate() {
            for (buf, v) in [(n_bar, r.n_bar), (purity, r.purity), (fidelity, r.fidelity)] {
                if !buf.is_null() {
                    *buf.add(i) = v;
                }
            }
        }
        Ok(())
    })
}

/// Fock-space dimension of the final state.
///
/// # Safety
/// `run` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cr_run_dim(run: *const CrRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.final_state().dim())
}

/// Copies the final density matrix, row-major, into `re` and `im`, each of
/// length `dim * dim`.
///
/// # Safety
/// `re` and `im` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cr_run_density_matrix(run: *const CrRun, re: *mut f64, im: *mut f64, len: usize) -> CrStatus {
    guard(|| {
        let m = ref_arg(run, "run")?.0.final_state().matrix();
        let d = m.nrows();
        if re.is_null() || im.is_null() {
            return Err(invalid("output buffer is null"));
        }
        if len != d * d {
            return Err(invalid(&format!("matrix has {} entries, buffer has {len}", d * d)));
        }
        for i in 0..d {
            for j in 0..d {
                *re.add(i * d + j) = m[(i, j)].re;
                *im.add(i * d + j) = m[(i, j)].im;
            }
        }
        Ok(())
    })
}

/// Wigner function of the final state at phase-space point `x + i p`.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cr_run_wigner_at(run: *const CrRun, x: f64, p: f64, out: *mut f64) -> CrStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let out = out_arg(out, "out")?;
        *out = metrics::wigner_at(run.0.final_state(), c(x, p));
        Ok(())
    })
}

/// Text summary of the run (same content as `summary.txt`). Free with
/// `cr_string_free`; null on failure.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn cr_run_summary(run: *const CrRun) -> *mut c_char {
    match run.as_ref() {
        Some(r) => into_c_string(r.0.summary_text()),
        None => {
            set_error("run is null".into());
            ptr::null_mut()
        }
    }
}
