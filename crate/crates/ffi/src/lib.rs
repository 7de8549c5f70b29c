//! C ABI over `volterra-sweep`.
//!
//! Scenarios and trajectories are opaque handles created and released by this library.
//! Every fallible call returns a [`VsStatus`]; the message of the last failure on the
//! calling thread is available through [`vs_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use volterra_sweep::analysis::{check_envelopes, compute_envelopes};
use volterra_sweep::builtins;
use volterra_sweep::cli::gronwall_self_test;
use volterra_sweep::dynamics::Trajectory;
use volterra_sweep::scenario::Scenario;
use volterra_sweep::solver::{solve, GridChoice, Scheme, SolverConfig};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Scenario text failed to parse or validate.
    Parse = 3,
    /// The solver rejected the problem or did not converge.
    Solver = 4,
    /// Caller buffer is too small.
    BufferTooSmall = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// Time-stepping scheme selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VsScheme {
    /// Use the scheme named in the scenario.
    Default = 0,
    CatchingUp = 1,
    FixedPoint = 2,
}

/// Opaque scenario handle.
pub struct VsScenario(Scenario);

/// Opaque trajectory handle.
pub struct VsTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
}

fn guard(f: impl FnOnce() -> Result<(), (VsStatus, String)>) -> VsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            VsStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("panic inside volterra-sweep");
            VsStatus::Panic
        }
    }
}

fn null(what: &str) -> (VsStatus, String) {
    (VsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (VsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (VsStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn out_handle<T>(out: *mut *mut T, value: T) -> Result<(), (VsStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Parses a scenario from TOML text.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vs_scenario_from_toml(source: *const c_char, out: *mut *mut VsScenario) -> VsStatus {
    guard(|| {
        let text = c_str(source, "source")?;
        let scenario = Scenario::parse(text, "<ffi>", Path::new(".")).map_err(|e| (VsStatus::Parse, e.to_string()))?;
        out_handle(out, VsScenario(scenario))
    })
}

/// Loads one of the shipped scenarios by name.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vs_scenario_builtin(name: *const c_char, out: *mut *mut VsScenario) -> VsStatus {
    guard(|| {
        let name = c_str(name, "name")?;
        let scenario = builtins::load(name).map_err(|e| (VsStatus::InvalidArgument, e.to_string()))?;
        out_handle(out, VsScenario(scenario))
    })
}

/// Releases a scenario; null is ignored.
///
/// # Safety
/// `scenario` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vs_scenario_free(scenario: *mut VsScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// State dimension of a scenario.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn vs_scenario_dimension(scenario: *const VsScenario, out: *mut usize) -> VsStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = s.0.spec.dim();
        Ok(())
    })
}

/// Solves a scenario. `steps == 0` keeps the scenario's grid.
///
/// # Safety
/// Pointers must be valid; `out` receives a handle to release with [`vs_trajectory_free`].
#[no_mangle]
pub unsafe extern "C" fn vs_solve(
    scenario: *const VsScenario,
    scheme: VsScheme,
    steps: usize,
    out: *mut *mut VsTrajectory,
) -> VsStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let mut config: SolverConfig = s.0.config.clone();
        match scheme {
            VsScheme::Default => {}
            VsScheme::CatchingUp => config.scheme = Scheme::CatchingUp,
            VsScheme::FixedPoint => config.scheme = Scheme::FixedPoint,
        }
        if steps > 0 {
            config.grid = GridChoice::Uniform(steps);
        }
        let (traj, _) = solve(&s.0.spec, &config).map_err(|e| (VsStatus::Solver, e.to_string()))?;
        out_handle(out, VsTrajectory(traj))
    })
}

/// Releases a trajectory; null is ignored.
///
/// # Safety
/// `traj` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vs_trajectory_free(traj: *mut VsTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of nodes; 0 for a null handle.
///
/// # Safety
/// `traj` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn vs_trajectory_len(traj: *const VsTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.states.len())
}

/// State dimension; 0 for a null handle.
///
/// # Safety
/// `traj` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn vs_trajectory_dim(traj: *const VsTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.dim())
}

/// Copies node `k`: its time into `*t` and its state into `state[0..len)`.
///
/// # Safety
/// `state` must hold `len` doubles; `t` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vs_trajectory_node(
    traj: *const VsTrajectory,
    k: usize,
    t: *mut f64,
    state: *mut f64,
    len: usize,
) -> VsStatus {
    guard(|| {
        let traj = &traj.as_ref().ok_or_else(|| null("trajectory"))?.0;
        if t.is_null() || state.is_null() {
            return Err(null("output pointer"));
        }
        if k >= traj.states.len() {
            return Err((VsStatus::OutOfRange, format!("node {k} of {}", traj.states.len())));
        }
        let x = &traj.states[k];
        if len < x.len() {
            return Err((VsStatus::BufferTooSmall, format!("need {} doubles, got {len}", x.len())));
        }
        *t = traj.times()[k];
        ptr::copy_nonoverlapping(x.as_ptr(), state, x.len());
        Ok(())
    })
}

/// Envelope margins `min(r − ‖x‖)` and `min(θ − ‖d‖)` of a trajectory of the scenario.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn vs_envelope_margins(
    scenario: *const VsScenario,
    traj: *const VsTrajectory,
    r_margin: *mut f64,
    theta_margin: *mut f64,
) -> VsStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let traj = &traj.as_ref().ok_or_else(|| null("trajectory"))?.0;
        if r_margin.is_null() || theta_margin.is_null() {
            return Err(null("output pointer"));
        }
        let env = compute_envelopes(&s.0.spec, &traj.grid);
        let report = check_envelopes(traj, &env).map_err(|e| (VsStatus::InvalidArgument, e.to_string()))?;
        *r_margin = report.r_margin;
        *theta_margin = report.theta_margin;
        Ok(())
    })
}

/// Runs the built-in Gronwall dominance cases; `*passed` is 1 when all pass.
///
/// # Safety
/// `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vs_gronwall_selftest(passed: *mut i32) -> VsStatus {
    guard(|| {
        if passed.is_null() {
            return Err(null("output pointer"));
        }
        let lines = gronwall_self_test(None).map_err(|e| (VsStatus::Solver, e.to_string()))?;
        *passed = i32::from(lines.iter().all(|(ok, _)| *ok));
        Ok(())
    })
}

/// Copies the last error message of this thread (NUL-terminated, truncated to `len`).
/// Returns the full message length excluding the terminator.
///
/// # Safety
/// `buf` must hold `len` bytes, or be null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn vs_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
