//! C ABI for the workbench: build a problem from a JSON configuration,
//! query its structural verdict, and time-integrate it in memory.
//!
//! Conventions:
//! - Functions return `ME_OK` (0) on success, `ME_ERR_VALIDATION` (1) when a
//!   model fails its structural checks, `ME_ERR_CONFIG` (2) for malformed
//!   configurations, `ME_ERR_SOLVER` (3) for linear-solver failures, and
//!   `ME_ERR_NULL` (-1) when a required pointer is null.
//! - After any non-zero return, `me_last_error_message` yields a
//!   NUL-terminated description, valid on the calling thread until the next
//!   failing call on that thread.
//! - `me_problem` is an opaque handle; release it with `me_problem_free`.

#![allow(non_camel_case_types)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};

use microelast::cli::{build_problem, exit_code};
use microelast::config::RunConfig;
use microelast::evolution::{
    self, CausalityTracker, EnergyTracker, EvoProblem, Observer, DEFAULT_SOLVE_TOL,
};

pub const ME_OK: i32 = 0;
pub const ME_ERR_VALIDATION: i32 = 1;
pub const ME_ERR_CONFIG: i32 = 2;
pub const ME_ERR_SOLVER: i32 = 3;
pub const ME_ERR_NULL: i32 = -1;

/// Opaque problem handle.
#[repr(C)]
pub struct me_problem {
    _private: [u8; 0],
}

/// Scalar outcome of one in-memory integration.
#[repr(C)]
pub struct me_run_summary {
    /// Completed time steps.
    pub steps: u64,
    /// Assembled state dimension.
    pub dim: u64,
    /// Total energy at the initial time.
    pub e_initial: f64,
    /// Total energy at the final time.
    pub e_final: f64,
    /// Work integral accumulated over the run.
    pub work_integral: f64,
    /// |E(T) - E(0) - W| at the final time.
    pub balance_residual: f64,
    /// Largest per-step energy-balance defect.
    pub max_balance_residual: f64,
    /// Largest state magnitude seen strictly before the forcing onset.
    pub pre_onset_max_abs: f64,
    /// 1 when every pre-onset state was bitwise zero, else 0.
    pub exactly_zero_before_onset: i32,
}

struct ProblemState {
    cfg: RunConfig,
    problem: EvoProblem,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> =
        RefCell::new(CString::new("").expect("empty string has no NUL"));
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).expect("NUL bytes removed");
    });
}

fn fail(e: &microelast::Error) -> i32 {
    set_error(&e.to_string());
    exit_code(e)
}

fn null_arg(what: &str) -> i32 {
    set_error(&format!("{what} must not be null"));
    ME_ERR_NULL
}

unsafe fn state_ref<'a>(p: *const me_problem) -> Option<&'a ProblemState> {
    (p as *const ProblemState).as_ref()
}

/// Latest error description for the calling thread (never null). The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn me_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn me_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds a problem from a JSON run configuration (same schema as the CLI;
/// unknown keys are rejected).
///
/// # Safety
/// `config_json` must point to a NUL-terminated UTF-8 string and `out` to a
/// writable handle slot; both must stay valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn me_problem_from_config_json(
    config_json: *const c_char,
    out: *mut *mut me_problem,
) -> i32 {
    if out.is_null() {
        return null_arg("out");
    }
    *out = std::ptr::null_mut();
    if config_json.is_null() {
        return null_arg("config_json");
    }
    let text = match std::ffi::CStr::from_ptr(config_json).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("config_json is not valid UTF-8");
            return ME_ERR_CONFIG;
        }
    };
    let cfg = match RunConfig::from_json(text) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let problem = match build_problem(&cfg) {
        Ok(p) => p,
        Err(e) => return fail(&e),
    };
    let boxed = Box::new(ProblemState { cfg, problem });
    *out = Box::into_raw(boxed) as *mut me_problem;
    ME_OK
}

/// Releases a handle obtained from `me_problem_from_config_json`. A null
/// handle is ignored.
///
/// # Safety
/// `p` must be a handle returned by this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn me_problem_free(p: *mut me_problem) {
    if !p.is_null() {
        drop(Box::from_raw(p as *mut ProblemState));
    }
}

/// Assembled state dimension, or -1 for a null handle.
///
/// # Safety
/// `p` must be a live handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn me_problem_dim(p: *const me_problem) -> i64 {
    match state_ref(p) {
        Some(s) => s.problem.dim() as i64,
        None => {
            null_arg("problem");
            -1
        }
    }
}

/// Structural verdict: `ME_OK` when the model satisfies the selfadjointness
/// and positivity conditions, `ME_ERR_VALIDATION` (with a reason available
/// via `me_last_error_message`) otherwise.
///
/// # Safety
/// `p` must be a live handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn me_problem_validate(p: *const me_problem) -> i32 {
    let Some(s) = state_ref(p) else {
        return null_arg("problem");
    };
    match &s.problem.validity {
        microelast::material::Validity::Valid { .. } => ME_OK,
        microelast::material::Validity::Invalid { reason } => {
            set_error(reason);
            ME_ERR_VALIDATION
        }
    }
}

/// Integrates the problem from rest over the configured horizon and fills
/// `summary`. When `u_out` (or `v_out`) is non-null it receives the final
/// state (or its running antiderivative); `state_capacity` must then be at
/// least the problem dimension. Invalid models are integrated anyway; gate
/// on `me_problem_validate` first if that matters.
///
/// # Safety
/// `p` must be a live handle; `summary` must point to a writable
/// `me_run_summary`; `u_out`/`v_out` must be null or point to at least
/// `state_capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn me_problem_run(
    p: *const me_problem,
    summary: *mut me_run_summary,
    u_out: *mut f64,
    v_out: *mut f64,
    state_capacity: usize,
) -> i32 {
    let Some(s) = state_ref(p) else {
        return null_arg("problem");
    };
    if summary.is_null() {
        return null_arg("summary");
    }
    let n = s.problem.dim();
    if (!u_out.is_null() || !v_out.is_null()) && state_capacity < n {
        set_error(&format!(
            "state_capacity {state_capacity} is below the problem dimension {n}"
        ));
        return ME_ERR_CONFIG;
    }
    let sys = s.problem.system();
    let steps = s.cfg.steps();
    let onset = s.cfg.forcing.as_ref().map(|f| f.onset()).unwrap_or(f64::INFINITY);
    let mut energy = EnergyTracker::new(s.cfg.scheme, s.cfg.dt);
    let mut causality = CausalityTracker::new(onset);
    let run = {
        let mut forcing = s.problem.forcing.as_fn();
        let mut observers: Vec<&mut dyn Observer> = vec![&mut energy, &mut causality];
        evolution::run_with(
            &sys,
            s.problem.grid.nodes(),
            s.cfg.scheme,
            s.cfg.dt,
            steps,
            0.0,
            vec![0.0; n],
            vec![0.0; n],
            DEFAULT_SOLVE_TOL,
            &mut forcing,
            &mut observers,
        )
    };
    let (u, v) = match run {
        Ok(uv) => uv,
        Err(e) => return fail(&e),
    };
    let first = energy.rows.first().expect("initial row always present");
    let last = energy.rows.last().expect("initial row always present");
    *summary = me_run_summary {
        steps: steps as u64,
        dim: n as u64,
        e_initial: first.e_total,
        e_final: last.e_total,
        work_integral: last.work_integral,
        balance_residual: last.residual,
        max_balance_residual: energy.rows.iter().map(|r| r.residual).fold(0.0, f64::max),
        pre_onset_max_abs: causality.pre_onset_max_abs,
        exactly_zero_before_onset: i32::from(causality.exactly_zero),
    };
    if !u_out.is_null() {
        std::ptr::copy_nonoverlapping(u.as_ptr(), u_out, n);
    }
    if !v_out.is_null() {
        std::ptr::copy_nonoverlapping(v.as_ptr(), v_out, n);
    }
    ME_OK
}
