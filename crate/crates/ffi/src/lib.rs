// SPDX-License-Identifier: Apache-2.0

//! C interface to `lyagate`.
//!
//! Every entry point returns a [`LyagateStatus`]; on failure the message is
//! available from [`lyagate_last_error`] on the same thread. Handles are
//! opaque and released with the matching `_free` function. Panics never
//! cross the boundary: they surface as [`LyagateStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use lyagate::config::{Profile, RunConfig, SolverPlan};
use lyagate::gate_family::{build_family, GateSpec};
use lyagate::lindblad::LindbladModel;
use lyagate::models::{adiabatic_level, build_cnot, build_zgate, CnotPreset, ZGatePreset};
use lyagate::saturation::ChannelBounds;
use lyagate::seed::{make_seed, SeedConfig};
use lyagate::solver_clock::{run_clock, ClockConfig};
use lyagate::solver_fixed::{run, FixedTimeConfig, SolverRun, StopReason};
use lyagate::{integrator::ControlSignal, integrator::TimeGrid, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyagateStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    OutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyagateStop {
    Converged = 0,
    IterationCap = 1,
    Stagnated = 2,
}

/// Model together with its logical basis.
pub struct LyagateModel {
    model: LindbladModel,
    spec: GateSpec,
    alpha: f64,
}

/// Finished solver run.
pub struct LyagateRun {
    run: SolverRun,
}

/// Solver settings. Obtain defaults from [`lyagate_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LyagateOptions {
    /// Gate time, or the initial gate time when `clock_gain > 0`.
    pub tf: f64,
    /// Gain shared by all control channels.
    pub gain: f64,
    /// Clock gain; 0 selects the fixed-time solver.
    pub clock_gain: f64,
    pub clock_max: f64,
    /// Symmetric bound on each control; 0 or negative means unbounded.
    pub u_max: f64,
    pub max_iters: usize,
    pub n_sim: usize,
    pub checkpoint_stride: usize,
    pub infidelity_tol: f64,
    /// Seed amplitude relative to the adiabatic level.
    pub seed_relative_amplitude: f64,
    pub seed_harmonics: usize,
    pub rng_seed: u64,
    /// Nonzero to optimize the diagonal members only.
    pub diag_only: i32,
}

/// One step of a run. Absent values are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LyagateReport {
    pub ell: usize,
    pub v0: f64,
    pub v_tf: f64,
    pub handoff_err: f64,
    pub infidelity: f64,
    pub corrected_infidelity: f64,
    pub tf: f64,
    pub stat_residual: f64,
    pub u_l2_change: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LyagateStatus {
    match e {
        Error::Config { .. } => LyagateStatus::Config,
        Error::NonFinite { .. } | Error::Truncation { .. } | Error::NotNormalized { .. } | Error::NotOrthonormal { .. } => {
            LyagateStatus::Numerical
        }
        Error::Io { .. } | Error::Csv(_) | Error::Json(_) | Error::ControlFile { .. } => LyagateStatus::Io,
        Error::ChannelOutOfRange { .. } => LyagateStatus::OutOfRange,
        _ => LyagateStatus::InvalidArgument,
    }
}

struct Fail(LyagateStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LyagateStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LyagateStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            LyagateStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(LyagateStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lyagate_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lyagate_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Z-gate preset. NaN keeps a default; `n_fock = 0` keeps 20 levels.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lyagate_model_zgate(
    alpha: f64,
    n_fock: usize,
    kappa2: f64,
    kappa1: f64,
    out: *mut *mut LyagateModel,
) -> LyagateStatus {
    guard(|| {
        let d = ZGatePreset::default();
        let pick = |v: f64, dv: f64| if v.is_nan() { dv } else { v };
        let preset = ZGatePreset {
            alpha: pick(alpha, d.alpha),
            n_fock: if n_fock == 0 { d.n_fock } else { n_fock },
            kappa2: pick(kappa2, d.kappa2),
            kappa1: pick(kappa1, d.kappa1),
        };
        let (model, spec) = build_zgate(&preset)?;
        let h = Box::new(LyagateModel { model, spec, alpha: preset.alpha });
        write_out(out, Box::into_raw(h), "out")
    })
}

/// CNOT preset. NaN keeps a default; `n_fock = 0` selects the quick
/// truncation of 10 levels per cavity.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lyagate_model_cnot(
    alpha2: f64,
    n_fock: usize,
    g2: f64,
    k2: f64,
    k1: f64,
    out: *mut *mut LyagateModel,
) -> LyagateStatus {
    guard(|| {
        let d = CnotPreset::desk();
        let pick = |v: f64, dv: f64| if v.is_nan() { dv } else { v };
        let preset = CnotPreset {
            alpha2: pick(alpha2, d.alpha2),
            n_fock: if n_fock == 0 { d.n_fock } else { n_fock },
            g2: pick(g2, d.g2),
            k2: pick(k2, d.k2),
            k1: pick(k1, d.k1),
        };
        let (model, spec) = build_cnot(&preset)?;
        let h = Box::new(LyagateModel { model, spec, alpha: preset.alpha() });
        write_out(out, Box::into_raw(h), "out")
    })
}

/// Hilbert-space dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lyagate_model_dim(model: *const LyagateModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.dim())
}

/// Number of logical basis states, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lyagate_model_n_bar(model: *const LyagateModel) -> usize {
    model.as_ref().map_or(0, |m| m.spec.n_bar())
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lyagate_model_free(model: *mut LyagateModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Defaults: unit gain, no clock, 100 steps, 1000 nodes, 1% seed with three
/// harmonics.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lyagate_options_default(tf: f64, out: *mut LyagateOptions) -> LyagateStatus {
    guard(|| {
        let opts = LyagateOptions {
            tf,
            gain: 1.0,
            clock_gain: 0.0,
            clock_max: lyagate::solver_clock::DEFAULT_CLOCK_MAX,
            u_max: 0.0,
            max_iters: 100,
            n_sim: lyagate::integrator::DEFAULT_N_SIM,
            checkpoint_stride: 1,
            infidelity_tol: 0.0,
            seed_relative_amplitude: 0.01,
            seed_harmonics: 3,
            rng_seed: 1,
            diag_only: 0,
        };
        write_out(out, opts, "out")
    })
}

fn solve(h: &LyagateModel, o: &LyagateOptions) -> Result<SolverRun, Error> {
    let m = h.model.n_controls();
    let grid = TimeGrid::new(0.0, o.tf, o.n_sim)?;
    let level = adiabatic_level(o.tf, h.alpha)?;
    let base = ControlSignal::constant(grid, &vec![level; m])?;
    let seed = make_seed(
        &base,
        &SeedConfig {
            amplitude: o.seed_relative_amplitude * level.abs(),
            harmonics: o.seed_harmonics,
            period: o.tf,
            rng_seed: o.rng_seed,
        },
    )?;
    let family = build_family(&h.spec, o.diag_only != 0)?;
    let bounds = if o.u_max > 0.0 {
        Some(ChannelBounds::symmetric(&vec![o.u_max; m])?)
    } else {
        None
    };
    let gains = vec![o.gain; m];
    let quiet = |_: &lyagate::metrics::IterationReport| {};
    if o.clock_gain > 0.0 {
        let mut c = ClockConfig::new(o.tf, gains, o.clock_gain);
        c.clock_max = o.clock_max;
        c.max_iters = o.max_iters;
        c.infidelity_tol = o.infidelity_tol;
        c.u_bounds = bounds;
        c.n_sim = o.n_sim;
        c.checkpoint_stride = o.checkpoint_stride;
        run_clock(&h.model, &family, &seed, &c, quiet)
    } else {
        let mut c = FixedTimeConfig::new(o.tf, gains);
        c.max_iters = o.max_iters;
        c.infidelity_tol = o.infidelity_tol;
        c.u_bounds = bounds;
        c.n_sim = o.n_sim;
        c.checkpoint_stride = o.checkpoint_stride;
        run(&h.model, &family, &seed, &c, quiet)
    }
}

/// Runs the solver from a perturbed adiabatic seed.
///
/// # Safety
/// `model` must be a live handle, `options` readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lyagate_solve(
    model: *const LyagateModel,
    options: *const LyagateOptions,
    out: *mut *mut LyagateRun,
) -> LyagateStatus {
    guard(|| {
        let h = deref(model, "model")?;
        let o = deref(options, "options")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let run = solve(h, o)?;
        write_out(out, Box::into_raw(Box::new(LyagateRun { run })), "out")
    })
}

/// Runs the solver described by a TOML config. `full_profile` nonzero lifts
/// the model size limit.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lyagate_solve_config(
    config_toml: *const c_char,
    full_profile: i32,
    out: *mut *mut LyagateRun,
) -> LyagateStatus {
    guard(|| {
        if config_toml.is_null() {
            return Err(null("config_toml"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(config_toml)
            .to_str()
            .map_err(|e| Fail(LyagateStatus::InvalidArgument, format!("config is not UTF-8: {e}")))?;
        let cfg = RunConfig::from_toml_str(text)?;
        let profile = if full_profile != 0 { Profile::Full } else { Profile::Desk };
        let plan = cfg.plan(profile)?;
        let family = build_family(&plan.spec, cfg.metrics.diag_only)?;
        let quiet = |_: &lyagate::metrics::IterationReport| {};
        let run = match &plan.solver {
            SolverPlan::Fixed(c) => run(&plan.model, &family, &plan.seed, c, quiet)?,
            SolverPlan::Clock(c) => run_clock(&plan.model, &family, &plan.seed, c, quiet)?,
        };
        write_out(out, Box::into_raw(Box::new(LyagateRun { run })), "out")
    })
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lyagate_run_free(run: *mut LyagateRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

unsafe fn run_ref<'a>(run: *const LyagateRun) -> Result<&'a SolverRun, Fail> {
    deref(run, "run").map(|r| &r.run)
}

/// Number of completed steps, or 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lyagate_run_iterations(run: *const LyagateRun) -> usize {
    run.as_ref().map_or(0, |r| r.run.reports.len())
}

/// Final infidelity, final gate time, handoff error and full-family
/// infidelity (NaN when not computed). Any output pointer may be null.
///
/// # Safety
/// `run` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lyagate_run_summary(
    run: *const LyagateRun,
    infidelity: *mut f64,
    corrected_infidelity: *mut f64,
    tf: *mut f64,
    epsilon_num: *mut f64,
    stop: *mut LyagateStop,
) -> LyagateStatus {
    guard(|| {
        let r = run_ref(run)?;
        let put = |p: *mut f64, v: f64| {
            if !p.is_null() {
                p.write(v);
            }
        };
        put(infidelity, r.infidelity);
        put(corrected_infidelity, r.corrected_infidelity.unwrap_or(f64::NAN));
        put(tf, r.control.grid().t_end());
        put(epsilon_num, r.epsilon_num);
        if !stop.is_null() {
            stop.write(match r.stop {
                StopReason::Converged => LyagateStop::Converged,
                StopReason::IterationCap => LyagateStop::IterationCap,
                StopReason::Stagnated => LyagateStop::Stagnated,
            });
        }
        Ok(())
    })
}

/// Report of step `index` (0-based).
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lyagate_run_report(
    run: *const LyagateRun,
    index: usize,
    out: *mut LyagateReport,
) -> LyagateStatus {
    guard(|| {
        let r = run_ref(run)?;
        let r = r.reports.get(index).ok_or_else(|| {
            Fail(
                LyagateStatus::OutOfRange,
                format!("report {index} of {}", r.reports.len()),
            )
        })?;
        let nan = |x: Option<f64>| x.unwrap_or(f64::NAN);
        let rep = LyagateReport {
            ell: r.ell,
            v0: r.v0,
            v_tf: r.v_tf,
            handoff_err: nan(r.handoff_err),
            infidelity: r.infidelity,
            corrected_infidelity: nan(r.corrected_infidelity),
            tf: r.tf,
            stat_residual: r.stat_residual,
            u_l2_change: nan(r.u_l2_change),
        };
        write_out(out, rep, "out")
    })
}

/// Shape of the final control: channels and grid nodes.
///
/// # Safety
/// `run` must be a live handle; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn lyagate_run_control_shape(
    run: *const LyagateRun,
    n_channels: *mut usize,
    n_nodes: *mut usize,
) -> LyagateStatus {
    guard(|| {
        let r = run_ref(run)?;
        write_out(n_channels, r.control.n_channels(), "n_channels")?;
        write_out(n_nodes, r.control.grid().n_nodes(), "n_nodes")
    })
}

/// Copies the node times of the final control into `buf`, which must hold
/// exactly `len` = number of nodes values.
///
/// # Safety
/// `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn lyagate_run_times(run: *const LyagateRun, buf: *mut f64, len: usize) -> LyagateStatus {
    guard(|| {
        let r = run_ref(run)?;
        copy_into(&r.control.grid().times(), buf, len)
    })
}

/// Copies channel `channel` (0-based) of the final control into `buf`.
///
/// # Safety
/// `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn lyagate_run_control(
    run: *const LyagateRun,
    channel: usize,
    buf: *mut f64,
    len: usize,
) -> LyagateStatus {
    guard(|| {
        let r = run_ref(run)?;
        if channel >= r.control.n_channels() {
            return Err(Fail(
                LyagateStatus::OutOfRange,
                format!("channel {channel} of {}", r.control.n_channels()),
            ));
        }
        copy_into(r.control.channel(channel), buf, len)
    })
}

unsafe fn copy_into(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Fail> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len != src.len() {
        return Err(Fail(
            LyagateStatus::InvalidArgument,
            format!("buffer holds {len} values, need {}", src.len()),
        ));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), buf, len);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_are_contained() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, LyagateStatus::Panic);
        let msg = unsafe { CStr::from_ptr(lyagate_last_error()) }.to_str().unwrap();
        assert!(msg.contains("boom"));
    }

    #[test]
    fn error_mapping() {
        assert_eq!(status_of(&Error::InvalidArgument("x".into())), LyagateStatus::InvalidArgument);
        assert_eq!(
            status_of(&Error::ChannelOutOfRange { channel: 2, available: 1 }),
            LyagateStatus::OutOfRange
        );
    }
}
