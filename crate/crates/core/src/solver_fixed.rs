// SPDX-License-Identifier: Apache-2.0

//! Monotonic gate synthesis at a prescribed gate time.
//!
//! Each step integrates the observables `J_σ` backwards under the previous
//! control `ū`, then integrates the states `ρ_σ` forwards under the feedback
//! `u = ū + g·F`, and keeps the closed-loop control as the next `ū`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate_family::{GateFamily, GateMember};
use crate::integrator::{
    integrate_backward_adjoint, integrate_forward_closed_loop, simulate_open_loop, ControlSignal, FeedbackLaw,
    ForwardOptions, ForwardPass, Hold, TimeGrid, Trajectory,
};
use crate::lindblad::LindbladModel;
use crate::metrics::{epsilon_num, gate_infidelity, projected_residual, IterationReport};
use crate::operator_algebra::ComplexMatrix;
use crate::saturation::{ChannelBounds, SaturationPolicy};

/// Steps over which `V(T_f)` must improve by more than [`STAGNATION_TOL`].
pub const STAGNATION_WINDOW: usize = 20;
pub const STAGNATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedTimeConfig {
    pub tf: f64,
    pub gains: Vec<f64>,
    pub max_iters: usize,
    pub infidelity_tol: f64,
    /// Box on the total control, per channel.
    pub u_bounds: Option<ChannelBounds>,
    pub n_sim: usize,
    /// Store `J_σ` every this many nodes and replay in between.
    pub checkpoint_stride: usize,
    pub hold: Hold,
    /// Evaluate the worst case over the full family at the end of the run.
    pub corrected: bool,
}

impl FixedTimeConfig {
    pub fn new(tf: f64, gains: Vec<f64>) -> Self {
        FixedTimeConfig {
            tf,
            gains,
            max_iters: 100,
            infidelity_tol: 0.0,
            u_bounds: None,
            n_sim: crate::integrator::DEFAULT_N_SIM,
            checkpoint_stride: 1,
            hold: Hold::ZeroOrder,
            corrected: true,
        }
    }

    pub fn validate(&self, model: &LindbladModel) -> Result<()> {
        if !(self.tf.is_finite() && self.tf > 0.0) {
            return Err(Error::InvalidArgument(format!("gate time must be > 0, got {}", self.tf)));
        }
        validate_common(model, &self.gains, self.n_sim, self.checkpoint_stride, self.u_bounds.as_ref())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(0.0, self.tf, self.n_sim)
    }
}

pub(crate) fn validate_common(
    model: &LindbladModel,
    gains: &[f64],
    n_sim: usize,
    stride: usize,
    bounds: Option<&ChannelBounds>,
) -> Result<()> {
    if gains.len() != model.n_controls() {
        return Err(Error::InvalidArgument(format!(
            "{} gains for {} control channels",
            gains.len(),
            model.n_controls()
        )));
    }
    if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return Err(Error::InvalidArgument(format!("gains must be finite and > 0, got {g}")));
    }
    if n_sim < 10 {
        return Err(Error::InvalidArgument(format!("need at least 10 steps, got {n_sim}")));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("checkpoint stride must be >= 1".into()));
    }
    if let Some(b) = bounds {
        if b.len() != model.n_controls() {
            return Err(Error::InvalidArgument(format!(
                "bounds for {} channels, model has {}",
                b.len(),
                model.n_controls()
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Infidelity reached the tolerance.
    Converged,
    /// Iteration cap reached.
    IterationCap,
    /// `V(T_f)` stopped improving.
    Stagnated,
}

/// Result of a solver run.
#[derive(Debug, Clone)]
pub struct SolverRun {
    pub control: ControlSignal,
    pub reports: Vec<IterationReport>,
    pub stop: StopReason,
    /// Largest handoff mismatch between consecutive steps.
    pub epsilon_num: f64,
    pub infidelity: f64,
    pub corrected_infidelity: Option<f64>,
    /// Final states of the active members.
    pub rho_finals: Vec<ComplexMatrix>,
    /// Gate time after each step.
    pub tf_history: Vec<f64>,
    /// `Σ_σ trace(Π_φσ L_u(ρ_σ(T_f)))` at the end of the run.
    pub tf_stationarity: f64,
    /// Feedback `F_k(t)` of the last forward pass.
    pub last_feedback: Vec<Vec<f64>>,
}

/// Clamps a control into a box.
pub fn clamp_control(u: &ControlSignal, bounds: &ChannelBounds) -> ControlSignal {
    u.map_values(|k, v| bounds.clamp(k, v))
}

pub(crate) fn backward_all(
    model: &LindbladModel,
    u_bar: &ControlSignal,
    members: &[&GateMember],
    stride: usize,
    hold: Hold,
) -> Result<Vec<Trajectory>> {
    use rayon::prelude::*;
    members
        .par_iter()
        .map(|m| integrate_backward_adjoint(model, u_bar, &m.j_final, stride, hold))
        .collect()
}

/// Worst-case infidelity over every member, evaluating the inactive ones by
/// an open-loop pass under `control`.
pub fn corrected_infidelity(
    model: &LindbladModel,
    family: &GateFamily,
    control: &ControlSignal,
    active_infidelity: f64,
    hold: Hold,
) -> Result<f64> {
    use rayon::prelude::*;
    let inactive = family.inactive();
    let finals: Vec<ComplexMatrix> = inactive
        .par_iter()
        .map(|m| simulate_open_loop(model, control, &m.rho_init, hold))
        .collect::<Result<_>>()?;
    Ok(active_infidelity.max(gate_infidelity(&finals, &inactive)?))
}

/// Bookkeeping shared by the fixed-time and clock solvers.
pub(crate) struct StepTracker {
    pub reports: Vec<IterationReport>,
    prev_v_tf: Option<f64>,
}

impl StepTracker {
    pub fn new() -> Self {
        StepTracker {
            reports: Vec::new(),
            prev_v_tf: None,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        pass: &ForwardPass,
        u_bar: &ControlSignal,
        law: &FeedbackLaw,
        infidelity: f64,
        tf: f64,
        u_l2_change: Option<f64>,
    ) -> &IterationReport {
        let v0 = pass.lyapunov[0];
        let v_tf = *pass.lyapunov.last().unwrap();
        let mut residual = projected_residual(pass.control.channels(), u_bar.channels(), &law.gains);
        if let (Some(clock), Some(g0)) = (&pass.clock, law.clock_gain) {
            let zero = vec![0.0; clock.len()];
            residual = residual.max(projected_residual(std::slice::from_ref(clock), &[zero], &[g0]));
        }
        let report = IterationReport {
            ell: self.reports.len() + 1,
            v0,
            v_tf,
            handoff_err: self.prev_v_tf.map(|p| (p - v0).abs()),
            infidelity,
            corrected_infidelity: None,
            tf,
            stat_residual: residual,
            u_l2_change,
            v_max_rise: pass
                .lyapunov
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::NEG_INFINITY, f64::max),
        };
        log::info!(
            "step {:>4}: V(0) = {:.6e}  V(Tf) = {:.6e}  infidelity = {:.6e}  Tf = {:.5}",
            report.ell,
            report.v0,
            report.v_tf,
            report.infidelity,
            report.tf
        );
        self.prev_v_tf = Some(v_tf);
        self.reports.push(report);
        self.reports.last().unwrap()
    }

    pub fn stop_reason(&self, tol: f64, max_iters: usize) -> Option<StopReason> {
        let last = self.reports.last()?;
        if last.infidelity <= tol {
            return Some(StopReason::Converged);
        }
        if self.reports.len() >= max_iters {
            return Some(StopReason::IterationCap);
        }
        let n = self.reports.len();
        if n > STAGNATION_WINDOW {
            let before = self.reports[n - 1 - STAGNATION_WINDOW].v_tf;
            if before - last.v_tf < STAGNATION_TOL {
                return Some(StopReason::Stagnated);
            }
        }
        None
    }
}

/// Runs the fixed-time algorithm from `seed`. `observer` sees every report
/// as soon as its step completes.
pub fn run(
    model: &LindbladModel,
    family: &GateFamily,
    seed: &ControlSignal,
    cfg: &FixedTimeConfig,
    mut observer: impl FnMut(&IterationReport),
) -> Result<SolverRun> {
    cfg.validate(model)?;
    if family.dim() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "gate dimension {} vs model dimension {}",
            family.dim(),
            model.dim()
        )));
    }
    let grid = cfg.grid()?;
    if *seed.grid() != grid {
        return Err(Error::GridMismatch(format!(
            "seed grid {:?} differs from the configured grid {grid:?}",
            seed.grid()
        )));
    }
    if cfg.max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
    }
    let members = family.active();
    let rho0s: Vec<ComplexMatrix> = members.iter().map(|m| m.rho_init.clone()).collect();
    let saturation = match &cfg.u_bounds {
        Some(b) => SaturationPolicy::Box(b.clone()),
        None => SaturationPolicy::None,
    };
    let law = FeedbackLaw::fixed(cfg.gains.clone(), saturation);
    let opts = ForwardOptions {
        hold: cfg.hold,
        store_rho_stride: None,
    };

    let mut u_bar = match &cfg.u_bounds {
        Some(b) => clamp_control(seed, b),
        None => seed.clone(),
    };
    let mut tracker = StepTracker::new();
    let (stop, pass) = loop {
        let js = backward_all(model, &u_bar, &members, cfg.checkpoint_stride, cfg.hold)?;
        let pass = integrate_forward_closed_loop(model, &u_bar, &js, &rho0s, &law, opts)?;
        drop(js);
        let infidelity = gate_infidelity(&pass.rho_finals, &members)?;
        let change = pass.control.l2_distance(&u_bar)?;
        observer(tracker.record(&pass, &u_bar, &law, infidelity, cfg.tf, Some(change)));
        u_bar = pass.control.clone();
        if let Some(stop) = tracker.stop_reason(cfg.infidelity_tol, cfg.max_iters) {
            break (stop, pass);
        }
    };

    finish(model, family, u_bar, tracker, stop, pass, cfg.corrected, cfg.hold, vec![cfg.tf])
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn finish(
    model: &LindbladModel,
    family: &GateFamily,
    control: ControlSignal,
    mut tracker: StepTracker,
    stop: StopReason,
    pass: ForwardPass,
    corrected: bool,
    hold: Hold,
    tf_history: Vec<f64>,
) -> Result<SolverRun> {
    let members = family.active();
    let infidelity = tracker.reports.last().unwrap().infidelity;
    let corrected_infidelity = if corrected && family.diag_only() {
        Some(corrected_infidelity(model, family, &control, infidelity, hold)?)
    } else {
        None
    };
    tracker.reports.last_mut().unwrap().corrected_infidelity = corrected_infidelity;
    let u_end = control.at_node(control.grid().n_steps());
    let tf_stat = crate::metrics::tf_stationarity(&pass.rho_finals, &members, model, &u_end)?;
    Ok(SolverRun {
        epsilon_num: epsilon_num(&tracker.reports),
        control,
        stop,
        infidelity,
        corrected_infidelity,
        rho_finals: pass.rho_finals,
        tf_history,
        tf_stationarity: tf_stat,
        last_feedback: pass.feedback,
        reports: tracker.reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gate_family::{build_family, GateSpec};
    use crate::operator_algebra::{StateVector, ONE, ZERO};
    use ndarray::array;

    /// Closed qubit, H0 = σz/2, H1 = σx, steer |0⟩ to |1⟩.
    fn qubit() -> (LindbladModel, GateFamily) {
        let h = num_complex::Complex64::new(0.5, 0.0);
        let model = LindbladModel::new(array![[h, ZERO], [ZERO, -h]], vec![array![[ZERO, ONE], [ONE, ZERO]]], vec![])
            .unwrap();
        let spec = GateSpec::new(
            vec![StateVector::basis(2, 0).unwrap()],
            vec![StateVector::basis(2, 1).unwrap()],
        )
        .unwrap();
        (model, build_family(&spec, false).unwrap())
    }

    #[test]
    fn state_transfer_converges() {
        let (model, family) = qubit();
        let mut cfg = FixedTimeConfig::new(4.0, vec![1.0]);
        cfg.n_sim = 200;
        cfg.max_iters = 200;
        cfg.infidelity_tol = 1e-3;
        let seed = ControlSignal::constant(cfg.grid().unwrap(), &[0.1]).unwrap();
        let run = run(&model, &family, &seed, &cfg, |_| {}).unwrap();
        assert_eq!(run.stop, StopReason::Converged);
        assert!(run.infidelity < 1e-3);
        for w in run.reports.windows(2) {
            assert!(w[1].v_tf <= w[0].v_tf + 2.0 * run.epsilon_num + 1e-12);
        }
        assert!(run.epsilon_num < 1e-9, "{}", run.epsilon_num);
    }

    #[test]
    fn tiny_gain_leaves_control_unchanged() {
        let (model, family) = qubit();
        let mut cfg = FixedTimeConfig::new(1.0, vec![1e-300]);
        cfg.n_sim = 50;
        cfg.max_iters = 1;
        let seed = ControlSignal::constant(cfg.grid().unwrap(), &[0.3]).unwrap();
        let run = run(&model, &family, &seed, &cfg, |_| {}).unwrap();
        assert_eq!(run.control, seed);
        assert_eq!(run.stop, StopReason::IterationCap);
        let open = simulate_open_loop(&model, &seed, &family.all()[0].rho_init, Hold::ZeroOrder).unwrap();
        let v_open = 1.0 - crate::metrics::fidelity(&family.all()[0].phi, &open);
        assert!((run.reports[0].v_tf - v_open).abs() < 1e-13);
    }

    #[test]
    fn bounds_hold_and_seed_is_clamped() {
        let (model, family) = qubit();
        let mut cfg = FixedTimeConfig::new(2.0, vec![5.0]);
        cfg.n_sim = 100;
        cfg.max_iters = 5;
        cfg.u_bounds = Some(ChannelBounds::symmetric(&[0.2]).unwrap());
        let seed = ControlSignal::constant(cfg.grid().unwrap(), &[0.5]).unwrap();
        let run = run(&model, &family, &seed, &cfg, |_| {}).unwrap();
        assert!(run.control.channel(0).iter().all(|u| u.abs() <= 0.2));
    }

    #[test]
    fn rejects_bad_configs() {
        let (model, family) = qubit();
        let mut cfg = FixedTimeConfig::new(1.0, vec![0.0]);
        cfg.n_sim = 20;
        let seed = ControlSignal::constant(TimeGrid::new(0.0, 1.0, 20).unwrap(), &[0.0]).unwrap();
        assert!(run(&model, &family, &seed, &cfg, |_| {}).is_err());
        cfg.gains = vec![f64::NAN];
        assert!(run(&model, &family, &seed, &cfg, |_| {}).is_err());
        cfg.gains = vec![1.0];
        cfg.n_sim = 5;
        assert!(run(&model, &family, &seed, &cfg, |_| {}).is_err());
        cfg.n_sim = 30;
        assert!(matches!(run(&model, &family, &seed, &cfg, |_| {}), Err(Error::GridMismatch(_))));
    }
}
