// SPDX-License-Identifier: Apache-2.0

//! Gate synthesis with a clock control that also optimizes the gate time.
//!
//! Physical time is reparametrized as `dt/dτ = 1 + v₀(τ)`. In virtual time
//! the drift superoperator `L₀` becomes one more control channel, so each
//! step runs the fixed-time sweeps with `m + 1` feedback channels and then
//! maps the result back to a uniform grid over the new gate time
//! `T_f = ∫(1 + v₀) dτ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate_family::GateFamily;
use crate::integrator::{
    integrate_forward_closed_loop, ControlSignal, FeedbackLaw, ForwardOptions, Hold, TimeGrid,
};
use crate::lindblad::LindbladModel;
use crate::metrics::{gate_infidelity, IterationReport};
use crate::operator_algebra::{hs_inner, ComplexMatrix};
use crate::saturation::{ChannelBounds, ClockBounds, SaturationPolicy};
use crate::solver_fixed::{backward_all, clamp_control, finish, validate_common, SolverRun, StepTracker};

/// Default limit on `|v₀|` per step.
pub const DEFAULT_CLOCK_MAX: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockConfig {
    pub tf0: f64,
    /// Gains of the physical channels.
    pub gains: Vec<f64>,
    /// Gain of the clock channel.
    pub clock_gain: f64,
    /// Limit on `|v₀|`, in `(0, 1)`.
    pub clock_max: f64,
    /// Use `A_k = B_k = (1+v₀)·clock_max` for the physical channels.
    pub literal_bounds: bool,
    pub max_iters: usize,
    pub infidelity_tol: f64,
    pub u_bounds: Option<ChannelBounds>,
    pub n_sim: usize,
    pub checkpoint_stride: usize,
    pub hold: Hold,
    pub corrected: bool,
}

impl ClockConfig {
    pub fn new(tf0: f64, gains: Vec<f64>, clock_gain: f64) -> Self {
        ClockConfig {
            tf0,
            gains,
            clock_gain,
            clock_max: DEFAULT_CLOCK_MAX,
            literal_bounds: false,
            max_iters: 200,
            infidelity_tol: 0.0,
            u_bounds: None,
            n_sim: crate::integrator::DEFAULT_N_SIM,
            checkpoint_stride: 1,
            hold: Hold::ZeroOrder,
            corrected: true,
        }
    }

    pub fn validate(&self, model: &LindbladModel) -> Result<()> {
        if !(self.tf0.is_finite() && self.tf0 > 0.0) {
            return Err(Error::InvalidArgument(format!("initial gate time must be > 0, got {}", self.tf0)));
        }
        if !(self.clock_gain.is_finite() && self.clock_gain >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "clock gain must be finite and >= 0, got {}",
                self.clock_gain
            )));
        }
        validate_common(model, &self.gains, self.n_sim, self.checkpoint_stride, self.u_bounds.as_ref())?;
        self.bounds(model.n_controls()).map(|_| ())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(0.0, self.tf0, self.n_sim)
    }

    fn bounds(&self, m: usize) -> Result<ClockBounds> {
        let physical = self.u_bounds.clone().unwrap_or_else(|| ChannelBounds::unbounded(m));
        ClockBounds::new(physical, self.clock_max, self.literal_bounds)
    }
}

/// `F₀ = Σ_σ trace(J_σ L₀(ρ_σ))` with `L₀` the drift superoperator.
pub fn clock_feedback_channel(model: &LindbladModel, js: &[ComplexMatrix], rhos: &[ComplexMatrix]) -> Result<f64> {
    if js.len() != rhos.len() {
        return Err(Error::InvalidArgument(format!(
            "{} observables for {} states",
            js.len(),
            rhos.len()
        )));
    }
    let mut acc = 0.0;
    for (j, rho) in js.iter().zip(rhos) {
        acc += hs_inner(j, &model.apply_drift(rho)?).re;
    }
    Ok(acc)
}

/// Physical time `t(τ_j)` at each virtual node, by the trapezoidal rule.
pub fn physical_times(grid: &TimeGrid, v0: &[f64]) -> Vec<f64> {
    let h = grid.step();
    let mut t = Vec::with_capacity(v0.len());
    t.push(grid.t_start());
    for j in 1..v0.len() {
        let prev = t[j - 1];
        t.push(prev + 0.5 * h * ((1.0 + v0[j - 1]) + (1.0 + v0[j])));
    }
    t
}

/// Maps virtual controls to physical time: `u_k = v_k/(1+v₀)` at `t(τ_j)`,
/// linearly interpolated onto a uniform grid over `[0, t(τ_N)]` with the
/// same number of steps.
pub fn resample_to_physical(virt: &ControlSignal, v0: &[f64]) -> Result<ControlSignal> {
    let grid = virt.grid();
    if v0.len() != grid.n_nodes() {
        return Err(Error::GridMismatch(format!(
            "{} clock samples for {} nodes",
            v0.len(),
            grid.n_nodes()
        )));
    }
    if let Some(j) = v0.iter().position(|v| !(*v > -1.0)) {
        return Err(Error::InvalidArgument(format!("clock value {} at node {j} stops time", v0[j])));
    }
    let t = physical_times(grid, v0);
    let tf = *t.last().unwrap();
    let new_grid = TimeGrid::new(0.0, tf, grid.n_steps())?;
    let mut values = Vec::with_capacity(virt.n_channels());
    for k in 0..virt.n_channels() {
        let u: Vec<f64> = virt.channel(k).iter().zip(v0).map(|(v, a)| v / (1.0 + a)).collect();
        let mut out = Vec::with_capacity(new_grid.n_nodes());
        let mut seg = 0;
        for node in 0..new_grid.n_nodes() {
            let s = new_grid.time(node);
            while seg + 1 < t.len() - 1 && t[seg + 1] < s {
                seg += 1;
            }
            let (t0, t1) = (t[seg], t[seg + 1]);
            let theta = ((s - t0) / (t1 - t0)).clamp(0.0, 1.0);
            out.push((1.0 - theta) * u[seg] + theta * u[seg + 1]);
        }
        values.push(out);
    }
    ControlSignal::new(new_grid, values)
}

/// Runs the clock-control algorithm from `seed` on `[0, T_f⁽⁰⁾]`.
pub fn run_clock(
    model: &LindbladModel,
    family: &GateFamily,
    seed: &ControlSignal,
    cfg: &ClockConfig,
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
    let bounds = cfg.bounds(model.n_controls())?;
    let members = family.active();
    let rho0s: Vec<ComplexMatrix> = members.iter().map(|m| m.rho_init.clone()).collect();
    let law = FeedbackLaw {
        gains: cfg.gains.clone(),
        clock_gain: Some(cfg.clock_gain),
        saturation: SaturationPolicy::ClockAware(bounds.clone()),
    };
    let opts = ForwardOptions {
        hold: cfg.hold,
        store_rho_stride: None,
    };

    let mut u_bar = clamp_control(seed, bounds.physical());
    let mut tf_history = vec![cfg.tf0];
    let mut tracker = StepTracker::new();
    let (stop, pass) = loop {
        let js = backward_all(model, &u_bar, &members, cfg.checkpoint_stride, cfg.hold)?;
        let pass = integrate_forward_closed_loop(model, &u_bar, &js, &rho0s, &law, opts)?;
        drop(js);
        let v0 = pass.clock.as_ref().expect("clock pass");
        let next = clamp_control(&resample_to_physical(&pass.control, v0)?, bounds.physical());
        let tf = next.grid().t_end();
        let infidelity = gate_infidelity(&pass.rho_finals, &members)?;
        let change = l2_change_rescaled(&next, &u_bar);
        observer(tracker.record(&pass, &u_bar, &law, infidelity, tf, Some(change)));
        tf_history.push(tf);
        u_bar = next;
        if let Some(stop) = tracker.stop_reason(cfg.infidelity_tol, cfg.max_iters) {
            break (stop, pass);
        }
    };

    finish(model, family, u_bar, tracker, stop, pass, cfg.corrected, cfg.hold, tf_history)
}

/// L² distance after mapping both controls to the same relative time.
fn l2_change_rescaled(new: &ControlSignal, old: &ControlSignal) -> f64 {
    let g = new.grid();
    let scale = old.grid().duration() / g.duration();
    let h = g.step();
    let n = g.n_nodes();
    let mut acc = 0.0;
    for node in 0..n {
        let w = if node == 0 || node == n - 1 { 0.5 } else { 1.0 };
        let prev = old.at_time(g.time(node) * scale);
        let d2: f64 = new.at_node(node).iter().zip(prev).map(|(a, b)| (a - b).powi(2)).sum();
        acc += w * h * d2;
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gate_family::{build_family, GateSpec};
    use crate::lindblad::test_support::*;
    use crate::operator_algebra::{identity, StateVector, ONE, ZERO};
    use crate::solver_fixed::{run, FixedTimeConfig};
    use ndarray::array;

    #[test]
    fn constant_clock_scales_time() {
        let grid = TimeGrid::new(0.0, 2.0, 100).unwrap();
        let virt = ControlSignal::constant(grid, &[0.3]).unwrap();
        let out = resample_to_physical(&virt, &vec![-0.25; 101]).unwrap();
        assert!((out.grid().t_end() - 1.5).abs() < 1e-14);
        assert!(out.channel(0).iter().all(|u| (u - 0.4).abs() < 1e-14));

        let ramp = ControlSignal::new(grid, vec![grid.times()]).unwrap();
        let out = resample_to_physical(&ramp, &vec![1.0; 101]).unwrap();
        // u(t) = (t/2)/2 on [0, 4]
        for (node, u) in out.channel(0).iter().enumerate() {
            assert!((u - out.grid().time(node) / 4.0).abs() < 1e-12);
        }
        assert!(resample_to_physical(&virt, &vec![-1.0; 101]).is_err());
    }

    #[test]
    fn physical_times_increase() {
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let t = physical_times(&grid, &[0.5, -0.5, 0.0, 0.9, -0.9]);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!((t[4] - 0.25 * (0.5 * 1.5 + 0.5 + 1.0 + 1.9 + 0.5 * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn clock_feedback_vanishes_for_identity_and_dark_states() {
        let mut rng = seeded(11);
        let model = random_model(&mut rng, 4, 1, 2);
        let rho = random_density(&mut rng, 4);
        let f0 = clock_feedback_channel(&model, &[identity(4)], &[rho.clone()]).unwrap();
        assert!(f0.abs() < 1e-12);

        // brute force against the dense drift
        let j = random_hermitian(&mut rng, 4);
        let direct = hs_inner(&j, &model.apply_lindblad(&[0.0], &rho).unwrap()).re;
        let f0 = clock_feedback_channel(&model, &[j], &[rho]).unwrap();
        assert!((f0 - direct).abs() < 1e-12);

        // |0⟩ is dark for decay |0⟩⟨1| with no drift Hamiltonian
        let mut l = ndarray::Array2::zeros((2, 2));
        l[[0, 1]] = ONE;
        let model = LindbladModel::new(ndarray::Array2::zeros((2, 2)), vec![], vec![l]).unwrap();
        let dark = array![[ONE, ZERO], [ZERO, ZERO]];
        let j = random_hermitian(&mut rng, 2);
        assert!(clock_feedback_channel(&model, &[j], &[dark]).unwrap().abs() < 1e-15);
    }

    fn decaying_qubit() -> (LindbladModel, GateFamily) {
        let h = num_complex::Complex64::new(0.5, 0.0);
        let mut l = ndarray::Array2::zeros((2, 2));
        l[[0, 1]] = num_complex::Complex64::new(0.2, 0.0);
        let model = LindbladModel::new(
            array![[h, ZERO], [ZERO, -h]],
            vec![array![[ZERO, ONE], [ONE, ZERO]]],
            vec![l],
        )
        .unwrap();
        let spec = GateSpec::new(
            vec![StateVector::basis(2, 0).unwrap()],
            vec![StateVector::basis(2, 1).unwrap()],
        )
        .unwrap();
        (model, build_family(&spec, false).unwrap())
    }

    #[test]
    fn zero_clock_gain_matches_fixed_time() {
        let (model, family) = decaying_qubit();
        let mut cc = ClockConfig::new(2.0, vec![1.0], 0.0);
        cc.n_sim = 100;
        cc.max_iters = 5;
        cc.u_bounds = Some(ChannelBounds::symmetric(&[2.0]).unwrap());
        let mut fc = FixedTimeConfig::new(2.0, vec![1.0]);
        fc.n_sim = 100;
        fc.max_iters = 5;
        fc.u_bounds = cc.u_bounds.clone();
        let seed = ControlSignal::constant(cc.grid().unwrap(), &[0.3]).unwrap();
        let a = run_clock(&model, &family, &seed, &cc, |_| {}).unwrap();
        let b = run(&model, &family, &seed, &fc, |_| {}).unwrap();
        assert!(a.tf_history.iter().all(|t| (t - 2.0).abs() < 1e-12));
        for (x, y) in a.reports.iter().zip(&b.reports) {
            assert!((x.v_tf - y.v_tf).abs() < 1e-12);
        }
    }

    #[test]
    fn clock_run_is_monotone_and_bounded() {
        let (model, family) = decaying_qubit();
        let mut cc = ClockConfig::new(5.0, vec![1.0], 0.5);
        cc.n_sim = 200;
        cc.max_iters = 15;
        cc.u_bounds = Some(ChannelBounds::symmetric(&[0.6]).unwrap());
        let seed = ControlSignal::constant(cc.grid().unwrap(), &[0.2]).unwrap();
        let run = run_clock(&model, &family, &seed, &cc, |_| {}).unwrap();
        assert!(run.control.channel(0).iter().all(|u| u.abs() <= 0.6));
        assert_eq!(run.tf_history.len(), run.reports.len() + 1);
        for w in run.reports.windows(2) {
            assert!(w[1].v_tf <= w[0].v_tf + 2.0 * run.epsilon_num + 1e-9);
        }
    }
}
