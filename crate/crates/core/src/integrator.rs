// SPDX-License-Identifier: Apache-2.0

//! Fixed-step RK4 for matrix ODEs and the two sweeps of one algorithm step:
//! the backward adjoint sweep that stores `J_σ(t)` and the forward closed-loop
//! sweep that integrates `ρ_σ(t)` while computing the feedback.
//!
//! Controls are held piecewise constant on each grid interval at the value of
//! its left node ([`Hold::ZeroOrder`]). Both sweeps use the same hold, so a
//! backward RK4 step is the exact Hilbert–Schmidt adjoint of the forward step
//! and `trace(J_σ ρ_σ)` is carried across sweeps up to rounding.
//! [`Hold::Linear`] interpolates controls and stored observables at the
//! interior stages instead and re-evaluates the feedback there.

use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::LindbladModel;
use crate::operator_algebra::{all_finite, hermitize, hs_inner, trace, ComplexMatrix};
use crate::saturation::{saturate_clock_aware, SaturationPolicy};

/// Default number of RK4 steps per sweep.
pub const DEFAULT_N_SIM: usize = 1000;

/// Uniform grid `t_k = t_start + k·h`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
            return Err(Error::InvalidArgument(format!(
                "time grid needs t_end > t_start, got [{t_start}, {t_end}]"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidArgument("time grid needs at least one step".into()));
        }
        Ok(TimeGrid {
            t_start,
            t_end,
            n_steps,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn time(&self, node: usize) -> f64 {
        if node == self.n_steps {
            self.t_end
        } else {
            self.t_start + node as f64 * self.step()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|k| self.time(k)).collect()
    }
}

/// How controls and stored observables are evaluated inside an RK4 step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hold {
    /// Left-node value over the whole interval.
    #[default]
    ZeroOrder,
    /// Linear interpolation between the interval's nodes.
    Linear,
}

/// Multi-channel control sampled at the nodes of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    grid: TimeGrid,
    /// `values[channel][node]`
    values: Vec<Vec<f64>>,
}

impl ControlSignal {
    pub fn new(grid: TimeGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        for (k, ch) in values.iter().enumerate() {
            if ch.len() != grid.n_nodes() {
                return Err(Error::GridMismatch(format!(
                    "channel {k} has {} samples, grid has {} nodes",
                    ch.len(),
                    grid.n_nodes()
                )));
            }
            if let Some(node) = ch.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    step: node,
                    time: grid.time(node),
                    context: format!("control channel {k}"),
                });
            }
        }
        Ok(ControlSignal { grid, values })
    }

    pub fn constant(grid: TimeGrid, levels: &[f64]) -> Result<Self> {
        Self::new(grid, levels.iter().map(|&v| vec![v; grid.n_nodes()]).collect())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_channels(&self) -> usize {
        self.values.len()
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn value(&self, channel: usize, node: usize) -> f64 {
        self.values[channel][node]
    }

    pub fn at_node(&self, node: usize) -> Vec<f64> {
        self.values.iter().map(|ch| ch[node]).collect()
    }

    /// Control used inside step `node → node+1` at relative position `theta ∈ [0,1]`.
    pub fn in_step(&self, node: usize, theta: f64, hold: Hold) -> Vec<f64> {
        match hold {
            Hold::ZeroOrder => self.at_node(node),
            Hold::Linear => self
                .values
                .iter()
                .map(|ch| {
                    let next = ch[(node + 1).min(ch.len() - 1)];
                    (1.0 - theta) * ch[node] + theta * next
                })
                .collect(),
        }
    }

    /// Linear interpolation at an arbitrary time, clamped to the grid ends.
    pub fn at_time(&self, t: f64) -> Vec<f64> {
        let h = self.grid.step();
        let x = ((t - self.grid.t_start) / h).clamp(0.0, self.grid.n_steps as f64);
        let k = (x.floor() as usize).min(self.grid.n_steps - 1);
        let theta = x - k as f64;
        self.values
            .iter()
            .map(|ch| (1.0 - theta) * ch[k] + theta * ch[k + 1])
            .collect()
    }

    /// Trapezoidal integral of each channel.
    pub fn integrals(&self) -> Vec<f64> {
        let h = self.grid.step();
        self.values
            .iter()
            .map(|ch| {
                let inner: f64 = ch[1..ch.len() - 1].iter().sum();
                h * (inner + 0.5 * (ch[0] + ch[ch.len() - 1]))
            })
            .collect()
    }

    /// `sqrt(∫ Σ_k (self_k − other_k)² dt)` by the trapezoidal rule.
    pub fn l2_distance(&self, other: &ControlSignal) -> Result<f64> {
        if self.grid != other.grid || self.n_channels() != other.n_channels() {
            return Err(Error::GridMismatch("control signals differ in shape".into()));
        }
        let h = self.grid.step();
        let n = self.grid.n_nodes();
        let mut acc = 0.0;
        for node in 0..n {
            let w = if node == 0 || node == n - 1 { 0.5 } else { 1.0 };
            let d2: f64 = (0..self.n_channels())
                .map(|k| (self.values[k][node] - other.values[k][node]).powi(2))
                .sum();
            acc += w * h * d2;
        }
        Ok(acc.sqrt())
    }

    pub fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> ControlSignal {
        ControlSignal {
            grid: self.grid,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(k, ch)| ch.iter().map(|&v| f(k, v)).collect())
                .collect(),
        }
    }
}

/// Matrices sampled on a grid, either at every node (`stride = 1`) or at
/// checkpoints `0, c, 2c, …` plus the final node.
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: TimeGrid,
    stride: usize,
    nodes: Vec<usize>,
    samples: Vec<ComplexMatrix>,
}

/// Nodes stored for a given stride.
pub fn checkpoint_nodes(grid: &TimeGrid, stride: usize) -> Vec<usize> {
    let n = grid.n_steps();
    let mut nodes: Vec<usize> = (0..=n).step_by(stride).collect();
    if *nodes.last().unwrap() != n {
        nodes.push(n);
    }
    nodes
}

impl Trajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn is_dense(&self) -> bool {
        self.stride == 1
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn samples(&self) -> &[ComplexMatrix] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample stored at `node`, if any.
    pub fn sample(&self, node: usize) -> Option<&ComplexMatrix> {
        if self.stride == 1 {
            return self.samples.get(node);
        }
        self.nodes.binary_search(&node).ok().map(|i| &self.samples[i])
    }

    pub fn first(&self) -> &ComplexMatrix {
        &self.samples[0]
    }

    pub fn last(&self) -> &ComplexMatrix {
        self.samples.last().unwrap()
    }

    /// CSV dump: node, time, real and imaginary parts of the selected entries,
    /// and the real part of the trace.
    pub fn write_csv<W: Write>(&self, writer: W, entries: &[(usize, usize)]) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["node".to_string(), "time".to_string()];
        for (i, j) in entries {
            header.push(format!("re_{i}_{j}"));
            header.push(format!("im_{i}_{j}"));
        }
        header.push("trace".into());
        w.write_record(&header)?;
        for (node, m) in self.nodes.iter().zip(&self.samples) {
            let mut row = vec![node.to_string(), format!("{}", self.grid.time(*node))];
            for &(i, j) in entries {
                row.push(format!("{}", m[[i, j]].re));
                row.push(format!("{}", m[[i, j]].im));
            }
            row.push(format!("{}", trace(m).re));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<trajectory>", e))?;
        Ok(())
    }
}

/// One classical RK4 step of `dX/dt = f(t, X)`; `h < 0` integrates backwards.
pub fn rk4_step<F>(mut f: F, x: &ComplexMatrix, t: f64, h: f64) -> ComplexMatrix
where
    F: FnMut(f64, &ComplexMatrix) -> ComplexMatrix,
{
    let k1 = f(t, x);
    rk4_step_from_k1(f, x, k1, t, h)
}

/// RK4 step with the first stage already evaluated.
pub fn rk4_step_from_k1<F>(mut f: F, x: &ComplexMatrix, k1: ComplexMatrix, t: f64, h: f64) -> ComplexMatrix
where
    F: FnMut(f64, &ComplexMatrix) -> ComplexMatrix,
{
    let half = Complex64::new(0.5 * h, 0.0);
    let mut stage = x.clone();
    stage.scaled_add(half, &k1);
    let k2 = f(t + 0.5 * h, &stage);
    stage.assign(x);
    stage.scaled_add(half, &k2);
    let k3 = f(t + 0.5 * h, &stage);
    stage.assign(x);
    stage.scaled_add(Complex64::new(h, 0.0), &k3);
    let k4 = f(t + h, &stage);

    let sixth = Complex64::new(h / 6.0, 0.0);
    let third = Complex64::new(h / 3.0, 0.0);
    let mut out = x.clone();
    out.scaled_add(sixth, &k1);
    out.scaled_add(third, &k2);
    out.scaled_add(third, &k3);
    out.scaled_add(sixth, &k4);
    out
}

fn check_model_grid(model: &LindbladModel, u: &ControlSignal) -> Result<()> {
    if u.n_channels() != model.n_controls() {
        return Err(Error::DimensionMismatch(format!(
            "control has {} channels, model has {}",
            u.n_channels(),
            model.n_controls()
        )));
    }
    Ok(())
}

fn check_square(model: &LindbladModel, m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.dim() != (model.dim(), model.dim()) {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {:?}, model dimension is {}",
            m.dim(),
            model.dim()
        )));
    }
    Ok(())
}

fn finite_or_abort(m: &ComplexMatrix, step: usize, time: f64, controls: &[f64], what: &str) -> Result<()> {
    if all_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            step,
            time,
            context: format!("{what}; controls {controls:?}"),
        })
    }
}

/// One backward step of `dJ/dt = −L*_ū(J)` from node `node+1` to `node`.
fn adjoint_step_backward(
    model: &LindbladModel,
    u_bar: &ControlSignal,
    j_next: &ComplexMatrix,
    node: usize,
    hold: Hold,
) -> ComplexMatrix {
    let grid = u_bar.grid();
    let h = grid.step();
    let t_next = grid.time(node + 1);
    let t_node = grid.time(node);
    let f = |t: f64, j: &ComplexMatrix| {
        let theta = ((t - t_node) / h).clamp(0.0, 1.0);
        let u = u_bar.in_step(node, theta, hold);
        model.adjoint_generator_hermitian(1.0, &u, j) * Complex64::new(-1.0, 0.0)
    };
    let mut out = rk4_step(f, j_next, t_next, -h);
    hermitize(&mut out);
    out
}

/// One forward-in-time step of the same adjoint equation, node → node+1.
fn adjoint_step_forward(
    model: &LindbladModel,
    u_bar: &ControlSignal,
    j_node: &ComplexMatrix,
    node: usize,
    hold: Hold,
) -> ComplexMatrix {
    let grid = u_bar.grid();
    let h = grid.step();
    let t_node = grid.time(node);
    let f = |t: f64, j: &ComplexMatrix| {
        let theta = ((t - t_node) / h).clamp(0.0, 1.0);
        let u = u_bar.in_step(node, theta, hold);
        model.adjoint_generator_hermitian(1.0, &u, j) * Complex64::new(-1.0, 0.0)
    };
    let mut out = rk4_step(f, j_node, t_node, h);
    hermitize(&mut out);
    out
}

/// Integrates `dJ/dt = −L*_ū(t)(J)` from `J(T_f) = j_final` down to `t = 0`,
/// keeping every `stride`-th node (and the final node).
pub fn integrate_backward_adjoint(
    model: &LindbladModel,
    u_bar: &ControlSignal,
    j_final: &ComplexMatrix,
    stride: usize,
    hold: Hold,
) -> Result<Trajectory> {
    check_model_grid(model, u_bar)?;
    check_square(model, j_final, "final observable")?;
    if stride == 0 {
        return Err(Error::InvalidArgument("checkpoint stride must be >= 1".into()));
    }
    let grid = *u_bar.grid();
    let n = grid.n_steps();
    let nodes = checkpoint_nodes(&grid, stride);
    let mut samples: Vec<ComplexMatrix> = Vec::with_capacity(nodes.len());
    let mut current = j_final.as_standard_layout().into_owned();
    hermitize(&mut current);
    samples.push(current.clone());
    for node in (0..n).rev() {
        current = adjoint_step_backward(model, u_bar, &current, node, hold);
        finite_or_abort(&current, node, grid.time(node), &u_bar.at_node(node), "backward adjoint sweep")?;
        if node % stride == 0 {
            samples.push(current.clone());
        }
    }
    samples.reverse();
    Ok(Trajectory {
        grid,
        stride,
        nodes,
        samples,
    })
}

/// Densifies a checkpointed adjoint trajectory by integrating the adjoint
/// equation forward in time inside each window, restarting from the stored
/// checkpoint at every window start.
pub fn replay_forward_from_checkpoints(
    model: &LindbladModel,
    u_bar: &ControlSignal,
    checkpoints: &Trajectory,
    hold: Hold,
) -> Result<Trajectory> {
    check_model_grid(model, u_bar)?;
    if checkpoints.grid != *u_bar.grid() {
        return Err(Error::GridMismatch("checkpoints and control use different grids".into()));
    }
    if checkpoints.is_dense() {
        return Ok(checkpoints.clone());
    }
    let mut cursor = ObservableCursor::new(model, u_bar, checkpoints, hold);
    let grid = *u_bar.grid();
    let mut samples = Vec::with_capacity(grid.n_nodes());
    for node in 0..grid.n_nodes() {
        samples.push(cursor.at(node)?.clone());
    }
    Ok(Trajectory {
        grid,
        stride: 1,
        nodes: (0..grid.n_nodes()).collect(),
        samples,
    })
}

/// Sequential access to `J(t_k)` for increasing `k`. Dense trajectories are
/// read directly; checkpointed ones are replayed one window at a time so at
/// most `stride + 1` extra samples live in memory.
pub struct ObservableCursor<'a> {
    model: &'a LindbladModel,
    u_bar: &'a ControlSignal,
    traj: &'a Trajectory,
    hold: Hold,
    window_start: usize,
    window: Vec<ComplexMatrix>,
    peak_window: usize,
}

impl<'a> ObservableCursor<'a> {
    pub fn new(model: &'a LindbladModel, u_bar: &'a ControlSignal, traj: &'a Trajectory, hold: Hold) -> Self {
        ObservableCursor {
            model,
            u_bar,
            traj,
            hold,
            window_start: usize::MAX,
            window: Vec::new(),
            peak_window: 0,
        }
    }

    /// Largest number of replayed samples held at once.
    pub fn peak_window(&self) -> usize {
        self.peak_window
    }

    pub fn at(&mut self, node: usize) -> Result<&ComplexMatrix> {
        if self.traj.is_dense() {
            return Ok(&self.traj.samples[node]);
        }
        if let Some(i) = self.traj.nodes.binary_search(&node).ok() {
            return Ok(&self.traj.samples[i]);
        }
        let stride = self.traj.stride;
        let start = node - node % stride;
        if start != self.window_start {
            self.window.clear();
            let grid = self.traj.grid;
            let end = (start + stride).min(grid.n_steps());
            let mut current = self.traj.sample(start).expect("checkpoint").clone();
            for k in start..end - 1 {
                current = adjoint_step_forward(self.model, self.u_bar, &current, k, self.hold);
                finite_or_abort(&current, k + 1, grid.time(k + 1), &self.u_bar.at_node(k), "checkpoint replay")?;
                self.window.push(current.clone());
            }
            self.window_start = start;
            self.peak_window = self.peak_window.max(self.window.len());
        }
        Ok(&self.window[node - start - 1])
    }
}

/// Feedback gains and limits of a closed-loop pass.
#[derive(Debug, Clone)]
pub struct FeedbackLaw {
    /// `g_k > 0` per physical channel.
    pub gains: Vec<f64>,
    /// `g₀ > 0` of the clock channel; `None` for fixed-time passes.
    pub clock_gain: Option<f64>,
    pub saturation: SaturationPolicy,
}

impl FeedbackLaw {
    pub fn fixed(gains: Vec<f64>, saturation: SaturationPolicy) -> Self {
        FeedbackLaw {
            gains,
            clock_gain: None,
            saturation,
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        if self.gains.len() != m {
            return Err(Error::InvalidArgument(format!(
                "{} gains for {m} control channels",
                self.gains.len()
            )));
        }
        if let Some(g) = self.gains.iter().chain(self.clock_gain.iter()).find(|g| !g.is_finite() || **g < 0.0) {
            return Err(Error::InvalidArgument(format!("gain {g} must be finite and >= 0")));
        }
        match (&self.saturation, self.clock_gain) {
            (SaturationPolicy::Box(b), _) if b.len() != m => Err(Error::InvalidArgument(format!(
                "bounds for {} channels, model has {m}",
                b.len()
            ))),
            (SaturationPolicy::ClockAware(b), Some(_)) if b.physical().len() != m => Err(Error::InvalidArgument(
                format!("bounds for {} channels, model has {m}", b.physical().len()),
            )),
            (SaturationPolicy::ClockAware(_), None) => Err(Error::InvalidArgument(
                "clock-aware saturation needs a clock gain".into(),
            )),
            (_, Some(_)) if !matches!(self.saturation, SaturationPolicy::ClockAware(_)) => Err(
                Error::InvalidArgument("clock passes need clock-aware saturation".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Control at one node: returns `(clock value v₀, channel values)` from
    /// the reference `u_bar` and the feedback values.
    fn control(&self, u_bar: &[f64], f: &[f64], f0: f64) -> (f64, Vec<f64>) {
        match (&self.saturation, self.clock_gain) {
            (SaturationPolicy::ClockAware(bounds), Some(g0)) => {
                let mut vt = Vec::with_capacity(f.len() + 1);
                vt.push(g0 * f0);
                vt.extend(self.gains.iter().zip(f).map(|(g, fk)| g * fk));
                let sat = saturate_clock_aware(&vt, 0.0, u_bar, bounds);
                let v = u_bar.iter().zip(&sat[1..]).map(|(ub, vk)| ub + vk).collect();
                (sat[0], v)
            }
            (SaturationPolicy::Box(bounds), _) => (
                0.0,
                u_bar
                    .iter()
                    .zip(&self.gains)
                    .zip(f)
                    .enumerate()
                    .map(|(k, ((ub, g), fk))| bounds.clamp(k, ub + g * fk))
                    .collect(),
            ),
            _ => (
                0.0,
                u_bar.iter().zip(&self.gains).zip(f).map(|((ub, g), fk)| ub + g * fk).collect(),
            ),
        }
    }
}

/// Options for the forward pass beyond the feedback law.
#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardOptions {
    pub hold: Hold,
    /// Keep `ρ_σ(t)` every this many nodes; `None` keeps only final states.
    pub store_rho_stride: Option<usize>,
}

/// Output of a closed-loop forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Closed-loop values of the physical channels at every node (virtual
    /// controls `v_k` in clock passes).
    pub control: ControlSignal,
    /// Clock values `v₀` at every node, for clock passes.
    pub clock: Option<Vec<f64>>,
    pub rho_finals: Vec<ComplexMatrix>,
    pub rho_trajs: Option<Vec<Trajectory>>,
    /// `V(t_k) = |Λ| − Σ_σ trace(J_σ ρ_σ)` at every node.
    pub lyapunov: Vec<f64>,
    /// `F_k(t)` per physical channel at every node.
    pub feedback: Vec<Vec<f64>>,
    /// `F₀(t)` at every node, for clock passes.
    pub clock_feedback: Option<Vec<f64>>,
    /// Left-Riemann sum of `Σ_k ũ_k F_k` over the pass (plus `ṽ₀F₀` with a clock).
    pub dissipation: f64,
}

struct NodeTerms {
    drift: ComplexMatrix,
    controls: Vec<ComplexMatrix>,
    overlap: f64,
    f: Vec<f64>,
    f0: f64,
}

fn node_terms(model: &LindbladModel, j: &ComplexMatrix, rho: &ComplexMatrix) -> NodeTerms {
    let (drift, controls) = model.split_terms_hermitian(rho);
    let f = controls.iter().map(|c| hs_inner(j, c).re).collect();
    let f0 = hs_inner(j, &drift).re;
    let overlap = hs_inner(j, rho).re;
    NodeTerms {
        drift,
        controls,
        overlap,
        f,
        f0,
    }
}

fn combine_terms(drift: &ComplexMatrix, controls: &[ComplexMatrix], scale: f64, v: &[f64]) -> ComplexMatrix {
    let mut out = drift * Complex64::new(scale, 0.0);
    for (c, &vk) in controls.iter().zip(v) {
        out.scaled_add(Complex64::new(vk, 0.0), c);
    }
    out
}

/// Sums per-copy feedback values in a fixed order so runs are reproducible.
fn reduce_feedback(terms: &[NodeTerms], m: usize) -> (Vec<f64>, f64, f64) {
    let mut f = vec![0.0; m];
    let mut f0 = 0.0;
    let mut overlap = 0.0;
    for t in terms {
        for (acc, v) in f.iter_mut().zip(&t.f) {
            *acc += v;
        }
        f0 += t.f0;
        overlap += t.overlap;
    }
    (f, f0, overlap)
}

/// Forward closed-loop integration of all copies `ρ_σ` with feedback from the
/// stored observables `J_σ`.
///
/// At each node the feedback `F_k = Σ_σ trace(J_σ L_k(ρ_σ))` is reduced over
/// all copies before any copy advances; the resulting control is recorded and
/// held over the step (or re-evaluated at the interior stages with
/// [`Hold::Linear`]).
pub fn integrate_forward_closed_loop(
    model: &LindbladModel,
    u_bar: &ControlSignal,
    j_trajs: &[Trajectory],
    rho0s: &[ComplexMatrix],
    law: &FeedbackLaw,
    opts: ForwardOptions,
) -> Result<ForwardPass> {
    check_model_grid(model, u_bar)?;
    let m = model.n_controls();
    law.validate(m)?;
    if j_trajs.len() != rho0s.len() {
        return Err(Error::InvalidArgument(format!(
            "{} observables for {} initial states",
            j_trajs.len(),
            rho0s.len()
        )));
    }
    for (s, (traj, rho0)) in j_trajs.iter().zip(rho0s).enumerate() {
        if traj.grid != *u_bar.grid() {
            return Err(Error::GridMismatch(format!("observable {s} uses a different grid")));
        }
        check_square(model, rho0, "initial state")?;
    }
    let clock = law.clock_gain.is_some();
    let grid = *u_bar.grid();
    let n = grid.n_steps();
    let h = grid.step();
    let n_active = rho0s.len() as f64;

    let mut cursors: Vec<ObservableCursor> = j_trajs
        .iter()
        .map(|t| ObservableCursor::new(model, u_bar, t, opts.hold))
        .collect();
    let mut rhos: Vec<ComplexMatrix> = rho0s.iter().map(|r| r.as_standard_layout().into_owned()).collect();
    let mut control_values = vec![Vec::with_capacity(n + 1); m];
    let mut clock_values = Vec::with_capacity(if clock { n + 1 } else { 0 });
    let mut feedback = vec![Vec::with_capacity(n + 1); m];
    let mut clock_feedback = Vec::with_capacity(if clock { n + 1 } else { 0 });
    let mut lyapunov = Vec::with_capacity(n + 1);
    let mut dissipation = 0.0;
    let mut rho_store: Option<(usize, Vec<Vec<ComplexMatrix>>)> =
        opts.store_rho_stride.map(|s| (s.max(1), vec![Vec::new(); rhos.len()]));

    for node in 0..=n {
        let js: Vec<ComplexMatrix> = cursors
            .iter_mut()
            .map(|c| c.at(node).cloned())
            .collect::<Result<_>>()?;
        let terms: Vec<NodeTerms> = js
            .par_iter()
            .zip(rhos.par_iter())
            .map(|(j, rho)| node_terms(model, j, rho))
            .collect();
        let (f, f0, overlap) = reduce_feedback(&terms, m);
        let ub = u_bar.at_node(node);
        let (v0, v) = law.control(&ub, &f, f0);

        lyapunov.push(n_active - overlap);
        for k in 0..m {
            control_values[k].push(v[k]);
            feedback[k].push(f[k]);
        }
        if clock {
            clock_values.push(v0);
            clock_feedback.push(f0);
        }
        if let Some((stride, store)) = rho_store.as_mut() {
            if node % *stride == 0 || node == n {
                for (s, rho) in store.iter_mut().zip(&rhos) {
                    s.push(rho.clone());
                }
            }
        }
        if node == n {
            break;
        }
        let rate: f64 = v.iter().zip(&ub).zip(&f).map(|((vk, ubk), fk)| (vk - ubk) * fk).sum::<f64>() + v0 * f0;
        dissipation += h * rate;

        let scale = 1.0 + v0;
        let t = grid.time(node);
        let next: Vec<ComplexMatrix> = match opts.hold {
            Hold::ZeroOrder => terms
                .into_par_iter()
                .zip(rhos.par_iter())
                .map(|(term, rho)| {
                    let k1 = combine_terms(&term.drift, &term.controls, scale, &v);
                    let stage = |_t: f64, x: &ComplexMatrix| model.generator_hermitian(scale, &v, x);
                    let mut out = rk4_step_from_k1(stage, rho, k1, t, h);
                    hermitize(&mut out);
                    out
                })
                .collect(),
            Hold::Linear => {
                let js_next: Vec<ComplexMatrix> = cursors
                    .iter_mut()
                    .map(|c| c.at(node + 1).cloned())
                    .collect::<Result<_>>()?;
                linear_hold_step(model, u_bar, law, node, h, &js, &js_next, &rhos, terms, scale, &v)
            }
        };
        for rho in &next {
            finite_or_abort(rho, node + 1, grid.time(node + 1), &v, "forward closed-loop sweep")?;
        }
        rhos = next;
    }

    let rho_trajs = rho_store.map(|(stride, store)| {
        let nodes = checkpoint_nodes(&grid, stride);
        store
            .into_iter()
            .map(|samples| Trajectory {
                grid,
                stride,
                nodes: nodes.clone(),
                samples,
            })
            .collect()
    });

    Ok(ForwardPass {
        control: ControlSignal::new(grid, control_values)?,
        clock: clock.then_some(clock_values),
        rho_finals: rhos,
        rho_trajs,
        lyapunov,
        feedback,
        clock_feedback: clock.then_some(clock_feedback),
        dissipation,
    })
}

/// One RK4 step for all copies with the feedback re-evaluated at each stage
/// from linearly interpolated observables and reference controls.
#[allow(clippy::too_many_arguments)]
fn linear_hold_step(
    model: &LindbladModel,
    u_bar: &ControlSignal,
    law: &FeedbackLaw,
    node: usize,
    h: f64,
    js: &[ComplexMatrix],
    js_next: &[ComplexMatrix],
    rhos: &[ComplexMatrix],
    first: Vec<NodeTerms>,
    scale0: f64,
    v_first: &[f64],
) -> Vec<ComplexMatrix> {
    let m = model.n_controls();
    let j_mid: Vec<ComplexMatrix> = js
        .iter()
        .zip(js_next)
        .map(|(a, b)| (a + b) * Complex64::new(0.5, 0.0))
        .collect();
    let stage_slope = |states: &[ComplexMatrix], jset: &[ComplexMatrix], theta: f64| -> Vec<ComplexMatrix> {
        let terms: Vec<NodeTerms> = jset
            .par_iter()
            .zip(states.par_iter())
            .map(|(j, x)| node_terms(model, j, x))
            .collect();
        let (f, f0, _) = reduce_feedback(&terms, m);
        let ub = u_bar.in_step(node, theta, Hold::Linear);
        let (v0, v) = law.control(&ub, &f, f0);
        terms
            .iter()
            .map(|t| combine_terms(&t.drift, &t.controls, 1.0 + v0, &v))
            .collect()
    };
    let k1: Vec<ComplexMatrix> = first
        .iter()
        .map(|t| combine_terms(&t.drift, &t.controls, scale0, v_first))
        .collect();
    let advance = |ks: &[ComplexMatrix], factor: f64| -> Vec<ComplexMatrix> {
        rhos.iter()
            .zip(ks)
            .map(|(r, k)| {
                let mut x = r.clone();
                x.scaled_add(Complex64::new(factor * h, 0.0), k);
                x
            })
            .collect()
    };
    let k2 = stage_slope(&advance(&k1, 0.5), &j_mid, 0.5);
    let k3 = stage_slope(&advance(&k2, 0.5), &j_mid, 0.5);
    let k4 = stage_slope(&advance(&k3, 1.0), js_next, 1.0);
    (0..rhos.len())
        .map(|s| {
            let mut out = rhos[s].clone();
            out.scaled_add(Complex64::new(h / 6.0, 0.0), &k1[s]);
            out.scaled_add(Complex64::new(h / 3.0, 0.0), &k2[s]);
            out.scaled_add(Complex64::new(h / 3.0, 0.0), &k3[s]);
            out.scaled_add(Complex64::new(h / 6.0, 0.0), &k4[s]);
            hermitize(&mut out);
            out
        })
        .collect()
}

/// Open-loop forward integration of `dρ/dt = L_u(t)(ρ)`; returns `ρ(T_f)`.
pub fn simulate_open_loop(
    model: &LindbladModel,
    control: &ControlSignal,
    rho0: &ComplexMatrix,
    hold: Hold,
) -> Result<ComplexMatrix> {
    Ok(simulate_open_loop_trajectory(model, control, rho0, hold, control.grid().n_steps())?.last().clone())
}

/// Open-loop forward integration keeping every `stride`-th node.
pub fn simulate_open_loop_trajectory(
    model: &LindbladModel,
    control: &ControlSignal,
    rho0: &ComplexMatrix,
    hold: Hold,
    stride: usize,
) -> Result<Trajectory> {
    check_model_grid(model, control)?;
    check_square(model, rho0, "initial state")?;
    let stride = stride.max(1);
    let grid = *control.grid();
    let h = grid.step();
    let mut rho = rho0.as_standard_layout().into_owned();
    let nodes = checkpoint_nodes(&grid, stride);
    let mut samples = vec![rho.clone()];
    for node in 0..grid.n_steps() {
        let t_node = grid.time(node);
        let f = |t: f64, x: &ComplexMatrix| {
            let theta = ((t - t_node) / h).clamp(0.0, 1.0);
            model.generator_hermitian(1.0, &control.in_step(node, theta, hold), x)
        };
        rho = rk4_step(f, &rho, t_node, h);
        hermitize(&mut rho);
        finite_or_abort(&rho, node + 1, grid.time(node + 1), &control.at_node(node), "open-loop simulation")?;
        if (node + 1) % stride == 0 || node + 1 == grid.n_steps() {
            samples.push(rho.clone());
        }
    }
    Ok(Trajectory {
        grid,
        stride,
        nodes,
        samples,
    })
}

/// Zero matrix of the model dimension.
pub fn zeros_like(model: &LindbladModel) -> ComplexMatrix {
    Array2::zeros((model.dim(), model.dim()))
}
