// SPDX-License-Identifier: Apache-2.0

//! Run configuration files.
//!
//! TOML (or JSON, which is what `summary.json` embeds) with unknown keys
//! rejected. Schema errors carry the dotted path of the offending field.
//!
//! ```toml
//! [model]
//! preset = "zgate"        # or "cnot"; every numeric field is optional
//! alpha = 2.0
//!
//! [solver]
//! kind = "fixed_time"     # or "clock"
//! tf = 0.85               # gate time, or initial gate time for "clock"
//! max_iters = 80
//! u_max = [0.8]
//!
//! [seed]
//! relative_amplitude = 0.01
//! harmonics = 3
//! rng_seed = 1
//!
//! [metrics]
//! diag_only = false
//!
//! [sweep]
//! tf = [0.5, 0.85, 1.2]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate_family::GateSpec;
use crate::integrator::{ControlSignal, Hold, TimeGrid, DEFAULT_N_SIM};
use crate::lindblad::LindbladModel;
use crate::models::{
    adiabatic_level, build_cnot, build_zgate, storage_estimate_bytes, stride_for_budget, CnotPreset, ZGatePreset,
    CNOT_DESK_N_FOCK,
};
use crate::operator_algebra::StateVector;
use crate::saturation::ChannelBounds;
use crate::seed::{make_seed, SeedConfig};
use crate::solver_clock::{ClockConfig, DEFAULT_CLOCK_MAX};
use crate::solver_fixed::FixedTimeConfig;

/// Largest Hilbert-space dimension allowed without [`Profile::Full`].
pub const DESK_MAX_DIM: usize = 2 * CNOT_DESK_N_FOCK * CNOT_DESK_N_FOCK;

pub const DEFAULT_MEMORY_BUDGET_MB: f64 = 2048.0;

/// Problem size gate for the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Desk,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(default)]
    pub seed: SeedSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum ModelConfig {
    Zgate(ZGatePreset),
    Cnot(CnotSection),
}

/// CNOT overrides. Without `n_fock` the truncation follows the profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CnotSection {
    pub alpha2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_fock: Option<usize>,
    pub g2: f64,
    pub k2: f64,
    pub k1: f64,
}

impl Default for CnotSection {
    fn default() -> Self {
        let p = CnotPreset::default();
        CnotSection {
            alpha2: p.alpha2,
            n_fock: None,
            g2: p.g2,
            k2: p.k2,
            k1: p.k1,
        }
    }
}

impl CnotSection {
    pub fn preset(&self, profile: Profile) -> CnotPreset {
        let n_fock = self.n_fock.unwrap_or(match profile {
            Profile::Desk => CNOT_DESK_N_FOCK,
            Profile::Full => CnotPreset::default().n_fock,
        });
        CnotPreset {
            alpha2: self.alpha2,
            n_fock,
            g2: self.g2,
            k2: self.k2,
            k1: self.k1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    FixedTime,
    Clock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub kind: SolverKind,
    /// Gate time, or the initial gate time of a clock run.
    pub tf: f64,
    /// One per channel; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock_max: Option<f64>,
    #[serde(default)]
    pub literal_bounds: bool,
    /// 100 for fixed time, 200 for clock runs when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub infidelity_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_max: Option<Vec<f64>>,
    /// Defaults to `-u_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_min: Option<Vec<f64>>,
    #[serde(default = "default_n_sim")]
    pub n_sim: usize,
    /// Chosen from `memory_budget_mb` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_stride: Option<usize>,
    #[serde(default = "default_budget")]
    pub memory_budget_mb: f64,
    #[serde(default)]
    pub hold: Hold,
}

fn default_n_sim() -> usize {
    DEFAULT_N_SIM
}

fn default_budget() -> f64 {
    DEFAULT_MEMORY_BUDGET_MB
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedBase {
    /// Constant `π/(4 T_f α)`.
    #[default]
    Adiabatic,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSection {
    #[serde(default)]
    pub base: SeedBase,
    /// Absolute amplitude `A`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// `A` as a fraction of the adiabatic level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_amplitude: Option<f64>,
    #[serde(default = "default_harmonics")]
    pub harmonics: usize,
    /// Defaults to the (initial) gate time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default = "default_rng_seed")]
    pub rng_seed: u64,
}

pub const DEFAULT_RELATIVE_AMPLITUDE: f64 = 0.01;

fn default_harmonics() -> usize {
    3
}

fn default_rng_seed() -> u64 {
    1
}

impl Default for SeedSection {
    fn default() -> Self {
        SeedSection {
            base: SeedBase::Adiabatic,
            amplitude: None,
            relative_amplitude: None,
            harmonics: default_harmonics(),
            period: None,
            rng_seed: default_rng_seed(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    /// Optimize over the diagonal members only.
    #[serde(default)]
    pub diag_only: bool,
    /// Report the worst case over the full family as well.
    #[serde(default = "default_true")]
    pub corrected: bool,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            diag_only: false,
            corrected: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub tf: Vec<f64>,
    #[serde(default = "default_n_sim")]
    pub n_sim: usize,
    #[serde(default)]
    pub hold: Hold,
}

/// One amplitude `(fock_index, re, im)` of a basis vector.
pub type Amplitude = (usize, f64, f64);

/// Custom logical basis replacing the preset's. Each vector lists its
/// nonzero amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSection {
    pub e: Vec<Vec<Amplitude>>,
    pub f: Vec<Vec<Amplitude>>,
}

fn bad(path: &str, message: impl Into<String>) -> Error {
    Error::config(path, message)
}

fn finite_positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bad(path, format!("must be finite and > 0, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| bad("", e.to_string()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            bad(&path, e.into_inner().message().trim())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            bad(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|x| x == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    /// Value checks that need no allocation beyond the parsed file.
    pub fn validate(&self) -> Result<()> {
        match &self.model {
            ModelConfig::Zgate(p) => {
                finite_positive("model.kappa2", p.kappa2)?;
                if !(p.kappa1 >= 0.0 && p.kappa1.is_finite()) {
                    return Err(bad("model.kappa1", format!("must be >= 0, got {}", p.kappa1)));
                }
                if !(p.alpha.is_finite() && p.alpha != 0.0) {
                    return Err(bad("model.alpha", format!("must be finite and nonzero, got {}", p.alpha)));
                }
                if p.n_fock < 2 {
                    return Err(bad("model.n_fock", "need at least 2 levels"));
                }
            }
            ModelConfig::Cnot(c) => {
                finite_positive("model.alpha2", c.alpha2)?;
                finite_positive("model.g2", c.g2)?;
                finite_positive("model.k2", c.k2)?;
                if !(c.k1 >= 0.0 && c.k1.is_finite()) {
                    return Err(bad("model.k1", format!("must be >= 0, got {}", c.k1)));
                }
                if c.n_fock.is_some_and(|n| n < 2) {
                    return Err(bad("model.n_fock", "need at least 2 levels"));
                }
            }
        }
        let m = self.n_controls();
        if let Some(s) = &self.solver {
            finite_positive("solver.tf", s.tf)?;
            if let Some(g) = &s.gains {
                if g.len() != m {
                    return Err(bad("solver.gains", format!("{} gains for {m} channels", g.len())));
                }
                for (k, v) in g.iter().enumerate() {
                    finite_positive(&format!("solver.gains[{k}]"), *v)?;
                }
            }
            if s.kind == SolverKind::FixedTime {
                for (name, set) in [
                    ("clock_gain", s.clock_gain.is_some()),
                    ("clock_max", s.clock_max.is_some()),
                    ("literal_bounds", s.literal_bounds),
                ] {
                    if set {
                        return Err(bad(&format!("solver.{name}"), "only valid with kind = \"clock\""));
                    }
                }
            }
            if let Some(g) = s.clock_gain {
                if !(g.is_finite() && g >= 0.0) {
                    return Err(bad("solver.clock_gain", format!("must be finite and >= 0, got {g}")));
                }
            }
            if let Some(c) = s.clock_max {
                if !(c > 0.0 && c < 1.0) {
                    return Err(bad("solver.clock_max", format!("must lie in (0, 1), got {c}")));
                }
            }
            if s.max_iters == Some(0) {
                return Err(bad("solver.max_iters", "must be >= 1"));
            }
            if !(s.infidelity_tol.is_finite() && s.infidelity_tol >= 0.0) {
                return Err(bad("solver.infidelity_tol", "must be finite and >= 0"));
            }
            if s.u_min.is_some() && s.u_max.is_none() {
                return Err(bad("solver.u_min", "requires u_max"));
            }
            if let Some(hi) = &s.u_max {
                if hi.len() != m {
                    return Err(bad("solver.u_max", format!("{} bounds for {m} channels", hi.len())));
                }
                for (k, v) in hi.iter().enumerate() {
                    finite_positive(&format!("solver.u_max[{k}]"), *v)?;
                }
                if let Some(lo) = &s.u_min {
                    if lo.len() != m {
                        return Err(bad("solver.u_min", format!("{} bounds for {m} channels", lo.len())));
                    }
                    for (k, (l, h)) in lo.iter().zip(hi).enumerate() {
                        if !(l.is_finite() && l < h) {
                            return Err(bad(&format!("solver.u_min[{k}]"), format!("must be below u_max, got {l}")));
                        }
                    }
                }
            }
            if s.n_sim < 10 {
                return Err(bad("solver.n_sim", format!("need at least 10 steps, got {}", s.n_sim)));
            }
            if s.checkpoint_stride == Some(0) {
                return Err(bad("solver.checkpoint_stride", "must be >= 1"));
            }
            finite_positive("solver.memory_budget_mb", s.memory_budget_mb)?;
        }
        let seed = &self.seed;
        if seed.amplitude.is_some() && seed.relative_amplitude.is_some() {
            return Err(bad("seed", "set either amplitude or relative_amplitude, not both"));
        }
        for (name, v) in [("amplitude", seed.amplitude), ("relative_amplitude", seed.relative_amplitude)] {
            if let Some(a) = v {
                if !(a.is_finite() && a >= 0.0) {
                    return Err(bad(&format!("seed.{name}"), format!("must be finite and >= 0, got {a}")));
                }
            }
        }
        if let Some(p) = seed.period {
            finite_positive("seed.period", p)?;
        }
        if let Some(sw) = &self.sweep {
            if sw.tf.is_empty() {
                return Err(bad("sweep.tf", "empty gate-time grid"));
            }
            for (i, t) in sw.tf.iter().enumerate() {
                finite_positive(&format!("sweep.tf[{i}]"), *t)?;
            }
            if sw.n_sim < 10 {
                return Err(bad("sweep.n_sim", format!("need at least 10 steps, got {}", sw.n_sim)));
            }
        }
        if let Some(g) = &self.gate {
            if g.e.is_empty() || g.e.len() != g.f.len() {
                return Err(bad("gate", format!("{} source and {} target vectors", g.e.len(), g.f.len())));
            }
            let dim = self.dim(Profile::Full);
            for (name, set) in [("e", &g.e), ("f", &g.f)] {
                for (i, v) in set.iter().enumerate() {
                    for (j, (idx, re, im)) in v.iter().enumerate() {
                        let path = format!("gate.{name}[{i}][{j}]");
                        if *idx >= dim && self.fixed_dim() {
                            return Err(bad(&path, format!("index {idx} outside dimension {dim}")));
                        }
                        if !(re.is_finite() && im.is_finite()) {
                            return Err(bad(&path, "non-finite amplitude"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_controls(&self) -> usize {
        1
    }

    fn fixed_dim(&self) -> bool {
        !matches!(self.model, ModelConfig::Cnot(CnotSection { n_fock: None, .. }))
    }

    /// Hilbert-space dimension under `profile`.
    pub fn dim(&self, profile: Profile) -> usize {
        match &self.model {
            ModelConfig::Zgate(p) => p.n_fock,
            ModelConfig::Cnot(c) => c.preset(profile).dim(),
        }
    }

    /// Coherent amplitude entering the adiabatic control.
    pub fn alpha(&self) -> f64 {
        match &self.model {
            ModelConfig::Zgate(p) => p.alpha,
            ModelConfig::Cnot(c) => c.alpha2.sqrt(),
        }
    }

    /// Rejects sizes above [`DESK_MAX_DIM`] unless `profile` is full.
    pub fn check_profile(&self, profile: Profile) -> Result<()> {
        let dim = self.dim(profile);
        if profile == Profile::Desk && dim > DESK_MAX_DIM {
            return Err(bad(
                "model",
                format!("dimension {dim} exceeds {DESK_MAX_DIM}; rerun with --profile full"),
            ));
        }
        Ok(())
    }

    /// Model and logical basis.
    pub fn build_model(&self, profile: Profile) -> Result<(LindbladModel, GateSpec)> {
        let (model, spec) = match &self.model {
            ModelConfig::Zgate(p) => build_zgate(p)?,
            ModelConfig::Cnot(c) => build_cnot(&c.preset(profile))?,
        };
        match &self.gate {
            None => Ok((model, spec)),
            Some(g) => {
                let dim = model.dim();
                let vecs = |name: &str, set: &[Vec<Amplitude>]| -> Result<Vec<StateVector>> {
                    set.iter()
                        .enumerate()
                        .map(|(i, v)| {
                            let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); dim];
                            for (idx, re, im) in v {
                                if *idx >= dim {
                                    return Err(bad(
                                        &format!("gate.{name}[{i}]"),
                                        format!("index {idx} outside dimension {dim}"),
                                    ));
                                }
                                amps[*idx] += num_complex::Complex64::new(*re, *im);
                            }
                            Ok(StateVector::from_vec(amps))
                        })
                        .collect()
                };
                let spec = GateSpec::new(vecs("e", &g.e)?, vecs("f", &g.f)?)?;
                Ok((model, spec))
            }
        }
    }

    pub fn solver(&self) -> Result<&SolverSection> {
        self.solver.as_ref().ok_or_else(|| bad("solver", "missing section"))
    }

    pub fn sweep(&self) -> Result<&SweepSection> {
        self.sweep.as_ref().ok_or_else(|| bad("sweep", "missing section"))
    }

    /// Copy with every default made explicit, for the run summary.
    pub fn resolved(&self, profile: Profile, n_members: usize) -> Result<RunConfig> {
        let mut out = self.clone();
        if let ModelConfig::Cnot(c) = &mut out.model {
            c.n_fock = Some(c.preset(profile).n_fock);
        }
        let dim = self.dim(profile);
        if let Some(s) = &mut out.solver {
            let m = self.n_controls();
            s.gains.get_or_insert_with(|| vec![1.0; m]);
            s.max_iters.get_or_insert(match s.kind {
                SolverKind::FixedTime => 100,
                SolverKind::Clock => 200,
            });
            if s.kind == SolverKind::Clock {
                s.clock_gain.get_or_insert(0.1);
                s.clock_max.get_or_insert(DEFAULT_CLOCK_MAX);
            }
            if let Some(hi) = &s.u_max {
                s.u_min.get_or_insert_with(|| hi.iter().map(|v| -v).collect());
            }
            let budget = (s.memory_budget_mb * 1024.0 * 1024.0) as u64;
            s.checkpoint_stride
                .get_or_insert_with(|| stride_for_budget(dim, n_members, s.n_sim, budget));
            let tf = s.tf;
            let seed = &mut out.seed;
            seed.period.get_or_insert(tf);
            if seed.amplitude.is_none() {
                let rel = seed.relative_amplitude.take().unwrap_or(DEFAULT_RELATIVE_AMPLITUDE);
                seed.amplitude = Some(rel * adiabatic_level(tf, self.alpha())?.abs());
            }
        }
        Ok(out)
    }
}

/// Everything a solver run needs, built from a resolved config.
pub struct RunPlan {
    pub model: LindbladModel,
    pub spec: GateSpec,
    pub seed: ControlSignal,
    pub solver: SolverPlan,
    /// Bytes of observable storage per backward sweep.
    pub storage_bytes: u64,
    pub budget_bytes: u64,
}

pub enum SolverPlan {
    Fixed(FixedTimeConfig),
    Clock(ClockConfig),
}

impl SolverPlan {
    pub fn max_iters(&self) -> usize {
        match self {
            SolverPlan::Fixed(c) => c.max_iters,
            SolverPlan::Clock(c) => c.max_iters,
        }
    }

    pub fn n_sim(&self) -> usize {
        match self {
            SolverPlan::Fixed(c) => c.n_sim,
            SolverPlan::Clock(c) => c.n_sim,
        }
    }
}

impl RunConfig {
    /// Builds model, seed and solver settings. Expects [`RunConfig::resolved`]
    /// output; missing values fall back to the same defaults.
    pub fn plan(&self, profile: Profile) -> Result<RunPlan> {
        self.check_profile(profile)?;
        let s = self.solver()?;
        let (model, spec) = self.build_model(profile)?;
        let n_members = if self.metrics.diag_only { spec.n_bar() } else { spec.n_bar().pow(2) };
        let r = self.resolved(profile, n_members)?;
        let s_r = r.solver()?;
        let m = model.n_controls();
        let gains = s_r.gains.clone().unwrap_or_else(|| vec![1.0; m]);
        let u_bounds = match (&s_r.u_min, &s_r.u_max) {
            (Some(lo), Some(hi)) => Some(ChannelBounds::new(lo.clone(), hi.clone())?),
            (None, Some(hi)) => Some(ChannelBounds::symmetric(hi)?),
            _ => None,
        };
        let stride = s_r.checkpoint_stride.unwrap_or(1);
        let max_iters = s_r.max_iters.unwrap_or(100);
        let grid = TimeGrid::new(0.0, s.tf, s.n_sim)?;
        let level = match r.seed.base {
            SeedBase::Adiabatic => adiabatic_level(s.tf, self.alpha())?,
            SeedBase::Zero => 0.0,
        };
        let base = ControlSignal::constant(grid, &vec![level; m])?;
        let seed = make_seed(
            &base,
            &SeedConfig {
                amplitude: r.seed.amplitude.unwrap_or(0.0),
                harmonics: r.seed.harmonics,
                period: r.seed.period.unwrap_or(s.tf),
                rng_seed: r.seed.rng_seed,
            },
        )?;
        let corrected = self.metrics.corrected;
        let solver = match s.kind {
            SolverKind::FixedTime => {
                let mut c = FixedTimeConfig::new(s.tf, gains);
                c.max_iters = max_iters;
                c.infidelity_tol = s.infidelity_tol;
                c.u_bounds = u_bounds;
                c.n_sim = s.n_sim;
                c.checkpoint_stride = stride;
                c.hold = s.hold;
                c.corrected = corrected;
                SolverPlan::Fixed(c)
            }
            SolverKind::Clock => {
                let mut c = ClockConfig::new(s.tf, gains, s_r.clock_gain.unwrap_or(0.1));
                c.clock_max = s_r.clock_max.unwrap_or(DEFAULT_CLOCK_MAX);
                c.literal_bounds = s.literal_bounds;
                c.max_iters = max_iters;
                c.infidelity_tol = s.infidelity_tol;
                c.u_bounds = u_bounds;
                c.n_sim = s.n_sim;
                c.checkpoint_stride = stride;
                c.hold = s.hold;
                c.corrected = corrected;
                SolverPlan::Clock(c)
            }
        };
        let budget_bytes = (s.memory_budget_mb * 1024.0 * 1024.0) as u64;
        Ok(RunPlan {
            storage_bytes: storage_estimate_bytes(model.dim(), n_members, s.n_sim, stride),
            budget_bytes,
            model,
            spec,
            seed,
            solver,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ZGATE: &str = r#"
        [model]
        preset = "zgate"

        [solver]
        kind = "fixed_time"
        tf = 0.85
        max_iters = 3
        u_max = [0.8]
        n_sim = 50
    "#;

    fn err_path(text: &str) -> String {
        match RunConfig::from_toml_str(text) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn parses_minimal_zgate() {
        let cfg = RunConfig::from_toml_str(ZGATE).unwrap();
        assert_eq!(cfg.model, ModelConfig::Zgate(ZGatePreset::default()));
        let s = cfg.solver().unwrap();
        assert_eq!(s.kind, SolverKind::FixedTime);
        assert_eq!(s.max_iters, Some(3));
        assert_eq!(cfg.seed, SeedSection::default());
        assert!(cfg.metrics.corrected);
    }

    #[test]
    fn unknown_keys_report_paths() {
        assert_eq!(err_path(&ZGATE.replace("n_sim = 50", "n_sims = 50")), "solver.n_sims");
        assert_eq!(err_path(&format!("{ZGATE}\n[seed]\nharmonic = 2\n")), "seed.harmonic");
        assert_eq!(err_path(&format!("{ZGATE}\n[extra]\nx = 1\n")), "extra");
        let msg = RunConfig::from_toml_str(&ZGATE.replace("preset = \"zgate\"", "preset = \"zgate\"\nalhpa = 2"))
            .unwrap_err()
            .to_string();
        assert!(msg.contains("alhpa"), "{msg}");
    }

    #[test]
    fn value_errors_report_paths() {
        assert_eq!(err_path(&ZGATE.replace("tf = 0.85", "tf = -1.0")), "solver.tf");
        assert_eq!(err_path(&ZGATE.replace("u_max = [0.8]", "u_max = [0.8, 0.8]")), "solver.u_max");
        assert_eq!(err_path(&ZGATE.replace("max_iters = 3", "max_iters = 3\nclock_gain = 0.1")), "solver.clock_gain");
        assert_eq!(err_path(&ZGATE.replace("tf = 0.85", "tf = \"x\"")), "solver.tf");
        assert_eq!(err_path(&format!("{ZGATE}\n[sweep]\ntf = []\n")), "sweep.tf");
        assert_eq!(
            err_path(&format!("{ZGATE}\n[seed]\namplitude = 0.1\nrelative_amplitude = 0.1\n")),
            "seed"
        );
    }

    #[test]
    fn resolved_fills_defaults_and_round_trips() {
        let cfg = RunConfig::from_toml_str(ZGATE).unwrap();
        let r = cfg.resolved(Profile::Desk, 4).unwrap();
        let s = r.solver().unwrap();
        assert_eq!(s.gains.as_deref(), Some(&[1.0][..]));
        assert_eq!(s.u_min.as_deref(), Some(&[-0.8][..]));
        assert_eq!(s.checkpoint_stride, Some(1));
        let level = adiabatic_level(0.85, 2.0).unwrap();
        assert!((r.seed.amplitude.unwrap() - 0.01 * level).abs() < 1e-15);
        assert_eq!(r.seed.period, Some(0.85));
        let json = serde_json::to_string(&r).unwrap();
        let back = RunConfig::from_json_str(&json).unwrap();
        assert_eq!(back, r);
        // resolving twice changes nothing
        assert_eq!(back.resolved(Profile::Desk, 4).unwrap(), r);
    }

    #[test]
    fn cnot_truncation_follows_profile() {
        let text = "[model]\npreset = \"cnot\"\n";
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.dim(Profile::Desk), 200);
        assert_eq!(cfg.dim(Profile::Full), 578);
        cfg.check_profile(Profile::Desk).unwrap();
        let big = RunConfig::from_toml_str("[model]\npreset = \"cnot\"\nn_fock = 17\n").unwrap();
        assert!(big.check_profile(Profile::Desk).is_err());
        big.check_profile(Profile::Full).unwrap();
    }

    #[test]
    fn plan_matches_config() {
        let cfg = RunConfig::from_toml_str(ZGATE).unwrap();
        let plan = cfg.plan(Profile::Desk).unwrap();
        assert_eq!(plan.model.dim(), 20);
        assert_eq!(plan.seed.grid().n_steps(), 50);
        match plan.solver {
            SolverPlan::Fixed(c) => {
                assert_eq!(c.max_iters, 3);
                assert_eq!(c.u_bounds.unwrap().hi(), &[0.8]);
            }
            SolverPlan::Clock(_) => panic!("wrong solver"),
        }
        // perturbation stays within 2·M·A of the adiabatic level
        let level = adiabatic_level(0.85, 2.0).unwrap();
        for v in plan.seed.channel(0) {
            assert!((v - level).abs() <= 6.0 * 0.01 * level + 1e-15);
        }
    }

    #[test]
    fn custom_gate_basis() {
        let text = format!("{ZGATE}\n[gate]\ne = [[[0, 1.0, 0.0]], [[1, 1.0, 0.0]]]\nf = [[[1, 1.0, 0.0]], [[0, 1.0, 0.0]]]\n");
        let cfg = RunConfig::from_toml_str(&text).unwrap();
        let (_, spec) = cfg.build_model(Profile::Desk).unwrap();
        assert_eq!(spec.n_bar(), 2);
        assert_eq!(spec.e_vecs()[1].amplitudes()[1].re, 1.0);
        let bad_idx = text.replace("[[1, 1.0, 0.0]], [[0", "[[25, 1.0, 0.0]], [[0");
        assert!(err_path(&bad_idx).starts_with("gate.f"));
    }
}
