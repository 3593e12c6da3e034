// SPDX-License-Identifier: Apache-2.0

//! Lyapunov value, gate infidelity and stationarity residuals.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate_family::GateMember;
use crate::lindblad::LindbladModel;
use crate::operator_algebra::{hs_inner, ComplexMatrix, StateVector};

/// `V = n − Σ_σ trace(J_σ ρ_σ)` with `n` the number of pairs.
pub fn lyapunov(js: &[ComplexMatrix], rhos: &[ComplexMatrix]) -> Result<f64> {
    if js.len() != rhos.len() {
        return Err(Error::InvalidArgument(format!(
            "{} observables for {} states",
            js.len(),
            rhos.len()
        )));
    }
    let mut overlap = 0.0;
    for (j, rho) in js.iter().zip(rhos) {
        if j.dim() != rho.dim() {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", j.dim(), rho.dim())));
        }
        overlap += hs_inner(j, rho).re;
    }
    Ok(js.len() as f64 - overlap)
}

/// `⟨φ|ρ|φ⟩`.
pub fn fidelity(phi: &StateVector, rho: &ComplexMatrix) -> f64 {
    phi.expectation(rho).re
}

/// Worst case of `1 − ⟨φ_σ|ρ_σ(T_f)|φ_σ⟩` over the given members.
pub fn gate_infidelity(rho_finals: &[ComplexMatrix], members: &[&GateMember]) -> Result<f64> {
    if rho_finals.len() != members.len() {
        return Err(Error::InvalidArgument(format!(
            "{} final states for {} members",
            rho_finals.len(),
            members.len()
        )));
    }
    Ok(rho_finals
        .iter()
        .zip(members)
        .map(|(rho, m)| 1.0 - fidelity(&m.phi, rho))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `sup_{k,t} |F_k(t)|`.
pub fn stationarity_residual(feedback: &[Vec<f64>]) -> f64 {
    feedback
        .iter()
        .flat_map(|ch| ch.iter())
        .fold(0.0, |acc: f64, f| acc.max(f.abs()))
}

/// Projected-gradient residual `sup_{k,t} |u_k(t) − ū_k(t)| / g_k`: the
/// applied correction per unit gain. Equals [`stationarity_residual`] when no
/// bound is active and vanishes at constrained stationary points.
pub fn projected_residual(applied: &[Vec<f64>], reference: &[Vec<f64>], gains: &[f64]) -> f64 {
    let mut acc: f64 = 0.0;
    for ((u, ub), g) in applied.iter().zip(reference).zip(gains) {
        if *g > 0.0 {
            for (a, b) in u.iter().zip(ub) {
                acc = acc.max((a - b).abs() / g);
            }
        }
    }
    acc
}

/// `Σ_σ trace(Π_φσ L_u(ρ_σ(T_f)))`, the first-order condition for varying
/// the final time.
pub fn tf_stationarity(
    rho_finals: &[ComplexMatrix],
    members: &[&GateMember],
    model: &LindbladModel,
    u_final: &[f64],
) -> Result<f64> {
    if rho_finals.len() != members.len() {
        return Err(Error::InvalidArgument(format!(
            "{} final states for {} members",
            rho_finals.len(),
            members.len()
        )));
    }
    let mut acc = 0.0;
    for (rho, m) in rho_finals.iter().zip(members) {
        let l = model.apply_lindblad(u_final, rho)?;
        acc += hs_inner(&m.j_final, &l).re;
    }
    Ok(acc)
}

/// One algorithm step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    /// Step index, starting at 1.
    pub ell: usize,
    /// `V(0)` of the step.
    pub v0: f64,
    /// `V(T_f)` of the step.
    pub v_tf: f64,
    /// `|V(T_f) of the previous step − V(0) of this step|`.
    pub handoff_err: Option<f64>,
    pub infidelity: f64,
    pub corrected_infidelity: Option<f64>,
    pub tf: f64,
    /// Projected-gradient residual of the step, see [`projected_residual`].
    pub stat_residual: f64,
    /// L² distance between this step's control and the previous one.
    pub u_l2_change: Option<f64>,
    /// Largest node-to-node increase of `V(t)` during the forward pass
    /// (zero or negative when the pass is monotone). Not written to CSV.
    #[serde(skip)]
    pub v_max_rise: f64,
}

pub const REPORT_COLUMNS: [&str; 9] = [
    "ell",
    "V0",
    "VTf",
    "handoff_err",
    "infidelity",
    "corrected_infidelity",
    "Tf",
    "stat_residual",
    "u_l2_change",
];

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

impl IterationReport {
    fn record(&self) -> [String; 9] {
        [
            self.ell.to_string(),
            format!("{:e}", self.v0),
            format!("{:e}", self.v_tf),
            opt(self.handoff_err),
            format!("{:e}", self.infidelity),
            opt(self.corrected_infidelity),
            format!("{}", self.tf),
            format!("{:e}", self.stat_residual),
            opt(self.u_l2_change),
        ]
    }
}

/// Writes reports as CSV with the fixed column set; absent values are empty.
pub fn write_reports_csv<W: Write>(writer: W, reports: &[IterationReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPORT_COLUMNS)?;
    for r in reports {
        w.write_record(r.record())?;
    }
    w.flush().map_err(|e| Error::io("<reports>", e))?;
    Ok(())
}

/// Largest handoff mismatch over a run.
pub fn epsilon_num(reports: &[IterationReport]) -> f64 {
    reports.iter().filter_map(|r| r.handoff_err).fold(0.0, f64::max)
}
