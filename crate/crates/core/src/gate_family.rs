// SPDX-License-Identifier: Apache-2.0

//! The family of pure-state steering conditions that pins down a gate.
//!
//! For orthonormal sets `{e_i}` and `{f_i}` of size `n̄`, the family holds
//! `n̄²` members indexed by `i`, `ijR` and `ijI` (`i > j`). Member `σ` starts
//! in `|ε_σ⟩⟨ε_σ|` and is steered towards `|φ_σ⟩⟨φ_σ|`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator_algebra::{projector, ComplexMatrix, StateVector, I, ONE};

/// Orthonormality tolerance for the input sets.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Index of one family member; pair indices satisfy `i > j` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaIndex {
    Diag { i: usize },
    RealPair { i: usize, j: usize },
    ImagPair { i: usize, j: usize },
}

impl SigmaIndex {
    pub fn is_diag(&self) -> bool {
        matches!(self, SigmaIndex::Diag { .. })
    }

    /// All members for `n̄` states: diagonal ascending, then real pairs, then
    /// imaginary pairs, pairs in lexicographic order.
    pub fn all(n_bar: usize) -> Vec<SigmaIndex> {
        let mut out: Vec<SigmaIndex> = (0..n_bar).map(|i| SigmaIndex::Diag { i }).collect();
        let pairs: Vec<(usize, usize)> = (0..n_bar).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
        out.extend(pairs.iter().map(|&(i, j)| SigmaIndex::RealPair { i, j }));
        out.extend(pairs.iter().map(|&(i, j)| SigmaIndex::ImagPair { i, j }));
        out
    }
}

impl fmt::Display for SigmaIndex {
    /// 1-based labels: `1`, `21R`, `21I`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SigmaIndex::Diag { i } => write!(f, "{}", i + 1),
            SigmaIndex::RealPair { i, j } => write!(f, "{}{}R", i + 1, j + 1),
            SigmaIndex::ImagPair { i, j } => write!(f, "{}{}I", i + 1, j + 1),
        }
    }
}

/// Gram matrix diagnostics of a vector set.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalityReport {
    pub gram: ComplexMatrix,
    pub max_deviation: f64,
    /// Entry of the Gram matrix with the largest deviation from the identity.
    pub worst: Option<(usize, usize)>,
}

impl OrthonormalityReport {
    pub fn is_orthonormal(&self, tol: f64) -> bool {
        self.max_deviation <= tol
    }
}

pub fn validate_orthonormal(vecs: &[StateVector]) -> OrthonormalityReport {
    let n = vecs.len();
    let mut gram = ComplexMatrix::zeros((n, n));
    let mut max_deviation = 0.0;
    let mut worst = None;
    for i in 0..n {
        for j in 0..n {
            let g = vecs[i].inner(&vecs[j]);
            gram[[i, j]] = g;
            let target = if i == j { ONE } else { num_complex::Complex64::new(0.0, 0.0) };
            let dev = (g - target).norm();
            if dev > max_deviation {
                max_deviation = dev;
                worst = Some((i, j));
            }
        }
    }
    OrthonormalityReport {
        gram,
        max_deviation,
        worst,
    }
}

/// Initial and target vector sets of a gate.
#[derive(Debug, Clone)]
pub struct GateSpec {
    e_vecs: Vec<StateVector>,
    f_vecs: Vec<StateVector>,
}

impl GateSpec {
    pub fn new(e_vecs: Vec<StateVector>, f_vecs: Vec<StateVector>) -> Result<Self> {
        if e_vecs.is_empty() || e_vecs.len() != f_vecs.len() {
            return Err(Error::InvalidArgument(format!(
                "gate needs matching non-empty sets, got {} and {} vectors",
                e_vecs.len(),
                f_vecs.len()
            )));
        }
        let dim = e_vecs[0].dim();
        if let Some(v) = e_vecs.iter().chain(&f_vecs).find(|v| v.dim() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "gate vectors have dimensions {dim} and {}",
                v.dim()
            )));
        }
        for set in [&e_vecs, &f_vecs] {
            let report = validate_orthonormal(set);
            if !report.is_orthonormal(ORTHONORMAL_TOL) {
                let (i, j) = report.worst.unwrap();
                return Err(Error::NotOrthonormal {
                    i,
                    j,
                    overlap: report.gram[[i, j]].norm(),
                });
            }
        }
        Ok(GateSpec { e_vecs, f_vecs })
    }

    pub fn n_bar(&self) -> usize {
        self.e_vecs.len()
    }

    pub fn dim(&self) -> usize {
        self.e_vecs[0].dim()
    }

    pub fn e_vecs(&self) -> &[StateVector] {
        &self.e_vecs
    }

    pub fn f_vecs(&self) -> &[StateVector] {
        &self.f_vecs
    }
}

/// One steering condition.
#[derive(Debug, Clone)]
pub struct GateMember {
    pub sigma: SigmaIndex,
    pub epsilon: StateVector,
    pub phi: StateVector,
    pub rho_init: ComplexMatrix,
    pub j_final: ComplexMatrix,
}

#[derive(Debug, Clone)]
pub struct GateFamily {
    members: Vec<GateMember>,
    diag_only: bool,
}

fn member_vector(set: &[StateVector], sigma: SigmaIndex) -> Result<StateVector> {
    let h = num_complex::Complex64::new(FRAC_1_SQRT_2, 0.0);
    match sigma {
        SigmaIndex::Diag { i } => Ok(set[i].clone()),
        SigmaIndex::RealPair { i, j } => set[i].combine(h, &set[j], h),
        SigmaIndex::ImagPair { i, j } => set[i].combine(h, &set[j], I * FRAC_1_SQRT_2),
    }
}

pub fn build_family(spec: &GateSpec, diag_only: bool) -> Result<GateFamily> {
    let members = SigmaIndex::all(spec.n_bar())
        .into_iter()
        .map(|sigma| {
            let epsilon = member_vector(spec.e_vecs(), sigma)?;
            let phi = member_vector(spec.f_vecs(), sigma)?;
            Ok(GateMember {
                sigma,
                rho_init: projector(&epsilon)?,
                j_final: projector(&phi)?,
                epsilon,
                phi,
            })
        })
        .collect::<Result<_>>()?;
    Ok(GateFamily { members, diag_only })
}

impl GateFamily {
    pub fn diag_only(&self) -> bool {
        self.diag_only
    }

    pub fn with_diag_only(mut self, diag_only: bool) -> Self {
        self.diag_only = diag_only;
        self
    }

    /// Every member, regardless of `diag_only`.
    pub fn all(&self) -> &[GateMember] {
        &self.members
    }

    /// Members entering the Lyapunov sum.
    pub fn active(&self) -> Vec<&GateMember> {
        self.members
            .iter()
            .filter(|m| !self.diag_only || m.sigma.is_diag())
            .collect()
    }

    /// Members outside the active set.
    pub fn inactive(&self) -> Vec<&GateMember> {
        self.members
            .iter()
            .filter(|m| self.diag_only && !m.sigma.is_diag())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn n_active(&self) -> usize {
        self.active().len()
    }

    pub fn dim(&self) -> usize {
        self.members[0].rho_init.nrows()
    }
}
