// SPDX-License-Identifier: Apache-2.0

//! Cat-qubit gate presets and the constant adiabatic control.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate_family::GateSpec;
use crate::integrator::{ControlSignal, TimeGrid};
use crate::lindblad::LindbladModel;
use crate::operator_algebra::{
    annihilation, cat_state, dagger, identity, kron, number_operator, ComplexMatrix, Parity, StateVector, ONE,
};

/// Z gate on a dissipative cat qubit: `C⁺_α ↔ C⁻_α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZGatePreset {
    pub alpha: f64,
    pub n_fock: usize,
    pub kappa2: f64,
    pub kappa1: f64,
}

impl Default for ZGatePreset {
    fn default() -> Self {
        ZGatePreset {
            alpha: 2.0,
            n_fock: 20,
            kappa2: 1.0,
            kappa1: 0.01,
        }
    }
}

impl ZGatePreset {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa2 > 0.0 && self.kappa2.is_finite()) {
            return Err(Error::InvalidArgument(format!("kappa2 must be > 0, got {}", self.kappa2)));
        }
        if !(self.kappa1 >= 0.0 && self.kappa1.is_finite()) {
            return Err(Error::InvalidArgument(format!("kappa1 must be >= 0, got {}", self.kappa1)));
        }
        if !self.alpha.is_finite() || self.n_fock < 2 {
            return Err(Error::InvalidArgument(format!(
                "need finite alpha and at least 2 Fock levels, got alpha = {}, n = {}",
                self.alpha, self.n_fock
            )));
        }
        Ok(())
    }
}

fn scaled(m: &ComplexMatrix, s: f64) -> ComplexMatrix {
    m * Complex64::new(s, 0.0)
}

/// `a² − α² I` on `n` levels.
fn two_photon(alpha: f64, n: usize) -> Result<ComplexMatrix> {
    let a = annihilation(n)?;
    Ok(a.dot(&a) - identity(n) * Complex64::new(alpha * alpha, 0.0))
}

/// `H₀ = 0`, `H₁ = a + a†`, jumps `√κ₂(a² − α²)` and `√κ₁ a`.
pub fn build_zgate(preset: &ZGatePreset) -> Result<(LindbladModel, GateSpec)> {
    preset.validate()?;
    let n = preset.n_fock;
    let a = annihilation(n)?;
    let h1 = &a + &dagger(&a);
    let jumps = vec![
        scaled(&two_photon(preset.alpha, n)?, preset.kappa2.sqrt()),
        scaled(&a, preset.kappa1.sqrt()),
    ];
    let model = LindbladModel::new(Array2::zeros((n, n)), vec![h1], jumps)?;
    let plus = cat_state(preset.alpha, Parity::Even, n)?;
    let minus = cat_state(preset.alpha, Parity::Odd, n)?;
    let spec = GateSpec::new(vec![plus.clone(), minus.clone()], vec![minus, plus])?;
    Ok((model, spec))
}

/// CNOT between two cat qubits mediated by an ancillary qubit.
///
/// Subsystem order is control ⊗ target ⊗ ancilla; the ancilla ground state
/// `|g⟩` is index 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CnotPreset {
    pub alpha2: f64,
    /// Fock levels per cavity.
    pub n_fock: usize,
    pub g2: f64,
    pub k2: f64,
    pub k1: f64,
}

impl Default for CnotPreset {
    fn default() -> Self {
        CnotPreset {
            alpha2: 4.0,
            n_fock: 17,
            g2: 10.0,
            k2: 1.0,
            k1: 0.001,
        }
    }
}

/// Fock truncation used by the quick CNOT profile.
pub const CNOT_DESK_N_FOCK: usize = 10;

impl CnotPreset {
    /// Reduced truncation (`n = 10`, dimension 200) for quick runs.
    pub fn desk() -> Self {
        CnotPreset {
            n_fock: CNOT_DESK_N_FOCK,
            ..Self::default()
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha2.sqrt()
    }

    pub fn dim(&self) -> usize {
        self.n_fock * self.n_fock * 2
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha2", self.alpha2), ("g2", self.g2), ("k2", self.k2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(Error::InvalidArgument(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if self.n_fock < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 Fock levels, got {}", self.n_fock)));
        }
        Ok(())
    }
}

/// `|0_L⟩ = (C⁺ + C⁻)/√2` and `|1_L⟩ = (C⁺ − C⁻)/√2`, the orthonormal states
/// closest to `|α⟩` and `|−α⟩`.
pub fn logical_states(alpha: f64, n: usize) -> Result<(StateVector, StateVector)> {
    let plus = cat_state(alpha, Parity::Even, n)?;
    let minus = cat_state(alpha, Parity::Odd, n)?;
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Ok((plus.combine(h, &minus, h)?, plus.combine(h, &minus, -h)?))
}

/// `H₁ = (a_co + a_co† − 2α)⊗(a_ta†a_ta − α²)⊗I`,
/// `H₀ = g₂[(a_co² − α²)⊗I⊗|e⟩⟨g| + h.c.]`, jumps `√k₂(a_co² − α²)`,
/// `√k₁ a_co` and `√k₁ a_ta`.
pub fn build_cnot(preset: &CnotPreset) -> Result<(LindbladModel, GateSpec)> {
    preset.validate()?;
    let n = preset.n_fock;
    let alpha = preset.alpha();
    let a = annihilation(n)?;
    let id_n = identity(n);
    let id_q = identity(2);
    let mut e_g = Array2::zeros((2, 2));
    e_g[[1, 0]] = ONE;

    let x_co = &a + &dagger(&a) - identity(n) * Complex64::new(2.0 * alpha, 0.0);
    let n_ta = number_operator(n)? - identity(n) * Complex64::new(preset.alpha2, 0.0);
    let h1 = kron(&kron(&x_co, &n_ta), &id_q);

    let coupling = kron(&kron(&two_photon(alpha, n)?, &id_n), &e_g);
    let h0 = scaled(&(&coupling + &dagger(&coupling)), preset.g2);

    let jumps = vec![
        scaled(&kron(&kron(&two_photon(alpha, n)?, &id_n), &id_q), preset.k2.sqrt()),
        scaled(&kron(&kron(&a, &id_n), &id_q), preset.k1.sqrt()),
        scaled(&kron(&kron(&id_n, &a), &id_q), preset.k1.sqrt()),
    ];
    let model = LindbladModel::new(h0, vec![h1], jumps)?;

    let (zero, one) = logical_states(alpha, n)?;
    let g = StateVector::basis(2, 0)?;
    let ket = |c: &StateVector, t: &StateVector| c.kron(t).kron(&g);
    let e = vec![ket(&zero, &zero), ket(&zero, &one), ket(&one, &zero), ket(&one, &one)];
    let f = vec![ket(&zero, &zero), ket(&zero, &one), ket(&one, &one), ket(&one, &zero)];
    Ok((model, GateSpec::new(e, f)?))
}

/// Bytes needed to store the observables of one backward sweep.
pub fn storage_estimate_bytes(dim: usize, n_members: usize, n_sim: usize, checkpoint_stride: usize) -> u64 {
    let stride = checkpoint_stride.max(1);
    // checkpoints, plus one replay window when they are sparse
    let samples = if stride == 1 { n_sim + 1 } else { n_sim / stride + 2 + stride - 1 };
    (n_members as u64) * (samples as u64) * (dim as u64).pow(2) * 16
}

/// Smallest checkpoint stride keeping the observable storage within `budget`.
pub fn stride_for_budget(dim: usize, n_members: usize, n_sim: usize, budget: u64) -> usize {
    (1..=n_sim)
        .find(|&c| storage_estimate_bytes(dim, n_members, n_sim, c) <= budget)
        .unwrap_or(n_sim)
}

/// `u_ad = π/(4 T_f α)`.
pub fn adiabatic_level(tf: f64, alpha: f64) -> Result<f64> {
    if !(tf > 0.0 && tf.is_finite()) {
        return Err(Error::InvalidArgument(format!("gate time must be > 0, got {tf}")));
    }
    if !(alpha != 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be nonzero, got {alpha}")));
    }
    Ok(PI / (4.0 * tf * alpha))
}

/// Constant adiabatic control on `[0, T_f]`.
pub fn adiabatic_control(tf: f64, alpha: f64, n_steps: usize) -> Result<ControlSignal> {
    let level = adiabatic_level(tf, alpha)?;
    ControlSignal::constant(TimeGrid::new(0.0, tf, n_steps)?, &[level])
}
