// SPDX-License-Identifier: Apache-2.0

//! The controlled Lindblad generator `L_u`, its Hilbert–Schmidt adjoint `L*_u`,
//! and the per-channel pieces `L_0` (drift with dissipators) and
//! `L_k(ρ) = −i[H_k, ρ]`.
//!
//! Superoperators are applied matrix-free. With `K₀ = −iH₀ − ½ Σ L_q†L_q`:
//!
//! ```text
//! L_u(ρ)  = K₀ρ + ρK₀† + Σ_q L_q ρ L_q† − i Σ_k u_k [H_k, ρ]
//! L*_u(J) = K₀†J + JK₀ + Σ_q L_q† J L_q + i Σ_k u_k [H_k, J]
//! ```
//!
//! The `*_hermitian` variants assume a Hermitian argument and compute one
//! half-product `M`, returning `M + M†` plus the sandwich terms. The
//! integrators only ever feed them Hermitian matrices.

use ndarray::{Array2, ArrayBase, Data, Ix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator_algebra::{
    dagger, hermiticity_error, max_abs, ComplexMatrix, SparseOp, I, ONE,
};

const HERMITIAN_TOL: f64 = 1e-12;

/// Drift Hamiltonian, control Hamiltonians and jump operators of a controlled
/// Lindblad equation, with the products every application needs precomputed.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    dim: usize,
    h0: ComplexMatrix,
    controls: Vec<ComplexMatrix>,
    jumps: Vec<ComplexMatrix>,
    k0: SparseOp,
    k0_dag: SparseOp,
    control_ops: Vec<SparseOp>,
    jump_ops: Vec<SparseOp>,
    jump_dag_ops: Vec<SparseOp>,
}

fn check_operator(name: &str, m: &ComplexMatrix, n: usize, hermitian: bool) -> Result<()> {
    if m.dim() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "{name} is {:?}, expected {n}x{n}",
            m.dim()
        )));
    }
    if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("{name} has non-finite entries")));
    }
    if hermitian {
        let err = hermiticity_error(m);
        if err > HERMITIAN_TOL * max_abs(m).max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "{name} is not Hermitian (|M - M†| = {err:.3e})"
            )));
        }
    }
    Ok(())
}

fn symmetrized(m: &ComplexMatrix) -> ComplexMatrix {
    (m + &dagger(m)) * Complex64::new(0.5, 0.0)
}

impl LindbladModel {
    pub fn new(
        h0: ComplexMatrix,
        controls: Vec<ComplexMatrix>,
        jumps: Vec<ComplexMatrix>,
    ) -> Result<Self> {
        if !h0.is_square() || h0.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "drift Hamiltonian is {:?}",
                h0.dim()
            )));
        }
        let dim = h0.nrows();
        check_operator("H0", &h0, dim, true)?;
        for (k, h) in controls.iter().enumerate() {
            check_operator(&format!("H{}", k + 1), h, dim, true)?;
        }
        for (q, l) in jumps.iter().enumerate() {
            check_operator(&format!("L{}", q + 1), l, dim, false)?;
        }

        let h0 = symmetrized(&h0);
        let controls: Vec<_> = controls.iter().map(symmetrized).collect();
        let jumps: Vec<_> = jumps.into_iter().map(|l| l.as_standard_layout().into_owned()).collect();

        let mut k0 = &h0 * (-I);
        for l in &jumps {
            let ldl = dagger(l).dot(l);
            k0 = k0 - ldl * Complex64::new(0.5, 0.0);
        }
        let k0_dag = dagger(&k0);

        Ok(LindbladModel {
            dim,
            k0: SparseOp::from_dense(&k0),
            k0_dag: SparseOp::from_dense(&k0_dag),
            control_ops: controls.iter().map(SparseOp::from_dense).collect(),
            jump_ops: jumps.iter().map(SparseOp::from_dense).collect(),
            jump_dag_ops: jumps.iter().map(|l| SparseOp::from_dense(&dagger(l))).collect(),
            h0,
            controls,
            jumps,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of control channels `m`.
    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    /// Number of jump operators `p`.
    pub fn n_jumps(&self) -> usize {
        self.jumps.len()
    }

    pub fn drift_hamiltonian(&self) -> &ComplexMatrix {
        &self.h0
    }

    pub fn control_hamiltonians(&self) -> &[ComplexMatrix] {
        &self.controls
    }

    pub fn jump_operators(&self) -> &[ComplexMatrix] {
        &self.jumps
    }

    fn check_state(&self, x: &ComplexMatrix) -> Result<()> {
        if x.dim() != (self.dim, self.dim) {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {:?}, model dimension is {}",
                x.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    fn check_controls(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.controls.len() {
            return Err(Error::DimensionMismatch(format!(
                "control vector has {} entries, model has {} channels",
                u.len(),
                self.controls.len()
            )));
        }
        Ok(())
    }

    fn zeros(&self) -> ComplexMatrix {
        Array2::zeros((self.dim, self.dim))
    }

    /// `L₀(ρ) = −i[H₀, ρ] + Σ_q (L_q ρ L_q† − ½{L_q†L_q, ρ})`.
    pub fn apply_drift(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_state(rho)?;
        let rho = rho.as_standard_layout();
        let mut out = self.zeros();
        self.k0.mul_left_acc(ONE, &rho, &mut out);
        self.k0.mul_right_adjoint_acc(ONE, &rho, &mut out);
        self.add_sandwiches(ONE, &rho, &mut out);
        Ok(out)
    }

    /// `L_k(ρ) = −i[H_k, ρ]` for the zero-based control `channel`.
    pub fn apply_control_superop(&self, channel: usize, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_state(rho)?;
        let op = self.control_ops.get(channel).ok_or(Error::ChannelOutOfRange {
            channel,
            available: self.controls.len(),
        })?;
        let rho = rho.as_standard_layout();
        let mut out = self.zeros();
        op.mul_left_acc(-I, &rho, &mut out);
        op.mul_right_adjoint_acc(I, &rho, &mut out);
        Ok(out)
    }

    /// `L_u(ρ) = L₀(ρ) + Σ_k u_k L_k(ρ)`.
    pub fn apply_lindblad(&self, u: &[f64], rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_controls(u)?;
        let mut out = self.apply_drift(rho)?;
        let rho = rho.as_standard_layout();
        for (op, &uk) in self.control_ops.iter().zip(u) {
            if uk != 0.0 {
                op.mul_left_acc(-I * uk, &rho, &mut out);
                op.mul_right_adjoint_acc(I * uk, &rho, &mut out);
            }
        }
        Ok(out)
    }

    /// `L*_u(J) = i[H₀ + Σ_k u_k H_k, J] + Σ_q (L_q† J L_q − ½{L_q†L_q, J})`.
    pub fn apply_adjoint(&self, u: &[f64], j: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_controls(u)?;
        self.check_state(j)?;
        let j = j.as_standard_layout();
        let mut out = self.zeros();
        self.k0_dag.mul_left_acc(ONE, &j, &mut out);
        self.k0_dag.mul_right_adjoint_acc(ONE, &j, &mut out);
        self.add_adjoint_sandwiches(ONE, &j, &mut out);
        for (op, &uk) in self.control_ops.iter().zip(u) {
            if uk != 0.0 {
                op.mul_left_acc(I * uk, &j, &mut out);
                op.mul_right_adjoint_acc(-I * uk, &j, &mut out);
            }
        }
        Ok(out)
    }

    fn add_sandwiches<S: Data<Elem = Complex64>>(&self, coeff: Complex64, rho: &ArrayBase<S, Ix2>, out: &mut ComplexMatrix) {
        for l in &self.jump_ops {
            let x = l.mul_left(rho);
            l.mul_right_adjoint_acc(coeff, &x, out);
        }
    }

    fn add_adjoint_sandwiches<S: Data<Elem = Complex64>>(&self, coeff: Complex64, j: &ArrayBase<S, Ix2>, out: &mut ComplexMatrix) {
        for ld in &self.jump_dag_ops {
            let x = ld.mul_left(j);
            ld.mul_right_adjoint_acc(coeff, &x, out);
        }
    }

    /// `drift_scale·L₀(ρ) + Σ_k u_k L_k(ρ)` for Hermitian `ρ` in standard layout.
    pub fn generator_hermitian(&self, drift_scale: f64, u: &[f64], rho: &ComplexMatrix) -> ComplexMatrix {
        debug_assert_eq!(u.len(), self.controls.len());
        let mut half = self.zeros();
        self.k0.mul_left_acc(Complex64::new(drift_scale, 0.0), rho, &mut half);
        for (op, &uk) in self.control_ops.iter().zip(u) {
            if uk != 0.0 {
                op.mul_left_acc(-I * uk, rho, &mut half);
            }
        }
        let mut out = plus_adjoint(&half);
        if drift_scale != 0.0 {
            self.add_sandwiches(Complex64::new(drift_scale, 0.0), rho, &mut out);
        }
        out
    }

    /// `drift_scale·L*₀(J) + Σ_k u_k L*_k(J)` for Hermitian `J` in standard layout.
    pub fn adjoint_generator_hermitian(&self, drift_scale: f64, u: &[f64], j: &ComplexMatrix) -> ComplexMatrix {
        debug_assert_eq!(u.len(), self.controls.len());
        let mut half = self.zeros();
        self.k0_dag.mul_left_acc(Complex64::new(drift_scale, 0.0), j, &mut half);
        for (op, &uk) in self.control_ops.iter().zip(u) {
            if uk != 0.0 {
                op.mul_left_acc(I * uk, j, &mut half);
            }
        }
        let mut out = plus_adjoint(&half);
        if drift_scale != 0.0 {
            self.add_adjoint_sandwiches(Complex64::new(drift_scale, 0.0), j, &mut out);
        }
        out
    }

    /// `L₀(ρ)` and every `L_k(ρ)` for Hermitian `ρ`; the closed-loop pass
    /// needs each piece for the feedback and then reuses them as the first
    /// Runge–Kutta stage.
    pub fn split_terms_hermitian(&self, rho: &ComplexMatrix) -> (ComplexMatrix, Vec<ComplexMatrix>) {
        let mut half = self.zeros();
        self.k0.mul_left_acc(ONE, rho, &mut half);
        let mut drift = plus_adjoint(&half);
        self.add_sandwiches(ONE, rho, &mut drift);
        let controls = self
            .control_ops
            .iter()
            .map(|op| {
                let mut half = self.zeros();
                op.mul_left_acc(-I, rho, &mut half);
                plus_adjoint(&half)
            })
            .collect();
        (drift, controls)
    }
}

/// `M + M†`.
fn plus_adjoint(m: &ComplexMatrix) -> ComplexMatrix {
    let n = m.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for k in 0..n {
            out[[i, k]] = m[[i, k]] + m[[k, i]].conj();
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        Array2::from_shape_fn((n, n), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        let m = random_matrix(rng, n);
        (&m + &dagger(&m)) * Complex64::new(0.5, 0.0)
    }

    pub fn random_density(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        let m = random_matrix(rng, n);
        let p = m.dot(&dagger(&m));
        let tr = crate::operator_algebra::trace(&p);
        p / tr
    }

    pub fn random_model(rng: &mut ChaCha8Rng, n: usize, m: usize, p: usize) -> LindbladModel {
        let h0 = random_hermitian(rng, n);
        let controls = (0..m).map(|_| random_hermitian(rng, n)).collect();
        let jumps = (0..p)
            .map(|_| random_matrix(rng, n) * Complex64::new(0.5, 0.0))
            .collect();
        LindbladModel::new(h0, controls, jumps).unwrap()
    }

    pub fn seeded(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }
}
