// SPDX-License-Identifier: Apache-2.0

//! Dense complex matrices, state vectors and the bosonic/qubit operators the
//! gate models are assembled from.
//!
//! Matrices are `ndarray::Array2<Complex64>` in standard (row-major) layout
//! throughout the crate. [`SparseOp`] is a compressed-row view of an operator
//! used on the hot path: the jump and Hamiltonian operators of the bosonic
//! models are banded, so applying them to a dense density matrix row by row is
//! much cheaper than a dense product while staying exact.

use ndarray::{Array1, Array2, ArrayBase, Data, Ix2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = Array2<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default fraction of the squared norm a truncated coherent state must keep.
pub const DEFAULT_TRUNCATION_THRESHOLD: f64 = 0.99;

const NORMALIZED_TOL: f64 = 1e-9;

/// A pure state in a finite Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(Array1<Complex64>);

impl StateVector {
    pub fn new(amplitudes: Array1<Complex64>) -> Self {
        StateVector(amplitudes)
    }

    pub fn from_vec(amplitudes: Vec<Complex64>) -> Self {
        StateVector(Array1::from(amplitudes))
    }

    /// Fock/computational basis vector `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut v = Array1::zeros(dim);
        v[index] = ONE;
        Ok(StateVector(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &Array1<Complex64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::NotNormalized { norm: n });
        }
        Ok(StateVector(self.0.mapv(|c| c / n)))
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Linear combination `a·self + b·other`.
    pub fn combine(&self, a: Complex64, other: &StateVector, b: Complex64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(StateVector(&self.0 * a + &other.0 * b))
    }

    pub fn kron(&self, other: &StateVector) -> StateVector {
        let mut out = Vec::with_capacity(self.dim() * other.dim());
        for a in self.0.iter() {
            for b in other.0.iter() {
                out.push(a * b);
            }
        }
        StateVector::from_vec(out)
    }

    /// `⟨self|m|self⟩`.
    pub fn expectation(&self, m: &ComplexMatrix) -> Complex64 {
        let mv = m.dot(&self.0);
        self.inner(&StateVector(mv))
    }
}

/// Photon-number parity of a cat state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

pub fn identity(n: usize) -> ComplexMatrix {
    Array2::from_diag_elem(n, ONE)
}

/// Truncated bosonic annihilation operator, `a|k⟩ = √k |k−1⟩`.
pub fn annihilation(n_levels: usize) -> Result<ComplexMatrix> {
    if n_levels == 0 {
        return Err(Error::InvalidArgument(
            "annihilation operator needs at least one level".into(),
        ));
    }
    let mut a = Array2::zeros((n_levels, n_levels));
    for k in 1..n_levels {
        a[[k - 1, k]] = Complex64::new((k as f64).sqrt(), 0.0);
    }
    Ok(a)
}

/// Truncated number operator `a†a`.
pub fn number_operator(n_levels: usize) -> Result<ComplexMatrix> {
    if n_levels == 0 {
        return Err(Error::InvalidArgument(
            "number operator needs at least one level".into(),
        ));
    }
    Ok(Array2::from_diag(&Array1::from_iter(
        (0..n_levels).map(|k| Complex64::new(k as f64, 0.0)),
    )))
}

/// Coherent state `|α⟩` truncated to `n_levels` and renormalized.
pub fn coherent_state(alpha: f64, n_levels: usize) -> Result<StateVector> {
    coherent_state_with_threshold(alpha, n_levels, DEFAULT_TRUNCATION_THRESHOLD)
}

/// As [`coherent_state`], rejecting truncations that keep less than
/// `threshold` of the squared norm.
pub fn coherent_state_with_threshold(
    alpha: f64,
    n_levels: usize,
    threshold: f64,
) -> Result<StateVector> {
    if n_levels == 0 {
        return Err(Error::InvalidArgument(
            "coherent state needs at least one level".into(),
        ));
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha = {alpha}")));
    }
    let prefactor = (-alpha * alpha / 2.0).exp();
    let mut amps = Vec::with_capacity(n_levels);
    // αⁿ/√(n!) built incrementally to avoid factorial overflow.
    let mut term = 1.0;
    for n in 0..n_levels {
        if n > 0 {
            term *= alpha / (n as f64).sqrt();
        }
        amps.push(Complex64::new(prefactor * term, 0.0));
    }
    let retained: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
    if retained < threshold {
        return Err(Error::Truncation {
            n_levels,
            retained,
            threshold,
        });
    }
    StateVector::from_vec(amps).normalized()
}

/// Normalized cat state `|α⟩ ± |−α⟩`.
pub fn cat_state(alpha: f64, parity: Parity, n_levels: usize) -> Result<StateVector> {
    let plus = coherent_state(alpha, n_levels)?;
    let minus = coherent_state(-alpha, n_levels)?;
    let sign = match parity {
        Parity::Even => ONE,
        Parity::Odd => -ONE,
    };
    let mut cat = plus.combine(ONE, &minus, sign)?;
    // The combination cancels the wrong-parity amplitudes up to rounding.
    let keep = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    for (n, c) in cat.0.iter_mut().enumerate() {
        if n % 2 != keep {
            *c = ZERO;
        }
    }
    cat.normalized()
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (m, n) = a.dim();
    let (p, q) = b.dim();
    let mut out = Array2::zeros((m * p, n * q));
    for i in 0..m {
        for j in 0..n {
            let aij = a[[i, j]];
            if aij == ZERO {
                continue;
            }
            for k in 0..p {
                for l in 0..q {
                    out[[i * p + k, j * q + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// `|ψ⟩⟨ψ|` for a normalized `ψ`.
pub fn projector(psi: &StateVector) -> Result<ComplexMatrix> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > NORMALIZED_TOL {
        return Err(Error::NotNormalized { norm });
    }
    let n = psi.dim();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = psi.0[i] * psi.0[j].conj();
        }
    }
    Ok(out)
}

fn check_square_pair(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if !a.is_square() || a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "expected equal square matrices, got {:?} and {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// `AB − BA`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_square_pair(a, b)?;
    Ok(a.dot(b) - b.dot(a))
}

/// `AB + BA`.
pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_square_pair(a, b)?;
    Ok(a.dot(b) + b.dot(a))
}

/// Conjugate transpose.
pub fn dagger(m: &ComplexMatrix) -> ComplexMatrix {
    m.t().mapv(|c| c.conj())
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diag().iter().sum()
}

/// `trace(AB)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let (m, n) = a.dim();
    let mut acc = ZERO;
    for i in 0..m {
        for j in 0..n {
            acc += a[[i, j]] * b[[j, i]];
        }
    }
    acc
}

/// Hilbert–Schmidt product `trace(A†B)`. Equals `trace(AB)` when `A` is Hermitian.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    Zip::from(a).and(b).fold(ZERO, |acc, x, y| acc + x.conj() * y)
}

pub fn frobenius_norm(m: &ComplexMatrix) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Largest entry of `|M − M†|`.
pub fn hermiticity_error(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    if !m.is_square() {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

/// In-place `M ← (M + M†)/2`.
pub fn hermitize(m: &mut ComplexMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[[i, i]].im = 0.0;
        for j in (i + 1)..n {
            let avg = (m[[i, j]] + m[[j, i]].conj()) * 0.5;
            m[[i, j]] = avg;
            m[[j, i]] = avg.conj();
        }
    }
}

pub fn all_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// Compressed-row copy of a square operator, holding only its nonzero entries.
///
/// Products against dense matrices cost `O(nnz·n)` instead of `O(n³)`. For a
/// dense operator the cost matches a naive dense product, so every operator
/// goes through this path.
#[derive(Debug, Clone)]
pub struct SparseOp {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseOp {
    pub fn from_dense(m: &ComplexMatrix) -> Self {
        assert!(m.is_square(), "SparseOp requires a square matrix");
        let n = m.nrows();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for j in 0..n {
                let v = m[[i, j]];
                if v != ZERO {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        SparseOp {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut out = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[[i, self.cols[p]]] = self.vals[p];
            }
        }
        out
    }

    /// `out += coeff · S · D`.
    pub fn mul_left_acc<S: Data<Elem = Complex64>>(
        &self,
        coeff: Complex64,
        d: &ArrayBase<S, Ix2>,
        out: &mut ComplexMatrix,
    ) {
        let n = self.n;
        let d = d.as_slice().expect("standard layout");
        let out = out.as_slice_mut().expect("standard layout");
        for i in 0..n {
            let out_row = &mut out[i * n..(i + 1) * n];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let s = coeff * self.vals[p];
                let k = self.cols[p];
                let d_row = &d[k * n..(k + 1) * n];
                for (o, x) in out_row.iter_mut().zip(d_row) {
                    *o += s * x;
                }
            }
        }
    }

    /// `out += coeff · D · S†`.
    pub fn mul_right_adjoint_acc<S: Data<Elem = Complex64>>(
        &self,
        coeff: Complex64,
        d: &ArrayBase<S, Ix2>,
        out: &mut ComplexMatrix,
    ) {
        let n = self.n;
        let d = d.as_slice().expect("standard layout");
        let out = out.as_slice_mut().expect("standard layout");
        for i in 0..n {
            let d_row = &d[i * n..(i + 1) * n];
            let out_row = &mut out[i * n..(i + 1) * n];
            for (j, o) in out_row.iter_mut().enumerate() {
                let mut acc = ZERO;
                for p in self.row_ptr[j]..self.row_ptr[j + 1] {
                    acc += d_row[self.cols[p]] * self.vals[p].conj();
                }
                *o += coeff * acc;
            }
        }
    }

    /// `S · D`.
    pub fn mul_left<S: Data<Elem = Complex64>>(&self, d: &ArrayBase<S, Ix2>) -> ComplexMatrix {
        let mut out = Array2::zeros((self.n, self.n));
        self.mul_left_acc(ONE, d, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, col: usize) -> ComplexMatrix {
        Array2::from_shape_fn((r, col), |_| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_state(rng: &mut ChaCha8Rng, n: usize) -> StateVector {
        StateVector::from_vec(
            (0..n)
                .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        )
        .normalized()
        .unwrap()
    }

    #[test]
    fn annihilation_small_cases() {
        let a2 = annihilation(2).unwrap();
        assert_eq!(a2[[0, 1]], ONE);
        assert_eq!(a2[[0, 0]], ZERO);
        assert_eq!(a2[[1, 0]], ZERO);
        assert_eq!(a2[[1, 1]], ZERO);
        let a3 = annihilation(3).unwrap();
        assert!((a3[[1, 2]].re - 1.41421356).abs() < 1e-8);
        assert!(annihilation(0).is_err());
    }

    #[test]
    fn number_operator_from_annihilation() {
        let a = annihilation(20).unwrap();
        let n = dagger(&a).dot(&a);
        for k in 0..20 {
            assert!((n[[k, k]] - c(k as f64, 0.0)).norm() < 1e-12);
        }
        assert!((&n - &number_operator(20).unwrap()).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn canonical_commutator_except_last_level() {
        let n = 8;
        let a = annihilation(n).unwrap();
        let comm = commutator(&a, &dagger(&a)).unwrap();
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let expected = if i == j { ONE } else { ZERO };
                assert!((comm[[i, j]] - expected).norm() < 1e-12);
            }
        }
        assert!((comm[[n - 1, n - 1]] - c(-(n as f64 - 1.0), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn coherent_state_vacuum_and_truncation() {
        let vac = coherent_state(0.0, 5).unwrap();
        assert_eq!(vac.amplitudes()[0], ONE);
        assert!(vac.amplitudes().iter().skip(1).all(|z| *z == ZERO));

        // Direct series: Σ_{n<20} e^{-4} 4ⁿ/n!.
        let mut series = 0.0;
        let mut term = 1.0;
        for n in 0..20 {
            if n > 0 {
                term *= 4.0 / n as f64;
            }
            series += (-4.0f64).exp() * term;
        }
        assert!((series - 1.0).abs() < 1e-6);
        assert!(coherent_state(2.0, 20).is_ok());

        match coherent_state(2.0, 3) {
            Err(Error::Truncation { retained, .. }) => {
                assert!((retained - 13.0 * (-4.0f64).exp()).abs() < 1e-12);
                assert!((retained - 0.238).abs() < 1e-3);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn cat_states_have_definite_parity() {
        let even = cat_state(2.0, Parity::Even, 20).unwrap();
        let odd = cat_state(2.0, Parity::Odd, 20).unwrap();
        assert_eq!(even.amplitudes()[1], ZERO);
        assert_eq!(odd.amplitudes()[0], ZERO);
        assert!((even.norm() - 1.0).abs() < 1e-12);
        assert!((odd.norm() - 1.0).abs() < 1e-12);
        assert!(even.inner(&odd).norm() < 1e-14);
    }

    #[test]
    fn kron_identity_and_definition() {
        let i4 = kron(&identity(2), &identity(2));
        assert_eq!(i4, identity(4));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 2, 2);
        let b = random_matrix(&mut rng, 3, 3);
        let k = kron(&a, &b);
        assert_eq!(k.dim(), (6, 6));
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..3 {
                    for q in 0..3 {
                        assert_eq!(k[[i * 3 + p, j * 3 + q]], a[[i, j]] * b[[p, q]]);
                    }
                }
            }
        }
    }

    #[test]
    fn kron_mixed_product_on_vectors_and_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 2, 2);
        let b = random_matrix(&mut rng, 3, 3);
        let x = random_state(&mut rng, 2);
        let y = random_state(&mut rng, 3);
        let lhs = kron(&a, &b).dot(x.kron(&y).amplitudes());
        let rhs = StateVector::new(a.dot(x.amplitudes())).kron(&StateVector::new(b.dot(y.amplitudes())));
        for (l, r) in lhs.iter().zip(rhs.amplitudes().iter()) {
            assert!((l - r).norm() < 1e-12);
        }

        let cm = random_matrix(&mut rng, 2, 2);
        let dm = random_matrix(&mut rng, 3, 3);
        let lhs = kron(&a, &b).dot(&kron(&cm, &dm));
        let rhs = kron(&a.dot(&cm), &b.dot(&dm));
        assert!(max_abs(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn projector_examples() {
        let p = projector(&StateVector::from_vec(vec![ONE, ZERO])).unwrap();
        assert_eq!(p, ndarray::array![[ONE, ZERO], [ZERO, ZERO]]);

        let s = 1.0 / 2f64.sqrt();
        let p = projector(&StateVector::from_vec(vec![c(s, 0.0), c(0.0, s)])).unwrap();
        let expected = ndarray::array![[c(0.5, 0.0), c(0.0, -0.5)], [c(0.0, 0.5), c(0.5, 0.0)]];
        assert!(max_abs(&(p - expected)) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = random_state(&mut rng, 7);
        let p = projector(&psi).unwrap();
        assert!((trace(&p) - ONE).norm() < 1e-12);
        assert!(max_abs(&(p.dot(&p) - &p)) <= 1e-12);
        assert!(hermiticity_error(&p) <= 1e-14);

        let unnormalized = StateVector::from_vec(vec![ONE, ONE]);
        assert!(matches!(projector(&unnormalized), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn commutator_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 4, 4);
        let b = random_matrix(&mut rng, 4, 4);
        let id = identity(4);
        assert!(max_abs(&commutator(&id, &a).unwrap()) == 0.0);
        assert!(max_abs(&(anticommutator(&id, &a).unwrap() - &a * c(2.0, 0.0))) < 1e-15);
        let ab = commutator(&a, &b).unwrap();
        let ba = commutator(&b, &a).unwrap();
        assert!(max_abs(&(ab + ba)) < 1e-14);
        assert!(matches!(
            commutator(&a, &identity(3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn sparse_products_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = random_matrix(&mut rng, 5, 5);
        s[[0, 3]] = ZERO;
        s[[4, 1]] = ZERO;
        let d = random_matrix(&mut rng, 5, 5);
        let op = SparseOp::from_dense(&s);
        assert_eq!(op.nnz(), 23);
        assert_eq!(op.to_dense(), s);

        let coeff = c(0.3, -1.2);
        let mut out = Array2::zeros((5, 5));
        op.mul_left_acc(coeff, &d, &mut out);
        assert!(max_abs(&(out - s.dot(&d) * coeff)) < 1e-13);

        let mut out = Array2::zeros((5, 5));
        op.mul_right_adjoint_acc(coeff, &d, &mut out);
        assert!(max_abs(&(out - d.dot(&dagger(&s)) * coeff)) < 1e-13);
    }

    #[test]
    fn trace_helpers() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_matrix(&mut rng, 4, 4);
        let b = random_matrix(&mut rng, 4, 4);
        assert!((trace_product(&a, &b) - trace(&a.dot(&b))).norm() < 1e-13);
        assert!((hs_inner(&a, &b) - trace(&dagger(&a).dot(&b))).norm() < 1e-13);
        let mut h = a.clone();
        hermitize(&mut h);
        assert!(hermiticity_error(&h) == 0.0);
    }
}
