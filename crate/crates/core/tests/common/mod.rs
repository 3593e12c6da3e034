// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use lyagate::lindblad::LindbladModel;
use lyagate::operator_algebra::{dagger, trace, ComplexMatrix};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    Array2::from_shape_fn((n, n), |_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let m = random_matrix(rng, n);
    (&m + &dagger(&m)) * Complex64::new(0.5, 0.0)
}

pub fn random_density(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let m = random_matrix(rng, n);
    let p = m.dot(&dagger(&m));
    let tr = trace(&p);
    p / tr
}

/// Observable with spectrum in `[0, 1]`: a random rank-`r` projector.
pub fn random_projector(rng: &mut ChaCha8Rng, n: usize, r: usize) -> ComplexMatrix {
    // Gram-Schmidt on random columns
    let mut cols: Vec<Vec<Complex64>> = Vec::new();
    while cols.len() < r {
        let mut v: Vec<Complex64> =
            (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        for c in &cols {
            let ov: Complex64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(c) {
                *x -= ov * y;
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            cols.push(v.iter().map(|x| x / norm).collect());
        }
    }
    Array2::from_shape_fn((n, n), |(i, j)| cols.iter().map(|c| c[i] * c[j].conj()).sum())
}

pub fn random_model(rng: &mut ChaCha8Rng, n: usize, m: usize, p: usize) -> LindbladModel {
    let h0 = random_hermitian(rng, n);
    let controls = (0..m).map(|_| random_hermitian(rng, n)).collect();
    let jumps = (0..p).map(|_| random_matrix(rng, n) * Complex64::new(0.5, 0.0)).collect();
    LindbladModel::new(h0, controls, jumps).unwrap()
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |a: f64, z| a.max(z.norm()))
}

/// `tr(A†B)`.
pub fn hs(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}
