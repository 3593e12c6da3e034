// SPDX-License-Identifier: Apache-2.0

//! Randomly perturbed initial control.
//!
//! `ū⁰_k(t) = u_k(t) + A Σ_{ℓ=1..M} [a_kℓ sin(2ℓπt/T) + b_kℓ cos(2ℓπt/T)]`
//! with `a_kℓ, b_kℓ` uniform on `[−1, 1]`, drawn from a seeded ChaCha8 stream
//! (for each channel: `a_k1..a_kM`, then `b_k1..b_kM`).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::ControlSignal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedConfig {
    pub amplitude: f64,
    pub harmonics: usize,
    pub period: f64,
    pub rng_seed: u64,
}

impl SeedConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "seed amplitude must be finite and >= 0, got {}",
                self.amplitude
            )));
        }
        if self.harmonics > 0 && !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "seed period must be > 0, got {}",
                self.period
            )));
        }
        Ok(())
    }
}

/// Fourier coefficients `(a, b)` per channel.
pub fn seed_coefficients(channels: usize, cfg: &SeedConfig) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    (0..channels)
        .map(|_| {
            let a = (0..cfg.harmonics).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let b = (0..cfg.harmonics).map(|_| rng.random_range(-1.0..=1.0)).collect();
            (a, b)
        })
        .collect()
}

pub fn make_seed(u_init: &ControlSignal, cfg: &SeedConfig) -> Result<ControlSignal> {
    cfg.validate()?;
    if cfg.amplitude == 0.0 || cfg.harmonics == 0 {
        return Ok(u_init.clone());
    }
    let coeffs = seed_coefficients(u_init.n_channels(), cfg);
    let grid = *u_init.grid();
    let values = (0..u_init.n_channels())
        .map(|k| {
            let (a, b) = &coeffs[k];
            (0..grid.n_nodes())
                .map(|node| {
                    let t = grid.time(node);
                    let mut p = 0.0;
                    for l in 0..cfg.harmonics {
                        let w = 2.0 * (l + 1) as f64 * PI * t / cfg.period;
                        p += a[l] * w.sin() + b[l] * w.cos();
                    }
                    u_init.value(k, node) + cfg.amplitude * p
                })
                .collect()
        })
        .collect();
    ControlSignal::new(grid, values)
}
