// SPDX-License-Identifier: Apache-2.0

//! Control saturation.
//!
//! Without a clock channel, saturation is a plain clamp of the total control
//! `ū + ũ`. With a clock channel the physical controls are `u_k = v_k/(1+v₀)`,
//! so the admissible interval for each virtual correction `ṽ_k` depends on the
//! clock value. [`saturate_clock_aware`] clamps `ṽ₀` first and then evaluates
//! the channel bounds at the clamped clock. Every interval contains zero, so a
//! clamp never flips the sign of `g_k F_k` and each channel keeps dissipating
//! the Lyapunov function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard limit keeping `1 + v₀` away from zero.
pub const CLOCK_LIMIT: f64 = 1.0 - 1e-6;

/// `sat(x, A, −B)`: `x` clamped to `[−B, A]`.
pub fn sat(x: f64, upper: f64, lower: f64) -> f64 {
    debug_assert!(lower <= upper);
    if x > upper {
        upper
    } else if x < lower {
        lower
    } else {
        x
    }
}

/// Clamp `u` to `[lo, hi]`.
pub fn apply_bounds(u: f64, lo: f64, hi: f64) -> f64 {
    sat(u, hi, lo)
}

/// Per-channel box `[lo_k, hi_k]` on the physical controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelBounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ChannelBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::InvalidArgument(format!(
                "{} lower bounds but {} upper bounds",
                lo.len(),
                hi.len()
            )));
        }
        for (k, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if l.is_nan() || h.is_nan() || l > h {
                return Err(Error::InvalidArgument(format!(
                    "channel {k}: bounds [{l}, {h}] are not an interval"
                )));
            }
        }
        Ok(ChannelBounds { lo, hi })
    }

    pub fn symmetric(u_max: &[f64]) -> Result<Self> {
        Self::new(u_max.iter().map(|u| -u).collect(), u_max.to_vec())
    }

    pub fn unbounded(channels: usize) -> Self {
        ChannelBounds {
            lo: vec![f64::NEG_INFINITY; channels],
            hi: vec![f64::INFINITY; channels],
        }
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn clamp(&self, channel: usize, u: f64) -> f64 {
        apply_bounds(u, self.lo[channel], self.hi[channel])
    }

    pub fn contains(&self, channel: usize, u: f64) -> bool {
        u >= self.lo[channel] && u <= self.hi[channel]
    }
}

/// Bounds for clock-controlled runs: physical limits `u_min < 0 < u_max` per
/// channel and the clock limit `|v₀| ≤ clock_max < 1`.
///
/// `literal` selects the alternative channel rule `A_k = B_k = (1+v₀)·clock_max`,
/// kept for comparison; it does not guarantee `|u_k| ≤ u_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockBounds {
    physical: ChannelBounds,
    clock_max: f64,
    literal: bool,
}

impl ClockBounds {
    pub fn new(physical: ChannelBounds, clock_max: f64, literal: bool) -> Result<Self> {
        for k in 0..physical.len() {
            if !(physical.hi[k] > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "channel {k}: clock-aware saturation needs u_max > 0, got {}",
                    physical.hi[k]
                )));
            }
            if !(physical.lo[k] < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "channel {k}: clock-aware saturation needs u_min < 0, got {}",
                    physical.lo[k]
                )));
            }
        }
        if !(clock_max > 0.0 && clock_max < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "clock limit must lie in (0, 1), got {clock_max}"
            )));
        }
        Ok(ClockBounds {
            physical,
            clock_max,
            literal,
        })
    }

    pub fn physical(&self) -> &ChannelBounds {
        &self.physical
    }

    pub fn clock_max(&self) -> f64 {
        self.clock_max
    }

    pub fn literal(&self) -> bool {
        self.literal
    }

    /// Admissible interval `[−B₀, A₀]` for the clock value `v₀` given the
    /// previous physical controls.
    pub fn clock_interval(&self, u_bar_prev: &[f64]) -> (f64, f64) {
        let mut lower = -self.clock_max;
        for (k, &ub) in u_bar_prev.iter().enumerate() {
            // (1+v₀)·u_max ≥ ū and (1+v₀)·u_min ≤ ū
            let hi = self.physical.hi[k];
            let lo = self.physical.lo[k];
            if hi.is_finite() {
                lower = lower.max(ub / hi - 1.0);
            }
            if lo.is_finite() {
                lower = lower.max(ub / lo - 1.0);
            }
        }
        (lower.max(-CLOCK_LIMIT), self.clock_max.min(CLOCK_LIMIT))
    }
}

/// Saturates the virtual feedback `[ṽ₀, ṽ₁, …, ṽ_m]` of a clock-controlled run.
///
/// `v0_bar` is the reference clock value the correction is added to (zero in
/// the algorithm) and `u_bar_prev` the previous physical controls at this
/// node, which must satisfy the physical bounds.
pub fn saturate_clock_aware(
    vtilde: &[f64],
    v0_bar: f64,
    u_bar_prev: &[f64],
    bounds: &ClockBounds,
) -> Vec<f64> {
    debug_assert_eq!(vtilde.len(), u_bar_prev.len() + 1);
    let (v0_lo, v0_hi) = bounds.clock_interval(u_bar_prev);
    let v0 = sat(v0_bar + vtilde[0], v0_hi, v0_lo);
    let scale = 1.0 + v0;
    let mut out = Vec::with_capacity(vtilde.len());
    out.push(v0 - v0_bar);
    for (k, (&vt, &ub)) in vtilde[1..].iter().zip(u_bar_prev).enumerate() {
        let (upper, lower) = if bounds.literal {
            let a = scale * bounds.clock_max;
            (a, -a)
        } else {
            (
                scale * bounds.physical.hi[k] - ub,
                scale * bounds.physical.lo[k] - ub,
            )
        };
        // Rounding can push an endpoint a hair past zero when ū sits on a bound.
        out.push(sat(vt, upper.max(0.0), lower.min(0.0)));
    }
    out
}

/// How the closed-loop pass limits its controls.
#[derive(Debug, Clone, PartialEq)]
pub enum SaturationPolicy {
    /// No limits on physical channels (fixed-time runs).
    None,
    /// Clamp the total physical control into a box (fixed-time runs).
    Box(ChannelBounds),
    /// Clock-aware virtual-control saturation (clock runs).
    ClockAware(ClockBounds),
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sat_and_bounds() {
        assert_eq!(apply_bounds(0.3, -1.0, 1.0), 0.3);
        assert_eq!(apply_bounds(2.0, -1.0, 1.0), 1.0);
        assert_eq!(apply_bounds(-7.0, -1.0, 1.0), -1.0);
        assert_eq!(sat(0.5, 0.2, -0.1), 0.2);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(ChannelBounds::new(vec![1.0], vec![0.0]).is_err());
        assert!(ChannelBounds::new(vec![0.0], vec![1.0, 2.0]).is_err());
        let zero_max = ChannelBounds::symmetric(&[0.0]).unwrap();
        assert!(ClockBounds::new(zero_max, 0.5, false).is_err());
        let ok = ChannelBounds::symmetric(&[0.8]).unwrap();
        assert!(ClockBounds::new(ok.clone(), 1.0, false).is_err());
        assert!(ClockBounds::new(ok, 0.5, false).is_ok());
    }

    #[test]
    fn inside_bounds_is_unchanged() {
        let b = ClockBounds::new(ChannelBounds::symmetric(&[1.0, 2.0]).unwrap(), 0.5, false).unwrap();
        let v = [0.1, 0.05, -0.2];
        assert_eq!(saturate_clock_aware(&v, 0.0, &[0.3, -0.5], &b), v.to_vec());
    }

    #[test]
    fn clock_lower_clamp_matches_closed_form() {
        let umax = [0.8, 1.5];
        let ubar = [0.6, -0.3];
        let b = ClockBounds::new(ChannelBounds::symmetric(&umax).unwrap(), 0.5, false).unwrap();
        // B₀ = −max{−u⁰max, ±ū_k/u_k^max − 1}
        let mut neg_b0 = -0.5f64;
        for k in 0..2 {
            neg_b0 = neg_b0.max(-ubar[k] / umax[k] - 1.0).max(ubar[k] / umax[k] - 1.0);
        }
        let out = saturate_clock_aware(&[-0.9, 0.0, 0.0], 0.0, &ubar, &b);
        assert_eq!(out[0], neg_b0);
        assert!(1.0 + out[0] > 0.0);
        let out = saturate_clock_aware(&[0.9, 0.0, 0.0], 0.0, &ubar, &b);
        assert_eq!(out[0], 0.5);
    }

    #[test]
    fn proposition_bounds_for_symmetric_limits() {
        let b = ClockBounds::new(ChannelBounds::symmetric(&[0.8]).unwrap(), 0.3, false).unwrap();
        let ubar = [0.5];
        let out = saturate_clock_aware(&[0.1, 10.0], 0.0, &ubar, &b);
        assert!((out[1] - (1.1 * 0.8 - 0.5)).abs() < 1e-15);
        let out = saturate_clock_aware(&[0.1, -10.0], 0.0, &ubar, &b);
        assert!((out[1] + (1.1 * 0.8 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn literal_variant_uses_clock_limit() {
        let b = ClockBounds::new(ChannelBounds::symmetric(&[0.8]).unwrap(), 0.3, true).unwrap();
        let out = saturate_clock_aware(&[0.0, 10.0], 0.0, &[0.2], &b);
        assert!((out[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn randomized_guarantees() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20_000 {
            let m = rng.random_range(1..4);
            let umax: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..3.0)).collect();
            let clock_max = rng.random_range(0.01..0.99);
            let b = ClockBounds::new(ChannelBounds::symmetric(&umax).unwrap(), clock_max, false).unwrap();
            let ubar: Vec<f64> = umax.iter().map(|u| rng.random_range(-*u..=*u)).collect();
            let vt: Vec<f64> = (0..=m).map(|_| rng.random_range(-5.0..5.0)).collect();
            let out = saturate_clock_aware(&vt, 0.0, &ubar, &b);
            let v0 = out[0];
            assert!(v0.abs() < 1.0);
            assert!(out[0] * vt[0] >= 0.0);
            for k in 0..m {
                assert!(out[k + 1] * vt[k + 1] >= 0.0);
                let u_new = (ubar[k] + out[k + 1]) / (1.0 + v0);
                assert!(u_new.abs() <= umax[k] * (1.0 + 1e-12));
            }
        }
    }
}
