// SPDX-License-Identifier: Apache-2.0

//! Monotonic Lyapunov-based gate synthesis for Lindblad systems.

pub mod cli;
pub mod config;
pub mod error;
pub mod gate_family;
pub mod integrator;
pub mod io;
pub mod lindblad;
pub mod metrics;
pub mod models;
pub mod operator_algebra;
pub mod saturation;
pub mod seed;
pub mod solver_clock;
pub mod solver_fixed;

pub use error::{Error, Result};
