// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("truncation: {n_levels} Fock levels keep only {retained:.6} of the squared norm (threshold {threshold})")]
    Truncation {
        n_levels: usize,
        retained: f64,
        threshold: f64,
    },

    #[error("vector is not normalized (norm {norm:.3e})")]
    NotNormalized { norm: f64 },

    #[error("vectors {i} and {j} are not orthonormal (overlap {overlap:.3e})")]
    NotOrthonormal { i: usize, j: usize, overlap: f64 },

    #[error("channel {channel} out of range (model has {available} control channels)")]
    ChannelOutOfRange { channel: usize, available: usize },

    #[error("non-finite value at step {step} (t = {time}): {context}")]
    NonFinite {
        step: usize,
        time: f64,
        context: String,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed control file at row {row}: {message}")]
    ControlFile { row: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
