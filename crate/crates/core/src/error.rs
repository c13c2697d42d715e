//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Finite and strictly positive (rejects NaN and infinities).
pub(crate) fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Finite and non-negative (rejects NaN and infinities).
pub(crate) fn non_negative(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in layer {layer}: {detail}")]
    ShapeMismatch { layer: usize, detail: String },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged: loss became non-finite at step {step} (lr {lr})")]
    NanLoss { step: usize, lr: f64 },

    #[error("invalid config:\n{}", violations.join("\n"))]
    ConfigInvalid { violations: Vec<String> },

    #[error("failed to parse config {path}: {detail}")]
    ConfigParse { path: PathBuf, detail: String },

    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("no class is covered by any client; nothing to distill")]
    NoCoveredClasses,

    #[error("dataset error: {0}")]
    Data(String),

    #[error("raw dataset error at byte offset {offset}: {detail}")]
    RawFormat { offset: u64, detail: String },

    #[error(
        "partition failed after {attempts} attempts: {detail}; \
         try a larger alpha, a smaller minimum shard size, or fewer clients"
    )]
    PartitionExhausted { attempts: usize, detail: String },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
