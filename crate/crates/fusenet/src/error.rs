//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes that should conform by construction do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A computation produced NaN or infinity where a finite value is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A class label falls outside the configured label range.
    #[error("record {record}: label {label} out of range [0, {classes})")]
    LabelOutOfRange {
        record: usize,
        label: i64,
        classes: usize,
    },

    /// The optimizer blew past its divergence guard.
    #[error("training diverged: {0}")]
    Diverged(String),

    /// A configuration value violates a precondition.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
