//! Config-driven experiment runner around the joint-training library:
//! data ingestion (CSV, IDX), synthetic data generation, training-mode
//! dispatch, and metric/graph emission.

pub mod config;
pub mod data;
pub mod runner;
pub mod synth;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or input data; exit code 1.
    #[error("configuration error: {0}")]
    Config(String),
    /// Failure while running a valid experiment; exit code 2.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<fusenet::Error> for CliError {
    fn from(err: fusenet::Error) -> Self {
        match err {
            fusenet::Error::InvalidConfig(_)
            | fusenet::Error::DimensionMismatch(_)
            | fusenet::Error::LabelOutOfRange { .. } => CliError::Config(err.to_string()),
            fusenet::Error::Diverged(_) | fusenet::Error::NonFinite(_) => {
                CliError::Runtime(err.to_string())
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
