//! Experiment orchestration: datasets, pre-training, transfer training,
//! evaluation against exact optima and the classical baselines.
//!
//! Every command is a function of `(config, seeds)` only: no clocks, no
//! thread scheduling and fixed iteration orders, so reruns reproduce every
//! output file byte for byte.

pub mod config;
pub mod data;
pub mod report;
pub mod run;

use thiserror::Error;

pub use config::{ExperimentConfig, Task};
pub use report::ResultRow;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] algoreason_core::CoreError),
    #[error(transparent)]
    Model(#[from] algoreason_model::ModelError),
    #[error(transparent)]
    Autodiff(#[from] algoreason_autodiff::AutodiffError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("configuration: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    /// A reported quantity broke one of its guarantees.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
