//! Encode-process-decode network for executing algorithms step by step.
//!
//! - [`features`]: encoder inputs, decoded predictions, per-kind losses
//! - [`processor`]: the gated message-passing core shared by every task
//! - [`model`]: per-task heads, rollouts and checkpoints
//! - [`train`]: batched teacher-forced training and evaluation
//! - [`transfer`]: moving a pre-trained processor to a new task

pub mod features;
pub mod model;
pub mod processor;
pub mod train;
pub mod transfer;

pub use features::{Channel, Prediction};
pub use model::{eval_accuracy, Mode, Model, ModelConfig, Rollout};
pub use train::{evaluate, Trainer};
pub use transfer::{TransferConfig, TransferMode};

use algoreason_autodiff::AutodiffError;
use algoreason_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("no head for task `{0}`")]
    UnknownTask(String),
    #[error("task `{task}` has no feature `{feature}`")]
    UnknownFeature { task: String, feature: String },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("unsupported feature: {0}")]
    Unsupported(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;
