//! Reverse-mode differentiation over dense `f64` matrices.
//!
//! Computations are recorded on a [`Tape`] as they run; [`Tape::backward`]
//! walks the record in reverse and produces a gradient for every node that
//! depends on a differentiable leaf. Parameters live in a [`ParamStore`] of
//! named [`Tensor`]s, are bound onto a tape per forward pass and updated with
//! [`Adam`]. Everything on the tape is two-dimensional; an `n x n x F` edge
//! array is carried as `[n * n, F]` with row `i * n + j` holding edge `(i, j)`.

mod check;
mod optim;
mod store;
mod tape;

pub use check::{grad_check, GRAD_CHECK_STEP};
pub use optim::{Adam, AdamConfig, AdamState};
pub use store::{Checkpoint, ParamStore, Tensor};
pub use tape::{Gradients, Tape, Var};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("node {0} has no neighbour to aggregate over")]
    IsolatedNode(usize),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AutodiffError>;

/// Formats a float with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}
