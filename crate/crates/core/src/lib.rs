//! Problem instances and classical algorithms.
//!
//! * [`graph`]: seeded instance generation (Euclidean complete, connected
//!   Erdős–Rényi) and shortest-path utilities.
//! * [`clrs`]: feature taxonomy and ground-truth execution trajectories of
//!   the pre-training algorithms.
//! * [`decode`]: TSP / vertex k-center solutions, decoding from model
//!   outputs, objectives and relative error.
//! * [`baselines`]: greedy, beam, Christofides and farthest-first heuristics.
//! * [`oracles`]: exact Held-Karp TSP and exact vertex k-center.
//! * [`tasks`]: TSP and vertex k-center instances in the CLRS feature form.

pub mod baselines;
pub mod clrs;
pub mod decode;
pub mod graph;
pub mod json;
pub mod oracles;
pub mod rng;
pub mod tasks;

pub use decode::{CenterSet, Tour};
pub use graph::WeightedGraph;
pub use rng::Rng;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("generation failed after {attempts} attempts: {reason}")]
    GenerationFailure { attempts: usize, reason: String },
    #[error("instance too large for exact solver: {0}")]
    SizeLimit(String),
    #[error("malformed record: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;

pub(crate) fn invalid(msg: impl Into<String>) -> CoreError {
    CoreError::InvalidArgument(msg.into())
}
