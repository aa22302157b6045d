use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use algoreason_core::clrs::{Algorithm, GraphFamily};
use algoreason_model::TransferMode;

use crate::{HarnessError, Result};

/// Full-scale hyperparameters; fields missing from a JSON config take these.
pub const DEFAULT_LATENT: usize = 128;
pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_LR: f64 = 3e-4;
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Tsp,
    Vkc,
    Pretrain,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Tsp => "tsp",
            Task::Vkc => "vkc",
            Task::Pretrain => "pretrain",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsp" => Ok(Task::Tsp),
            "vkc" => Ok(Task::Vkc),
            "pretrain" => Ok(Task::Pretrain),
            _ => Err(HarnessError::Config(format!("unknown task `{s}`"))),
        }
    }
}

fn default_batch() -> usize {
    DEFAULT_BATCH_SIZE
}
fn default_lr() -> f64 {
    DEFAULT_LR
}
fn default_latent() -> usize {
    DEFAULT_LATENT
}
fn default_k() -> usize {
    DEFAULT_K
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_widths() -> Vec<usize> {
    vec![1]
}
fn default_family() -> GraphFamily {
    GraphFamily::Euclidean
}
fn default_transfer() -> TransferMode {
    TransferMode::None
}

/// One experiment. Missing JSON fields take the full-scale hyperparameters;
/// [`ExperimentConfig::desk`] gives the small-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    /// Pre-training algorithms, or the base algorithms of multi-task training.
    #[serde(default)]
    pub algorithms: Vec<Algorithm>,
    /// Graphs of the algorithm trajectories.
    #[serde(default = "default_family")]
    pub graph_family: GraphFamily,
    /// Every training instance draws its size uniformly from this list.
    pub train_sizes: Vec<usize>,
    /// Training instances per algorithm (pre-training) or per task.
    pub train_samples: usize,
    pub val_size: usize,
    pub val_samples: usize,
    pub test_sizes: Vec<usize>,
    pub test_samples: usize,
    pub epochs: usize,
    /// Stop after this many epochs without a better validation score.
    #[serde(default)]
    pub patience: Option<usize>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_latent")]
    pub latent: usize,
    #[serde(default = "default_transfer")]
    pub transfer: TransferMode,
    /// Checkpoint path; `{seed}` is replaced by the run seed.
    #[serde(default)]
    pub pretrained: Option<String>,
    #[serde(default = "default_widths")]
    pub beam_widths: Vec<usize>,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Seed of every dataset.
    #[serde(default)]
    pub data_seed: u64,
    /// One model per seed; results are aggregated over them.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    /// Desk-scale defaults of `task`.
    pub fn desk(task: Task) -> Self {
        let base = Self {
            task,
            algorithms: vec![],
            graph_family: GraphFamily::Euclidean,
            train_sizes: vec![8, 10, 12],
            train_samples: 5000,
            val_size: 12,
            val_samples: 100,
            test_sizes: vec![16, 18],
            test_samples: 100,
            epochs: 20,
            patience: None,
            batch_size: DEFAULT_BATCH_SIZE,
            lr: DEFAULT_LR,
            latent: DEFAULT_LATENT,
            transfer: TransferMode::None,
            pretrained: None,
            beam_widths: vec![1, 128],
            k: DEFAULT_K,
            data_seed: 0,
            seeds: vec![0, 1, 2],
        };
        match task {
            Task::Tsp => base,
            Task::Vkc => Self { k: 3, epochs: 40, ..base },
            Task::Pretrain => Self {
                algorithms: vec![Algorithm::BellmanFord, Algorithm::MstPrim],
                train_sizes: (8..=12).collect(),
                train_samples: 2000,
                test_sizes: vec![12, 16, 24],
                epochs: 100,
                beam_widths: vec![],
                ..base
            },
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let config: Self = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(HarnessError::Config(msg.to_string()));
        if self.train_sizes.is_empty() || self.train_sizes.contains(&0) {
            return bad("train_sizes must be non-empty and positive");
        }
        if self.test_sizes.contains(&0) || self.val_size == 0 {
            return bad("sizes must be positive");
        }
        if self.train_samples == 0 || self.val_samples == 0 || self.test_samples == 0 {
            return bad("sample counts must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 || self.latent == 0 {
            return bad("epochs, batch_size and latent must be positive");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and non-negative");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is needed");
        }
        if self.beam_widths.contains(&0) {
            return bad("beam widths must be positive");
        }
        if self.task == Task::Pretrain && self.algorithms.is_empty() {
            return bad("pre-training needs algorithms");
        }
        if self.task == Task::Vkc && self.k == 0 {
            return bad("k must be positive");
        }
        if self.transfer == TransferMode::Mtl && self.algorithms.is_empty() {
            return bad("multi-task training needs algorithms");
        }
        if self.transfer.needs_checkpoint() && self.seeds.len() > 1 {
            if let Some(p) = &self.pretrained {
                if !p.contains("{seed}") {
                    return bad("with several seeds the pre-trained path must contain `{seed}`");
                }
            }
        }
        Ok(())
    }

    /// Pre-trained checkpoint of `seed`: the configured template, or the
    /// pre-training output under `out_dir`.
    pub fn pretrained_path(&self, out_dir: &Path, seed: u64) -> PathBuf {
        match &self.pretrained {
            Some(t) => PathBuf::from(t.replace("{seed}", &seed.to_string())),
            None => out_dir.join("checkpoints").join(format!("pretrain_seed{seed}.json")),
        }
    }

    /// Report label of the configured model, e.g. `MPNN_PFT`.
    pub fn model_label(&self) -> String {
        match self.transfer {
            TransferMode::None => "MPNN".into(),
            m => format!("MPNN_{}", m.as_str().to_ascii_uppercase()),
        }
    }
}
