//! Pre-training on algorithms and moving the processor to a new task.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use algoreason_autodiff::AdamConfig;
use algoreason_core::clrs::{Algorithm, Trajectory};
use algoreason_core::Rng;

use crate::processor::{PROC, PROC2};
use crate::train::{evaluate, mean_score, round_robin_epoch, Trainer};
use crate::{Model, ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransferMode {
    /// Train from scratch.
    #[serde(rename = "none")]
    None,
    /// Pre-trained processor, frozen.
    #[serde(rename = "pf")]
    Pf,
    /// Pre-trained processor, fine-tuned.
    #[serde(rename = "pft")]
    Pft,
    /// Frozen pre-trained processor next to a fresh trainable one.
    #[serde(rename = "2proc")]
    TwoProc,
    /// Algorithms and the target task trained together.
    #[serde(rename = "mtl")]
    Mtl,
}

impl TransferMode {
    pub const ALL: [TransferMode; 5] =
        [TransferMode::None, TransferMode::Pf, TransferMode::Pft, TransferMode::TwoProc, TransferMode::Mtl];

    pub fn as_str(self) -> &'static str {
        match self {
            TransferMode::None => "none",
            TransferMode::Pf => "pf",
            TransferMode::Pft => "pft",
            TransferMode::TwoProc => "2proc",
            TransferMode::Mtl => "mtl",
        }
    }

    pub fn needs_checkpoint(self) -> bool {
        matches!(self, TransferMode::Pf | TransferMode::Pft | TransferMode::TwoProc)
    }
}

impl fmt::Display for TransferMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransferMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        TransferMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| ModelError::Config(format!("unknown transfer mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub mode: TransferMode,
    pub pretrained: Option<PathBuf>,
    pub base_algorithms: Vec<Algorithm>,
}

impl TransferConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mode.needs_checkpoint() && self.pretrained.is_none() {
            return Err(ModelError::Config(format!("transfer mode `{}` needs a pre-trained checkpoint", self.mode)));
        }
        if self.mode == TransferMode::Mtl && self.base_algorithms.is_empty() {
            return Err(ModelError::Config("multi-task training needs at least one algorithm".into()));
        }
        Ok(())
    }
}

pub const FMITB: [Algorithm; 5] = [
    Algorithm::FloydWarshall,
    Algorithm::FindMin,
    Algorithm::InsertionSort,
    Algorithm::TaskScheduling,
    Algorithm::BellmanFord,
];

pub const MTAB: [Algorithm; 4] =
    [Algorithm::FindMin, Algorithm::TaskScheduling, Algorithm::ActivitySelection, Algorithm::BellmanFord];

/// Named algorithm sets, case-insensitive.
pub fn preset(name: &str) -> Option<Vec<Algorithm>> {
    match name.to_ascii_lowercase().as_str() {
        "fmitb" => Some(FMITB.to_vec()),
        "mtab" => Some(MTAB.to_vec()),
        _ => None,
    }
}

/// Parses a comma list of algorithm ids or a single preset name.
pub fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>> {
    if let Some(p) = preset(list.trim()) {
        return Ok(p);
    }
    list.split(',')
        .map(|s| s.trim().parse::<Algorithm>().map_err(ModelError::from))
        .collect()
}

fn copy_processor(pretrained: &Model, target: &mut Model) -> Result<()> {
    if pretrained.config.latent != target.config.latent || pretrained.config.edge_hidden != target.config.edge_hidden {
        return Err(ModelError::Config(format!(
            "processor shape mismatch: pre-trained latent {} edge_hidden {}, target latent {} edge_hidden {}",
            pretrained.config.latent,
            pretrained.config.edge_hidden,
            target.config.latent,
            target.config.edge_hidden
        )));
    }
    target.params.copy_prefix(&pretrained.params, PROC, PROC);
    Ok(())
}

/// Pre-trained processor, frozen; heads stay as they are.
pub fn apply_pf(pretrained: &Model, target: &mut Model) -> Result<()> {
    copy_processor(pretrained, target)?;
    target.params.set_trainable(PROC, false);
    Ok(())
}

/// Pre-trained processor, trainable.
pub fn apply_pft(pretrained: &Model, target: &mut Model) -> Result<()> {
    copy_processor(pretrained, target)?;
    target.params.set_trainable(PROC, true);
    Ok(())
}

/// Frozen pre-trained processor plus a fresh trainable one.
pub fn apply_2proc(pretrained: &Model, target: &mut Model) -> Result<()> {
    apply_pf(pretrained, target)?;
    target.enable_dual();
    target.params.set_trainable(PROC2, true);
    Ok(())
}

/// Applies `mode` to `target`; `None` and `Mtl` leave it untouched.
pub fn apply(mode: TransferMode, pretrained: Option<&Model>, target: &mut Model) -> Result<()> {
    let need = || {
        pretrained.ok_or_else(|| ModelError::Config(format!("transfer mode `{mode}` needs a pre-trained model")))
    };
    match mode {
        TransferMode::None | TransferMode::Mtl => Ok(()),
        TransferMode::Pf => apply_pf(need()?, target),
        TransferMode::Pft => apply_pft(need()?, target),
        TransferMode::TwoProc => apply_2proc(need()?, target),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Stop after this many epochs without a better validation score.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 64, adam: AdamConfig::default(), patience: None, seed: 0 }
    }
}

/// Validation accuracy of one task after one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub task: String,
    pub train_loss: f64,
    /// Mean over output features.
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    /// Parameters of the epoch with the best mean validation accuracy.
    pub best: Model,
    pub best_epoch: usize,
    pub best_score: f64,
    pub log: Vec<EpochRecord>,
}

/// Trains one processor on several tasks at once, one batch per task per
/// cycle, and keeps the parameters of the best validation epoch (the
/// earliest on ties). `train[k]` and `val[k]` hold trajectories of the same task.
pub fn pretrain(
    mut model: Model,
    train: &[Vec<Trajectory>],
    val: &[Vec<Trajectory>],
    config: &PretrainConfig,
) -> Result<PretrainOutcome> {
    if train.len() != val.len() || train.iter().any(Vec::is_empty) || val.iter().any(Vec::is_empty) {
        return Err(ModelError::Config("every task needs training and validation data".into()));
    }
    for data in train {
        model.add_head_for(&data[0])?;
    }
    let mut trainer = Trainer::new(config.adam);
    let mut rng = Rng::new(config.seed).split("pretrain");
    let sets: Vec<&[Trajectory]> = train.iter().map(Vec::as_slice).collect();
    let mut best: Option<(Model, usize, f64)> = None;
    let mut log = Vec::new();
    for epoch in 0..config.epochs {
        let losses = round_robin_epoch(&mut model, &mut trainer, &sets, config.batch_size, &mut rng)?;
        let mut total = 0.0;
        for (k, data) in val.iter().enumerate() {
            let score = mean_score(&evaluate(&model, data)?);
            total += score;
            log.push(EpochRecord {
                epoch,
                task: data[0].algo_id.clone(),
                train_loss: losses[k],
                val_accuracy: score,
            });
        }
        let score = total / val.len() as f64;
        if best.as_ref().map_or(true, |b| score > b.2) {
            best = Some((model.clone(), epoch, score));
        }
        let since = epoch - best.as_ref().map_or(0, |b| b.1);
        if config.patience.is_some_and(|p| since >= p) {
            break;
        }
    }
    let (best, best_epoch, best_score) =
        best.ok_or_else(|| ModelError::Config("pre-training needs at least one epoch".into()))?;
    Ok(PretrainOutcome { best, best_epoch, best_score, log })
}

/// Trains algorithms and a target task through one processor for `epochs`
/// round-robin epochs. Returns the mean loss per task per epoch.
pub fn train_mtl(
    model: &mut Model,
    trainer: &mut Trainer,
    tasks: &[&[Trajectory]],
    epochs: usize,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>> {
    for data in tasks {
        if let Some(first) = data.first() {
            model.add_head_for(first)?;
        }
    }
    (0..epochs).map(|_| round_robin_epoch(model, trainer, tasks, batch_size, rng)).collect()
}
