use std::collections::BTreeMap;

use algoreason_autodiff::{Adam, AdamConfig};
use algoreason_core::clrs::Trajectory;
use algoreason_core::Rng;

use crate::model::{eval_accuracy, Mode, Model};
use crate::Result;

/// Adam on the gradients of mean batch losses.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub adam: Adam,
}

impl Trainer {
    pub fn new(config: AdamConfig) -> Self {
        Self { adam: Adam::new(config) }
    }

    /// Adds the gradient of the mean loss of `batch` to the parameter
    /// buffers, one trajectory at a time in batch order. Returns the mean loss.
    pub fn accumulate(model: &mut Model, batch: &[&Trajectory]) -> Result<f64> {
        let scale = 1.0 / batch.len().max(1) as f64;
        let mut total = 0.0;
        for traj in batch {
            model.add_head_for(traj)?;
            total += model.accumulate_grad(traj, scale)?;
        }
        Ok(total * scale)
    }

    /// One optimiser update on `batch`.
    pub fn step(&mut self, model: &mut Model, batch: &[&Trajectory]) -> Result<f64> {
        let loss = Self::accumulate(model, batch)?;
        self.adam.step(&mut model.params);
        Ok(loss)
    }
}

/// Mean eval-mode accuracy of every output feature over `data`.
pub fn evaluate(model: &Model, data: &[Trajectory]) -> Result<BTreeMap<String, f64>> {
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for traj in data {
        let r = model.rollout(traj, Mode::Eval)?;
        for (name, acc) in eval_accuracy(&r.outputs, traj)? {
            *sums.entry(name).or_default() += acc;
        }
    }
    let count = data.len().max(1) as f64;
    sums.values_mut().for_each(|v| *v /= count);
    Ok(sums)
}

/// Unweighted mean of per-feature scores.
pub fn mean_score(scores: &BTreeMap<String, f64>) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.values().sum::<f64>() / scores.len() as f64
}

/// One pass over several datasets, strictly alternating one batch per
/// dataset per cycle until every dataset is exhausted. Datasets are
/// shuffled from `rng` in order. Returns the mean batch loss per dataset.
pub fn round_robin_epoch(
    model: &mut Model,
    trainer: &mut Trainer,
    datasets: &[&[Trajectory]],
    batch_size: usize,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let batch_size = batch_size.max(1);
    let orders: Vec<Vec<usize>> = datasets
        .iter()
        .map(|d| {
            let mut idx: Vec<usize> = (0..d.len()).collect();
            rng.shuffle(&mut idx);
            idx
        })
        .collect();
    let cycles = datasets.iter().map(|d| d.len().div_ceil(batch_size)).max().unwrap_or(0);
    let mut losses = vec![(0.0, 0usize); datasets.len()];
    for c in 0..cycles {
        for (k, data) in datasets.iter().enumerate() {
            let chunk = orders[k].chunks(batch_size).nth(c);
            if let Some(chunk) = chunk {
                let batch: Vec<&Trajectory> = chunk.iter().map(|&i| &data[i]).collect();
                let loss = trainer.step(model, &batch)?;
                losses[k].0 += loss;
                losses[k].1 += 1;
            }
        }
    }
    Ok(losses.into_iter().map(|(s, c)| s / c.max(1) as f64).collect())
}
