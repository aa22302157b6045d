//! The five commands.

use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;
use serde_json::json;

use algoreason_autodiff::AdamConfig;
use algoreason_core::baselines::{beam_weight_tour, christofides, greedy_nn_tour, gon_farthest_first};
use algoreason_core::clrs::Trajectory;
use algoreason_core::decode::{beam_search_tour, relative_error, topk_centers, tour_cost, vkc_objective};
use algoreason_core::Rng;
use algoreason_model::processor::PROC;
use algoreason_model::train::{mean_score, round_robin_epoch};
use algoreason_model::transfer::{apply, pretrain, EpochRecord, PretrainConfig};
use algoreason_model::{evaluate, Model, ModelConfig, Trainer, TransferMode};

use crate::config::{ExperimentConfig, Task};
use crate::data::{self, CoInstance};
use crate::report::{self, aggregate, ResultRow};
use crate::{HarnessError, Result};

fn require(config: &ExperimentConfig, tasks: &[Task], command: &str) -> Result<()> {
    config.validate()?;
    if tasks.contains(&config.task) {
        Ok(())
    } else {
        Err(HarnessError::Config(format!("`{command}` does not apply to task `{}`", config.task)))
    }
}

fn adam(config: &ExperimentConfig) -> AdamConfig {
    AdamConfig { lr: config.lr, ..AdamConfig::default() }
}

fn checkpoint_dir(out_dir: &Path) -> PathBuf {
    out_dir.join("checkpoints")
}

/// Where `train` leaves, and `eval` reads, the model of one seed.
pub fn model_checkpoint(config: &ExperimentConfig, out_dir: &Path, seed: u64) -> PathBuf {
    checkpoint_dir(out_dir).join(format!("{}_{}_seed{seed}.json", config.task, config.transfer))
}

pub fn cmd_gen_data(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let paths = data::write_all(config, out_dir)?;
    info!("wrote {} dataset files", paths.len());
    Ok(paths)
}

/// Accuracy of one pre-trained model on one held-out size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub algorithm: String,
    pub size: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PretrainSummary {
    pub seed: u64,
    pub best_epoch: usize,
    pub best_score: f64,
    /// Left out of `metrics.json` so outputs do not depend on the output directory.
    #[serde(skip)]
    pub checkpoint: PathBuf,
    pub epochs: Vec<EpochRecord>,
    /// Held-out accuracy of the best checkpoint per algorithm and size.
    pub curve: Vec<CurvePoint>,
}

fn pretrain_data(config: &ExperimentConfig, out_dir: &Path) -> Result<(Vec<Vec<Trajectory>>, Vec<Vec<Trajectory>>)> {
    if data::on_disk(config, out_dir) {
        let dir = data::data_dir(out_dir, config.task);
        let mut train = Vec::new();
        let mut val = Vec::new();
        for algo in &config.algorithms {
            train.push(data::read_trajectories(&dir.join(format!("{}_train.jsonl", algo.id())))?);
            val.push(data::read_trajectories(&dir.join(format!("{}_val_n{}.jsonl", algo.id(), config.val_size)))?);
        }
        return Ok((train, val));
    }
    data::algorithm_train_val(config)
}

/// One processor per seed on all configured algorithms; keeps the best
/// validation epoch and measures it on every test size.
pub fn cmd_pretrain(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PretrainSummary>> {
    require(config, &[Task::Pretrain], "pretrain")?;
    let (train, val) = pretrain_data(config, out_dir)?;
    let mut tests = Vec::new();
    for &algo in &config.algorithms {
        for &n in &config.test_sizes {
            tests.push((algo, n, data::algorithm_test(config, algo, n)?));
        }
    }
    std::fs::create_dir_all(checkpoint_dir(out_dir))?;
    let mut summaries = Vec::new();
    for &seed in &config.seeds {
        let model = Model::new(ModelConfig { latent: config.latent, edge_hidden: false, seed })?;
        let pc = PretrainConfig {
            epochs: config.epochs,
            batch_size: config.batch_size,
            adam: adam(config),
            patience: config.patience,
            seed,
        };
        let out = pretrain(model, &train, &val, &pc)?;
        let tasks = config.algorithms.len() as f64;
        let logged_best = out
            .log
            .chunks(config.algorithms.len())
            .map(|c| c.iter().map(|r| r.val_accuracy).sum::<f64>() / tasks)
            .fold(f64::NEG_INFINITY, f64::max);
        if logged_best != out.best_score {
            return Err(HarnessError::Invariant(format!(
                "seed {seed}: best checkpoint score {} differs from the best logged epoch {logged_best}",
                out.best_score
            )));
        }
        for r in &out.log {
            info!("seed {seed} epoch {} {}: loss {:.4} val {:.4}", r.epoch, r.task, r.train_loss, r.val_accuracy);
        }
        let mut curve = Vec::new();
        for (algo, n, data) in &tests {
            let accuracy = mean_score(&evaluate(&out.best, data)?);
            curve.push(CurvePoint { algorithm: algo.id().to_string(), size: *n, accuracy });
        }
        let checkpoint = checkpoint_dir(out_dir).join(format!("pretrain_seed{seed}.json"));
        let extra = json!({
            "seed": seed,
            "algorithms": config.algorithms,
            "best_epoch": out.best_epoch,
            "best_score": out.best_score,
        });
        out.best.save(&checkpoint, extra)?;
        summaries.push(PretrainSummary {
            seed,
            best_epoch: out.best_epoch,
            best_score: out.best_score,
            checkpoint,
            epochs: out.log,
            curve,
        });
    }
    report::merge_metrics(out_dir, "pretrain", serde_json::to_value(&summaries)?)?;
    Ok(summaries)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Cost of the model's solution for each width (one value for k-center).
pub fn model_costs(model: &Model, inst: &CoInstance, widths: &[usize], k: usize) -> Result<Vec<f64>> {
    let out = model.co_forward(&inst.trajectory(), None)?;
    let values = &out
        .first()
        .ok_or_else(|| HarnessError::Invariant("model produced no output".into()))?
        .values;
    match inst {
        CoInstance::Tsp(t) => widths
            .iter()
            .map(|&w| Ok(tour_cost(&t.graph, &beam_search_tour(values, t.n(), t.start, w)?)?))
            .collect(),
        CoInstance::Vkc(v) => {
            let probs: Vec<f64> = values.iter().map(|&x| sigmoid(x)).collect();
            Ok(vec![vkc_objective(&v.graph, &topk_centers(&probs, k)?)?])
        }
    }
}

/// Relative error, which must be finite and non-negative for a feasible
/// solution measured against an exact optimum.
fn checked_error(cost: f64, inst: &CoInstance) -> Result<f64> {
    let e = relative_error(cost, inst.optimum())?;
    // Exact optima are minimal, so a negative error means a broken oracle
    // or decoder; allow only float noise.
    if !e.is_finite() || e < -1e-12 {
        return Err(HarnessError::Invariant(format!("relative error {e} at n = {}", inst.n())));
    }
    Ok(e.max(0.0))
}

/// Mean relative error of the model over `data` at the first width.
fn validation_error(model: &Model, data: &[CoInstance], k: usize) -> Result<f64> {
    let mut total = 0.0;
    for inst in data {
        let cost = model_costs(model, inst, &[1], k)?[0];
        total += checked_error(cost, inst)?;
    }
    Ok(total / data.len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainEpoch {
    pub epoch: usize,
    /// Mean batch loss of the target task.
    pub train_loss: f64,
    /// Greedy-decoded mean relative error on the validation set.
    pub val_rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub seed: u64,
    pub best_epoch: usize,
    pub best_val_rel_err: f64,
    #[serde(skip)]
    pub checkpoint: PathBuf,
    pub epochs: Vec<TrainEpoch>,
}

/// Builds the model of one seed under the configured transfer mode.
pub fn transfer_model(config: &ExperimentConfig, out_dir: &Path, seed: u64, head: &Trajectory) -> Result<(Model, Option<Model>)> {
    let mut model = Model::new(ModelConfig { latent: config.latent, edge_hidden: false, seed })?;
    model.add_head_for(head)?;
    let pretrained = if config.transfer.needs_checkpoint() {
        let path = config.pretrained_path(out_dir, seed);
        Some(Model::load(&path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?)
    } else {
        None
    };
    apply(config.transfer, pretrained.as_ref(), &mut model)?;
    Ok((model, pretrained))
}

/// Trains the optimisation head of every seed; keeps the epoch with the
/// lowest validation error.
pub fn cmd_train(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<TrainSummary>> {
    require(config, &[Task::Tsp, Task::Vkc], "train")?;
    let co = data::load_co(config, out_dir)?;
    let train: Vec<Trajectory> = co.train.iter().map(CoInstance::trajectory).collect();
    let algos = if config.transfer == TransferMode::Mtl { data::algorithm_train_val(config)?.0 } else { vec![] };
    std::fs::create_dir_all(checkpoint_dir(out_dir))?;

    let mut summaries = Vec::new();
    for &seed in &config.seeds {
        let (mut model, pretrained) = transfer_model(config, out_dir, seed, &train[0])?;
        let mut sets: Vec<&[Trajectory]> = algos.iter().map(Vec::as_slice).collect();
        sets.push(&train);
        let target = sets.len() - 1;
        let mut trainer = Trainer::new(adam(config));
        let mut rng = Rng::new(seed).split("train");
        let mut epochs = Vec::new();
        let mut best: Option<(Model, usize, f64)> = None;
        for epoch in 0..config.epochs {
            let losses = round_robin_epoch(&mut model, &mut trainer, &sets, config.batch_size, &mut rng)?;
            let val_rel_err = validation_error(&model, &co.val, config.k)?;
            info!("seed {seed} epoch {epoch}: loss {:.4} val rel err {:.4}", losses[target], val_rel_err);
            epochs.push(TrainEpoch { epoch, train_loss: losses[target], val_rel_err });
            if best.as_ref().map_or(true, |b| val_rel_err < b.2) {
                best = Some((model.clone(), epoch, val_rel_err));
            }
            let since = epoch - best.as_ref().map_or(0, |b| b.1);
            if config.patience.is_some_and(|p| since >= p) {
                break;
            }
        }
        let (best, best_epoch, best_val_rel_err) = best.expect("at least one epoch");
        if let (Some(pre), TransferMode::Pf | TransferMode::TwoProc) = (&pretrained, config.transfer) {
            if !best.params.same_data(&pre.params, PROC) {
                return Err(HarnessError::Invariant(format!("seed {seed}: frozen processor changed in training")));
            }
        }
        let checkpoint = model_checkpoint(config, out_dir, seed);
        best.save(&checkpoint, json!({"seed": seed, "task": config.task, "transfer": config.transfer}))?;
        summaries.push(TrainSummary { seed, best_epoch, best_val_rel_err, checkpoint, epochs });
    }
    let key = format!("train/{}/{}", config.task, config.transfer);
    report::merge_metrics(out_dir, &key, serde_json::to_value(&summaries)?)?;
    Ok(summaries)
}

/// Widths of the table: the configured beams for tours, none for centres.
fn row_widths(config: &ExperimentConfig) -> Vec<Option<usize>> {
    match config.task {
        Task::Tsp => config.beam_widths.iter().map(|&w| Some(w)).collect(),
        _ => vec![None],
    }
}

/// Per-seed mean errors `[width][seed]` of `solve` over `data`.
fn per_seed_errors(
    config: &ExperimentConfig,
    data: &[CoInstance],
    mut solve: impl FnMut(u64, usize, &CoInstance) -> Result<Vec<f64>>,
) -> Result<Vec<Vec<f64>>> {
    let widths = row_widths(config).len();
    let mut out = vec![Vec::new(); widths];
    for &seed in &config.seeds {
        let mut sums = vec![0.0; widths];
        for (i, inst) in data.iter().enumerate() {
            for (w, cost) in solve(seed, i, inst)?.into_iter().enumerate() {
                sums[w] += checked_error(cost, inst)?;
            }
        }
        for (w, s) in sums.into_iter().enumerate() {
            out[w].push(s / data.len() as f64);
        }
    }
    Ok(out)
}

fn rows_for(config: &ExperimentConfig, model: &str, size: usize, errors: &[Vec<f64>]) -> Result<Vec<ResultRow>> {
    row_widths(config)
        .into_iter()
        .zip(errors)
        .map(|(w, e)| aggregate(model, size, w, e))
        .collect()
}

/// Evaluates the trained checkpoint of every seed on every test size and
/// width. Writes one per-seed table each and merges the aggregate rows into
/// `results.csv` / `results.json`.
pub fn cmd_eval(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<ResultRow>> {
    require(config, &[Task::Tsp, Task::Vkc], "eval")?;
    let co = data::load_co(config, out_dir)?;
    let label = config.model_label();
    let models = config
        .seeds
        .iter()
        .map(|&s| {
            let path = model_checkpoint(config, out_dir, s);
            Model::load(&path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let widths: Vec<usize> = match config.task {
        Task::Tsp => config.beam_widths.clone(),
        _ => vec![1],
    };
    let mut rows = Vec::new();
    for (size, data) in &co.test {
        let errors = per_seed_errors(config, data, |seed, _, inst| {
            let k = config.seeds.iter().position(|&s| s == seed).expect("seed of the config");
            model_costs(&models[k], inst, &widths, config.k)
        })?;
        rows.extend(rows_for(config, &label, *size, &errors)?);
        let dir = out_dir.join("per_seed");
        std::fs::create_dir_all(&dir)?;
        for (k, &seed) in config.seeds.iter().enumerate() {
            let single: Vec<Vec<f64>> = errors.iter().map(|e| vec![e[k]]).collect();
            let path = dir.join(format!("{label}_n{size}_seed{seed}.csv"));
            report::write_csv(&path, &rows_for(config, &label, *size, &single)?)?;
        }
    }
    report::merge_results(out_dir, rows)
}

/// Greedy, beam and Christofides tours, or farthest-first centres (first
/// centre drawn per seed), on the test sets.
pub fn cmd_baselines(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<ResultRow>> {
    require(config, &[Task::Tsp, Task::Vkc], "baselines")?;
    let co = data::load_co(config, out_dir)?;
    let mut rows = Vec::new();
    let mut inexact = 0usize;
    for (size, data) in &co.test {
        let mean = |costs: &mut dyn FnMut(&CoInstance) -> Result<f64>| -> Result<f64> {
            let mut s = 0.0;
            for inst in data {
                s += checked_error(costs(inst)?, inst)?;
            }
            Ok(s / data.len() as f64)
        };
        match config.task {
            Task::Tsp => {
                let tsp = |inst: &CoInstance| match inst {
                    CoInstance::Tsp(t) => t.clone(),
                    CoInstance::Vkc(_) => unreachable!("tour task"),
                };
                let greedy = mean(&mut |i| {
                    let t = tsp(i);
                    Ok(tour_cost(&t.graph, &greedy_nn_tour(&t.graph, t.start)?)?)
                })?;
                rows.push(aggregate("greedy", *size, None, &[greedy])?);
                for &w in &config.beam_widths {
                    let beam = mean(&mut |i| {
                        let t = tsp(i);
                        Ok(tour_cost(&t.graph, &beam_weight_tour(&t.graph, t.start, w)?)?)
                    })?;
                    rows.push(aggregate("beam", *size, Some(w), &[beam])?);
                }
                let chris = mean(&mut |i| {
                    let t = tsp(i);
                    let c = christofides(&t.graph)?;
                    if !c.exact_matching {
                        inexact += 1;
                    } else if tour_cost(&t.graph, &c.tour)? > 1.5 * t.optimal_cost * (1.0 + 1e-12) {
                        return Err(HarnessError::Invariant(format!("christofides above 3/2 of the optimum at n = {size}")));
                    }
                    Ok(tour_cost(&t.graph, &c.tour)?)
                })?;
                rows.push(aggregate("christofides", *size, None, &[chris])?);
            }
            Task::Vkc => {
                let errors = per_seed_errors(config, data, |seed, i, inst| {
                    let CoInstance::Vkc(v) = inst else { unreachable!("centre task") };
                    let first = Rng::new(seed).split_index("gon", i as u64).below(v.n());
                    let centers = gon_farthest_first(&v.graph, config.k, first)?;
                    if centers.len() != config.k {
                        return Err(HarnessError::Invariant("farthest-first returned a wrong centre count".into()));
                    }
                    let cost = vkc_objective(&v.graph, &centers)?;
                    if cost > 2.0 * v.optimum * (1.0 + 1e-12) {
                        return Err(HarnessError::Invariant(format!("farthest-first above twice the optimum at n = {size}")));
                    }
                    Ok(vec![cost])
                })?;
                rows.extend(rows_for(config, "gon", *size, &errors)?);
            }
            Task::Pretrain => unreachable!("rejected above"),
        }
    }
    report::merge_metrics(
        out_dir,
        &format!("baselines/{}", config.task),
        json!({"christofides_greedy_matching": inexact}),
    )?;
    report::merge_results(out_dir, rows)
}
