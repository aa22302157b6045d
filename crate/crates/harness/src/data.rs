//! Seeded datasets and their JSON-lines files.
//!
//! Every split draws from its own labelled stream of the data seed, so
//! changing one split's size never changes another split's instances.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use algoreason_core::clrs::{Algorithm, Trajectory};
use algoreason_core::oracles::{vkc_tractable, HELD_KARP_MAX_N};
use algoreason_core::tasks::{TspInstance, VkcInstance};
use algoreason_core::{CoreError, Rng};

use crate::config::{ExperimentConfig, Task};
use crate::{HarnessError, Result};

/// One optimisation instance with its exact solution.
#[derive(Debug, Clone, PartialEq)]
pub enum CoInstance {
    Tsp(TspInstance),
    Vkc(VkcInstance),
}

impl CoInstance {
    pub fn n(&self) -> usize {
        match self {
            CoInstance::Tsp(t) => t.n(),
            CoInstance::Vkc(v) => v.n(),
        }
    }

    pub fn optimum(&self) -> f64 {
        match self {
            CoInstance::Tsp(t) => t.optimal_cost,
            CoInstance::Vkc(v) => v.optimum,
        }
    }

    pub fn trajectory(&self) -> Trajectory {
        match self {
            CoInstance::Tsp(t) => t.to_trajectory(),
            CoInstance::Vkc(v) => v.to_trajectory(),
        }
    }

    pub fn to_json_line(&self) -> String {
        match self {
            CoInstance::Tsp(t) => t.to_json_line(),
            CoInstance::Vkc(v) => v.to_json_line(),
        }
    }

    fn from_json_line(task: Task, line: &str) -> Result<Self> {
        Ok(match task {
            Task::Tsp => CoInstance::Tsp(TspInstance::from_json_line(line)?),
            Task::Vkc => CoInstance::Vkc(VkcInstance::from_json_line(line)?),
            Task::Pretrain => return Err(HarnessError::Config("pre-training has no optimisation instances".into())),
        })
    }
}

/// Ground truth is exact, so sizes beyond the oracles are refused up front.
fn check_tractable(task: Task, n: usize, k: usize) -> Result<()> {
    let ok = match task {
        Task::Tsp => (3..=HELD_KARP_MAX_N).contains(&n),
        Task::Vkc => k <= n && vkc_tractable(n, k),
        Task::Pretrain => true,
    };
    if ok {
        Ok(())
    } else {
        Err(HarnessError::Core(CoreError::SizeLimit(format!("{task} ground truth at n = {n}"))))
    }
}

fn generate_co(task: Task, n: usize, k: usize, rng: &mut Rng) -> Result<CoInstance> {
    check_tractable(task, n, k)?;
    Ok(match task {
        Task::Tsp => CoInstance::Tsp(TspInstance::generate(n, rng)?),
        Task::Vkc => CoInstance::Vkc(VkcInstance::generate(n, k, rng)?),
        Task::Pretrain => unreachable!("checked by the caller"),
    })
}

fn data_rng(config: &ExperimentConfig, label: &str) -> Rng {
    Rng::new(config.data_seed).split(label)
}

/// Training instances; sizes drawn uniformly from `train_sizes`.
pub fn co_train(config: &ExperimentConfig) -> Result<Vec<CoInstance>> {
    let mut rng = data_rng(config, &format!("{}/train", config.task));
    (0..config.train_samples)
        .map(|_| {
            let n = config.train_sizes[rng.below(config.train_sizes.len())];
            generate_co(config.task, n, config.k, &mut rng)
        })
        .collect()
}

/// `count` instances of exactly `n` nodes from the stream named `split`.
pub fn co_fixed(config: &ExperimentConfig, split: &str, n: usize, count: usize) -> Result<Vec<CoInstance>> {
    let mut rng = data_rng(config, &format!("{}/{split}/{n}", config.task));
    (0..count).map(|_| generate_co(config.task, n, config.k, &mut rng)).collect()
}

pub fn co_val(config: &ExperimentConfig) -> Result<Vec<CoInstance>> {
    co_fixed(config, "val", config.val_size, config.val_samples)
}

pub fn co_test(config: &ExperimentConfig, n: usize) -> Result<Vec<CoInstance>> {
    co_fixed(config, "test", n, config.test_samples)
}

/// Trajectories of `algo` with sizes drawn from `sizes`.
pub fn algorithm_samples(
    config: &ExperimentConfig,
    algo: Algorithm,
    split: &str,
    sizes: &[usize],
    count: usize,
) -> Result<Vec<Trajectory>> {
    let mut rng = data_rng(config, &format!("{}/{split}", algo.id()));
    (0..count)
        .map(|_| {
            let n = sizes[rng.below(sizes.len())];
            Ok(algo.sample(n, config.graph_family, &mut rng)?)
        })
        .collect()
}

/// Training and validation trajectories of every configured algorithm.
pub fn algorithm_train_val(config: &ExperimentConfig) -> Result<(Vec<Vec<Trajectory>>, Vec<Vec<Trajectory>>)> {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for &algo in &config.algorithms {
        train.push(algorithm_samples(config, algo, "train", &config.train_sizes, config.train_samples)?);
        val.push(algorithm_samples(config, algo, "val", &[config.val_size], config.val_samples)?);
    }
    Ok((train, val))
}

pub fn algorithm_test(config: &ExperimentConfig, algo: Algorithm, n: usize) -> Result<Vec<Trajectory>> {
    algorithm_samples(config, algo, &format!("test/{n}"), &[n], config.test_samples)
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for line in lines {
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn read_lines<T>(path: &Path, mut parse: impl FnMut(&str) -> Result<T>) -> Result<Vec<T>> {
    let file = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (k, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse(&line).map_err(|e| HarnessError::Data(format!("{}:{}: {e}", path.display(), k + 1)))?);
    }
    Ok(out)
}

pub fn write_instances(path: &Path, data: &[CoInstance]) -> Result<()> {
    write_lines(path, data.iter().map(CoInstance::to_json_line))
}

/// Reads and re-validates instances; every record's solution is rechecked.
pub fn read_instances(task: Task, path: &Path) -> Result<Vec<CoInstance>> {
    read_lines(path, |l| CoInstance::from_json_line(task, l))
}

pub fn write_trajectories(path: &Path, data: &[Trajectory]) -> Result<()> {
    write_lines(path, data.iter().map(Trajectory::to_json_line))
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    read_lines(path, |l| Ok(Trajectory::from_json_line(l)?))
}

/// Fields that determine the datasets; stored next to them.
fn data_manifest(config: &ExperimentConfig) -> Value {
    json!({
        "task": config.task,
        "algorithms": config.algorithms,
        "graph_family": config.graph_family,
        "train_sizes": config.train_sizes,
        "train_samples": config.train_samples,
        "val_size": config.val_size,
        "val_samples": config.val_samples,
        "test_sizes": config.test_sizes,
        "test_samples": config.test_samples,
        "k": config.k,
        "data_seed": config.data_seed,
    })
}

pub fn data_dir(out_dir: &Path, task: Task) -> PathBuf {
    out_dir.join("data").join(task.as_str())
}

/// Every file of the configured task, written under `out_dir/data/<task>/`.
/// Returns the written paths in a fixed order.
pub fn write_all(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = data_dir(out_dir, config.task);
    let mut paths = Vec::new();
    let mut emit = |name: String| {
        let p = dir.join(name);
        paths.push(p.clone());
        p
    };
    match config.task {
        Task::Pretrain => {
            let (train, val) = algorithm_train_val(config)?;
            for (k, &algo) in config.algorithms.iter().enumerate() {
                write_trajectories(&emit(format!("{}_train.jsonl", algo.id())), &train[k])?;
                write_trajectories(&emit(format!("{}_val_n{}.jsonl", algo.id(), config.val_size)), &val[k])?;
                for &n in &config.test_sizes {
                    write_trajectories(&emit(format!("{}_test_n{n}.jsonl", algo.id())), &algorithm_test(config, algo, n)?)?;
                }
            }
        }
        Task::Tsp | Task::Vkc => {
            write_instances(&emit("train.jsonl".into()), &co_train(config)?)?;
            write_instances(&emit(format!("val_n{}.jsonl", config.val_size)), &co_val(config)?)?;
            for &n in &config.test_sizes {
                write_instances(&emit(format!("test_n{n}.jsonl")), &co_test(config, n)?)?;
            }
        }
    }
    let manifest = serde_json::to_string_pretty(&data_manifest(config))?;
    fs::write(dir.join("manifest.json"), manifest + "\n")?;
    Ok(paths)
}

/// True when `out_dir` holds the datasets of exactly this configuration.
pub fn on_disk(config: &ExperimentConfig, out_dir: &Path) -> bool {
    let path = data_dir(out_dir, config.task).join("manifest.json");
    fs::read_to_string(path)
        .ok()
        .and_then(|t| serde_json::from_str::<Value>(&t).ok())
        .is_some_and(|v| v == data_manifest(config))
}

/// Optimisation splits: from disk when the stored manifest matches,
/// otherwise regenerated (identically) from the seed.
pub struct CoData {
    pub train: Vec<CoInstance>,
    pub val: Vec<CoInstance>,
    pub test: Vec<(usize, Vec<CoInstance>)>,
}

pub fn load_co(config: &ExperimentConfig, out_dir: &Path) -> Result<CoData> {
    let task = config.task;
    if on_disk(config, out_dir) {
        let dir = data_dir(out_dir, task);
        let test = config
            .test_sizes
            .iter()
            .map(|&n| Ok((n, read_instances(task, &dir.join(format!("test_n{n}.jsonl")))?)))
            .collect::<Result<_>>()?;
        return Ok(CoData {
            train: read_instances(task, &dir.join("train.jsonl"))?,
            val: read_instances(task, &dir.join(format!("val_n{}.jsonl", config.val_size)))?,
            test,
        });
    }
    let test = config.test_sizes.iter().map(|&n| Ok((n, co_test(config, n)?))).collect::<Result<_>>()?;
    Ok(CoData { train: co_train(config)?, val: co_val(config)?, test })
}
