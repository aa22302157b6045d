use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use algoreason_harness::config::{ExperimentConfig, Task};
use algoreason_harness::{run, HarnessError, Result};
use algoreason_model::transfer::parse_algorithms;
use algoreason_model::TransferMode;

#[derive(Debug, Parser)]
#[command(name = "algoreason", version, about = "Algorithmic pre-training and transfer to TSP and vertex k-center")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration; desk defaults of the task when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Task when no configuration file is given: tsp, vkc or pretrain.
    #[arg(long, global = true)]
    task: Option<Task>,
    /// Run seed; repeat for several. Replaces the configured seeds.
    #[arg(long, global = true)]
    seed: Vec<u64>,
    /// none, pf, pft, 2proc or mtl.
    #[arg(long, global = true)]
    transfer: Option<TransferMode>,
    /// Comma-separated algorithm ids or a preset (fmitb, mtab).
    #[arg(long, global = true)]
    algos: Option<String>,
    /// Pre-trained checkpoint; `{seed}` is replaced by the run seed.
    #[arg(long, global = true)]
    pretrained: Option<String>,
    /// Beam width; repeat for several. Replaces the configured widths.
    #[arg(long = "beam-width", global = true)]
    beam_width: Vec<usize>,
    #[arg(long, global = true, default_value = "runs")]
    out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the configured datasets as JSON lines.
    GenData,
    /// Pre-train one processor per seed on the configured algorithms.
    Pretrain,
    /// Train the optimisation task under the configured transfer mode.
    Train,
    /// Evaluate trained checkpoints against the exact optima.
    Eval,
    /// Evaluate the classical heuristics.
    Baselines,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let default_task = match cli.command {
        Command::Pretrain => Task::Pretrain,
        _ => Task::Tsp,
    };
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::desk(cli.task.unwrap_or(default_task)),
    };
    if let Some(task) = cli.task {
        config.task = task;
    }
    if !cli.seed.is_empty() {
        config.seeds = cli.seed.clone();
    }
    if let Some(mode) = cli.transfer {
        config.transfer = mode;
    }
    if let Some(list) = &cli.algos {
        config.algorithms = parse_algorithms(list)?;
    }
    if let Some(p) = &cli.pretrained {
        config.pretrained = Some(p.clone());
    }
    if !cli.beam_width.is_empty() {
        config.beam_widths = cli.beam_width.clone();
    }
    config.validate()?;
    Ok(config)
}

fn execute(cli: &Cli) -> Result<()> {
    let config = resolve(cli)?;
    let out = &cli.out_dir;
    match cli.command {
        Command::GenData => {
            for p in run::cmd_gen_data(&config, out)? {
                println!("{}", p.display());
            }
        }
        Command::Pretrain => {
            for s in run::cmd_pretrain(&config, out)? {
                println!("seed {}: best epoch {} score {:.4} -> {}", s.seed, s.best_epoch, s.best_score, s.checkpoint.display());
            }
        }
        Command::Train => {
            for s in run::cmd_train(&config, out)? {
                println!(
                    "seed {}: best epoch {} val rel err {:.4} -> {}",
                    s.seed,
                    s.best_epoch,
                    s.best_val_rel_err,
                    s.checkpoint.display()
                );
            }
        }
        Command::Eval | Command::Baselines => {
            let table = match cli.command {
                Command::Eval => run::cmd_eval(&config, out)?,
                _ => run::cmd_baselines(&config, out)?,
            };
            println!("{:<14} {:>5} {:>6} {:>12} {:>10} {:>5}", "model", "size", "width", "mean_rel_err", "std", "seeds");
            for r in table {
                let width = r.width.map_or("-".to_string(), |w| w.to_string());
                let std = r.std.map_or("-".to_string(), |s| format!("{s:.4}"));
                println!("{:<14} {:>5} {:>6} {:>12.4} {:>10} {:>5}", r.model, r.size, width, r.mean_rel_err, std, r.seeds);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ HarnessError::Invariant(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
