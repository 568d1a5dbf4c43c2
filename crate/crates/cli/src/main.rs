//! `grmssvdd` command line: generate, preprocess, train, evaluate,
//! gridsearch and earliness over one JSON experiment config.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use grmssvdd::experiment::{self, ExperimentConfig};
use grmssvdd::DecisionStrategy;

#[derive(Parser)]
#[command(name = "grmssvdd", version, about = "Graph-regularized multimodal subspace SVDD experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic events (CSV + JSON sidecars) to the events directory.
    Generate,
    /// Split, window, add noise, reduce and standardize; writes train/test sets.
    Preprocess,
    /// Train one model from the preprocessed training set.
    Train,
    /// Reliability report of a model on the preprocessed test set.
    Evaluate,
    /// Holdout grid search, then retrain and evaluate the winner.
    Gridsearch,
    /// Rolling-window earliness on the test events.
    Earliness,
    /// Print the effective configuration as JSON.
    ShowConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

/// Flags override the matching fields of the config file.
#[derive(Args)]
struct Common {
    /// Experiment config (JSON). Missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the split, noise, generator and model.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (`out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Events directory (`events_dir`).
    #[arg(long, global = true)]
    events: Option<PathBuf>,
    /// Model file; defaults to `<out>/model.json`.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Only report this strategy: and, or, uni0, uni1, ...
    #[arg(long, global = true)]
    strategy: Option<DecisionStrategy>,
    /// Noise factor relative to each channel's std.
    #[arg(long, global = true)]
    noise: Option<f64>,
    /// Non-linear projection on or off (also pins the grid's npt axis).
    #[arg(long, global = true, value_enum)]
    npt: Option<OnOff>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.set_seed(seed);
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(ev) = &self.events {
            cfg.events_dir = ev.clone();
        }
        if let Some(s) = self.strategy {
            cfg.strategies = vec![s];
        }
        if let Some(n) = self.noise {
            cfg.noise_factor = n;
        }
        if let Some(npt) = self.npt {
            let on = matches!(npt, OnOff::On);
            cfg.model.use_npt = on;
            cfg.grid.npt = vec![on];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn model_path(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.model
            .clone()
            .unwrap_or_else(|| cfg.out_dir.join(experiment::MODEL_FILE))
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.common.resolve()?;
    match cli.command {
        Command::Generate => {
            let events = experiment::run_generate(&cfg)?;
            println!("wrote {} events to {}", events.len(), cfg.events_dir.display());
        }
        Command::Preprocess => {
            let p = experiment::run_preprocess(&cfg)?;
            println!(
                "train: {} instances from {} events; test: {} instances from {} events; D = {:?}",
                p.train.len(),
                p.split.train.len(),
                p.test.len(),
                p.split.test.len(),
                p.train.dims()
            );
        }
        Command::Train => {
            let model = experiment::run_train(&cfg)?;
            println!(
                "trained on {} targets, {} iterations, R = {:.6}; wrote {}",
                model.meta.n_train,
                model.meta.iterations_run,
                model.solution.radius,
                cfg.out_dir.join(experiment::MODEL_FILE).display()
            );
        }
        Command::Evaluate => {
            let report = experiment::run_evaluate(&cfg, &cli.common.model_path(&cfg))?;
            print!("{}", report.table());
        }
        Command::Gridsearch => {
            let result = experiment::run_gridsearch(&cfg)?;
            println!(
                "{} configurations, {} rows, {} holdout events",
                result.n_configs,
                result.rows.len(),
                result.n_holdout_events
            );
            if let Some(best) = &result.best {
                println!(
                    "best: {} with {} (holdout gm {:.3})",
                    serde_json::to_string(&best.config)?,
                    best.strategy,
                    best.gm().unwrap_or(f64::NAN)
                );
            }
            if let Some(r) = &result.test_report {
                print!("{}", r.table());
            }
        }
        Command::Earliness => {
            let rows = experiment::run_earliness(&cfg, &cli.common.model_path(&cfg))?;
            print!("{}", experiment::earliness_table(&rows));
        }
        Command::ShowConfig => {
            println!("{}", serde_json::to_string_pretty(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
