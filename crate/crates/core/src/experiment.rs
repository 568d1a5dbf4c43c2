//! Experiment pipeline shared by the command line and the end-to-end tests:
//! generate -> preprocess -> train -> evaluate, plus grid search and the
//! rolling earliness run.
//!
//! Every stage has an in-memory form and a `run_*` form that reads and writes
//! the files under `out_dir`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, assemble_dataset, EventSeries, MultimodalDataset};
use crate::error::{invalid, Error, Result};
use crate::inference::{self, DecisionStrategy};
use crate::metrics::{self, EarlinessReport, EvaluationReport, EventDetection};
use crate::preprocessing::{
    self, extract_reliability_instances, extract_rolling_instances, ExtractionMode, Preprocessor, WindowSpec,
};
use crate::regularizers::Regularizer;
use crate::synth::{self, SynthConfig};
use crate::trainer::{self, ModelConfig, Sign, TrainedModel};

pub const TRAIN_FILE: &str = "train.json";
pub const TEST_FILE: &str = "test.json";
pub const PREPROCESSING_FILE: &str = "preprocessing.json";
pub const SPLIT_FILE: &str = "split.json";
pub const MODEL_FILE: &str = "model.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const GRID_JSON: &str = "gridsearch.json";
pub const GRID_TXT: &str = "gridsearch.txt";
pub const EARLINESS_JSON: &str = "earliness.json";
pub const EARLINESS_TXT: &str = "earliness.txt";

/// Environment variable bounding the grid-search worker pool.
pub const WORKERS_ENV: &str = "GRMSSVDD_WORKERS";

const DEFAULT_PCA: usize = 30;

/// Hyperparameter lists. The defaults span the usual decades.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub betas: Vec<f64>,
    #[serde(rename = "Cs")]
    pub cs: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub ds: Vec<usize>,
    pub etas: Vec<f64>,
    pub ks: Vec<usize>,
    pub regularizers: Vec<Regularizer>,
    /// Sign vectors to try; empty means all `2^M` combinations.
    pub signs: Vec<Vec<Sign>>,
    pub npt: Vec<bool>,
}

fn decades(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 10f64.powi(e)).collect()
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            betas: decades(-4, 4),
            cs: vec![0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            sigmas: decades(-3, 3),
            ds: vec![1, 2, 3, 4, 5, 10, 20, 50, 100],
            etas: vec![0.1],
            ks: (0..=10).collect(),
            regularizers: Regularizer::ALL.to_vec(),
            signs: Vec::new(),
            npt: vec![false, true],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub events_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Window length in timesteps.
    pub window: usize,
    pub noise_factor: f64,
    /// PCA components per modality; `None` means `min(30, D_m, N_train)`.
    pub pca_components: Option<usize>,
    pub train_fraction: f64,
    pub model: ModelConfig,
    /// Strategies to report; empty means AND, OR and every UNI.
    pub strategies: Vec<DecisionStrategy>,
    pub grid: GridConfig,
    /// Critical clearing time in seconds.
    pub cct: f64,
    pub seed: u64,
    pub synth: SynthConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            events_dir: PathBuf::from("events"),
            out_dir: PathBuf::from("out"),
            window: 10,
            noise_factor: 0.0,
            pca_components: None,
            train_fraction: 0.7,
            model: ModelConfig::default(),
            strategies: Vec::new(),
            grid: GridConfig::default(),
            cct: 0.1,
            seed: 0,
            synth: SynthConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            msg: e.to_string(),
        })
    }

    /// Use one seed for the split, the noise, the generator and the model.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.synth.seed = seed;
        self.model.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return invalid("window must be at least 1");
        }
        if !(self.noise_factor >= 0.0) {
            return invalid(format!("noise_factor must be >= 0, got {}", self.noise_factor));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return invalid(format!("train_fraction must be in (0, 1), got {}", self.train_fraction));
        }
        if !(self.cct > 0.0) {
            return invalid(format!("cct must be positive, got {}", self.cct));
        }
        if self.pca_components == Some(0) {
            return invalid("pca_components must be at least 1");
        }
        Ok(())
    }

    pub fn window_spec(&self, mode: ExtractionMode) -> Result<WindowSpec> {
        WindowSpec::new(self.window, mode)
    }

    pub fn strategies_for(&self, m: usize) -> Result<Vec<DecisionStrategy>> {
        if self.strategies.is_empty() {
            return Ok(DecisionStrategy::all(m));
        }
        self.strategies.iter().map(|s| s.validate(m)).collect()
    }
}

/// Independent seed for one pipeline stream.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const NOISE_TRAIN: u64 = 1;
const NOISE_TEST: u64 = 2;
const SHUFFLE_TRAIN: u64 = 3;
const SHUFFLE_TEST: u64 = 4;
const HOLDOUT: u64 = 5;
const NOISE_ROLLING: u64 = 6;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

// ---------------------------------------------------------------- generate

pub fn run_generate(cfg: &ExperimentConfig) -> Result<Vec<EventSeries>> {
    let events = synth::generate(&cfg.synth)?;
    fs::create_dir_all(&cfg.events_dir)?;
    for ev in &events {
        data::write_event(&cfg.events_dir, ev)?;
    }
    Ok(events)
}

// -------------------------------------------------------------- preprocess

/// Event ids on each side of the split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Preprocessed train/test sets and the fitted chain.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: MultimodalDataset,
    pub test: MultimodalDataset,
    pub preprocessor: Preprocessor,
    pub split: SplitRecord,
}

fn windows_of(events: &[EventSeries], spec: &WindowSpec) -> Result<Vec<data::MultimodalInstance>> {
    let mut out = Vec::new();
    for ev in events {
        out.extend(extract_reliability_instances(ev, spec)?);
    }
    Ok(out)
}

fn channels_per_modality(events: &[EventSeries]) -> Result<Vec<usize>> {
    let first = events.first().ok_or_else(|| Error::InvalidInput("no events".into()))?;
    let counts: Vec<usize> = first.channels_by_modality().iter().map(Vec::len).collect();
    for ev in events {
        if ev.modality_of_channel() != first.modality_of_channel() {
            return invalid(format!(
                "event {} has a different channel layout than {}",
                ev.id(),
                first.id()
            ));
        }
    }
    Ok(counts)
}

/// Split by event, extract reliability windows, add noise, fit PCA on the
/// training side, shuffle and standardize.
pub fn prepare(cfg: &ExperimentConfig, events: &[EventSeries]) -> Result<Prepared> {
    cfg.validate()?;
    let channels = channels_per_modality(events)?;
    let (train_ev, test_ev) = data::split_train_test(events, cfg.train_fraction, cfg.seed)?;
    if train_ev.is_empty() || test_ev.is_empty() {
        return invalid(format!(
            "{} events cannot be split into non-empty train and test sides",
            events.len()
        ));
    }
    let spec = cfg.window_spec(ExtractionMode::Reliability)?;
    let n_train_windows;
    let all = {
        let mut w = windows_of(&train_ev, &spec)?;
        n_train_windows = w.len();
        w.extend(windows_of(&test_ev, &spec)?);
        assemble_dataset(w)?
    };
    let channel_std = preprocessing::channel_stds(&all, &channels)?;
    let raw_train = all.subset(|i, _| i < n_train_windows)?;
    let raw_test = all.subset(|i, _| i >= n_train_windows)?;

    let noisy_train = preprocessing::inject_noise(&raw_train, cfg.noise_factor, &channel_std, derive_seed(cfg.seed, NOISE_TRAIN))?;
    let noisy_test = preprocessing::inject_noise(&raw_test, cfg.noise_factor, &channel_std, derive_seed(cfg.seed, NOISE_TEST))?;

    let n_comp = match cfg.pca_components {
        Some(n) => n,
        None => {
            let dmin = *noisy_train.dims().iter().min().unwrap_or(&1);
            DEFAULT_PCA.min(dmin).min(noisy_train.len())
        }
    };
    let pca = preprocessing::fit_pca(&noisy_train, n_comp)?;
    let train = preprocessing::apply_pca_dataset(&pca, &noisy_train)?.shuffled(derive_seed(cfg.seed, SHUFFLE_TRAIN));
    let test = preprocessing::apply_pca_dataset(&pca, &noisy_test)?.shuffled(derive_seed(cfg.seed, SHUFFLE_TEST));
    let (train, test, normalization) = preprocessing::fit_apply_normalization(&train, &test)?;

    Ok(Prepared {
        train,
        test,
        preprocessor: Preprocessor {
            pca,
            normalization,
            channel_std,
            noise_factor: cfg.noise_factor,
        },
        split: SplitRecord {
            train: train_ev.iter().map(|e| e.id().to_string()).collect(),
            test: test_ev.iter().map(|e| e.id().to_string()).collect(),
        },
    })
}

pub fn run_preprocess(cfg: &ExperimentConfig) -> Result<Prepared> {
    let events = data::load_events_dir(&cfg.events_dir)?;
    if events.is_empty() {
        return invalid(format!("no events found in {}", cfg.events_dir.display()));
    }
    let prepared = prepare(cfg, &events)?;
    let out = &cfg.out_dir;
    fs::create_dir_all(out)?;
    prepared.train.save_json(&out.join(TRAIN_FILE))?;
    prepared.test.save_json(&out.join(TEST_FILE))?;
    write_json(&out.join(PREPROCESSING_FILE), &prepared.preprocessor)?;
    write_json(&out.join(SPLIT_FILE), &prepared.split)?;
    Ok(prepared)
}

/// Reload what `run_preprocess` wrote.
pub fn load_prepared(out_dir: &Path) -> Result<Prepared> {
    Ok(Prepared {
        train: MultimodalDataset::load_json(&out_dir.join(TRAIN_FILE))?,
        test: MultimodalDataset::load_json(&out_dir.join(TEST_FILE))?,
        preprocessor: read_json(&out_dir.join(PREPROCESSING_FILE))?,
        split: read_json(&out_dir.join(SPLIT_FILE))?,
    })
}

// ------------------------------------------------------------------- train

/// Train on the target instances of `train` and attach the preprocessing chain.
pub fn train_model(config: &ModelConfig, train: &MultimodalDataset, pre: Option<&Preprocessor>) -> Result<TrainedModel> {
    let model = trainer::train(&train.targets()?, config)?;
    Ok(match pre {
        Some(p) => model.with_preprocessing(p.clone()),
        None => model,
    })
}

fn save_model_checked(model: &TrainedModel, path: &Path) -> Result<()> {
    model.save(path)?;
    let back = TrainedModel::load(path)?;
    if back.to_json()? != model.to_json()? {
        return invalid(format!("model written to {} does not read back identically", path.display()));
    }
    Ok(())
}

pub fn run_train(cfg: &ExperimentConfig) -> Result<TrainedModel> {
    let prepared = load_prepared(&cfg.out_dir)?;
    let model = train_model(&cfg.model, &prepared.train, Some(&prepared.preprocessor))?;
    save_model_checked(&model, &cfg.out_dir.join(MODEL_FILE))?;
    Ok(model)
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: DecisionStrategy,
    pub report: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub n_instances: usize,
    pub strategies: Vec<StrategyReport>,
}

impl ReliabilityReport {
    pub fn get(&self, s: DecisionStrategy) -> Option<&EvaluationReport> {
        self.strategies.iter().find(|r| r.strategy == s).map(|r| &r.report)
    }

    pub fn table(&self) -> String {
        let rows: Vec<(String, EvaluationReport)> = self
            .strategies
            .iter()
            .map(|r| (r.strategy.to_string(), r.report.clone()))
            .collect();
        metrics::reliability_table(&rows)
    }
}

/// Reliability metrics of `model` on a preprocessed dataset.
pub fn evaluate(model: &TrainedModel, ds: &MultimodalDataset, strategies: &[DecisionStrategy]) -> Result<ReliabilityReport> {
    let verdicts = inference::classify_dataset(model, ds)?;
    let labels: Vec<bool> = ds.instances().iter().map(|i| i.label.is_target()).collect();
    let strategies = strategies
        .iter()
        .map(|&s| {
            let s = s.validate(ds.n_modalities())?;
            let preds: Vec<bool> = verdicts.iter().map(|p| inference::fuse(p, s)).collect();
            Ok(StrategyReport {
                strategy: s,
                report: metrics::reliability_metrics(&preds, &labels)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ReliabilityReport {
        n_instances: ds.len(),
        strategies,
    })
}

fn write_report(out: &Path, model: &TrainedModel, ds: &MultimodalDataset, report: &ReliabilityReport) -> Result<()> {
    write_json(&out.join(REPORT_JSON), report)?;
    fs::write(out.join(REPORT_TXT), report.table())?;
    for r in &report.strategies {
        let rows = inference::prediction_rows(model, ds, r.strategy)?;
        let file = fs::File::create(out.join(format!("predictions_{}.csv", r.strategy)))?;
        inference::write_predictions_csv(&rows, std::io::BufWriter::new(file))?;
    }
    Ok(())
}

pub fn run_evaluate(cfg: &ExperimentConfig, model_path: &Path) -> Result<ReliabilityReport> {
    let model = TrainedModel::load(model_path)?;
    let test = MultimodalDataset::load_json(&cfg.out_dir.join(TEST_FILE))?;
    let report = evaluate(&model, &test, &cfg.strategies_for(test.n_modalities())?)?;
    write_report(&cfg.out_dir, &model, &test, &report)?;
    Ok(report)
}

// -------------------------------------------------------------- gridsearch

/// One evaluated `(configuration, strategy)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    /// Position of the configuration in enumeration order.
    pub config_index: usize,
    pub config: ModelConfig,
    pub strategy: DecisionStrategy,
    pub report: Option<EvaluationReport>,
    /// Why the configuration could not be trained, if it failed.
    pub error: Option<String>,
}

impl GridRow {
    pub fn gm(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.gm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub n_configs: usize,
    pub n_holdout_events: usize,
    /// Sorted by holdout gm, best first; failures last.
    pub rows: Vec<GridRow>,
    pub best: Option<GridRow>,
    /// Winner retrained on the whole training side and scored on the test set.
    pub test_report: Option<ReliabilityReport>,
}

impl GridResult {
    pub fn table(&self) -> String {
        use std::fmt::Write as _;
        let mut out = format!(
            "{:>5} {:>4} {:>3} {:>6} {:>8} {:>6} {:>7} {:>3} {:>4} {:>8}  {:<10} {:>6} {:>6} {:>6}\n",
            "rank", "reg", "d", "C", "beta", "eta", "sigma", "k", "npt", "signs", "strategy", "tpr", "tnr", "gm"
        );
        for (rank, r) in self.rows.iter().enumerate() {
            let c = &r.config;
            let signs: String = if c.signs.is_empty() {
                "-..".into()
            } else {
                c.signs.iter().map(|s| if *s == Sign::Plus { '+' } else { '-' }).collect()
            };
            let _ = write!(
                out,
                "{:>5} {:>4} {:>3} {:>6} {:>8} {:>6} {:>7} {:>3} {:>4} {:>8}  {:<10}",
                rank + 1,
                c.regularizer.to_string(),
                c.d,
                c.c,
                c.beta,
                c.eta,
                if c.use_npt { c.sigma.to_string() } else { "-".into() },
                c.k,
                if c.use_npt { "on" } else { "off" },
                signs,
                r.strategy.to_string(),
            );
            match &r.report {
                Some(rep) => {
                    let _ = writeln!(out, " {:>6.3} {:>6.3} {:>6.3}", rep.tpr, rep.tnr, rep.gm);
                }
                None => {
                    let _ = writeln!(out, " failed: {}", r.error.as_deref().unwrap_or("?"));
                }
            }
        }
        out
    }
}

fn nonempty<T: Clone>(list: &[T], fallback: T) -> Vec<T> {
    if list.is_empty() {
        vec![fallback]
    } else {
        list.to_vec()
    }
}

/// Cartesian product of the grid. `k` only varies for graph regularizers and
/// `sigma` only with NPT; empty lists fall back to the base configuration.
pub fn expand_grid(grid: &GridConfig, base: &ModelConfig, m: usize) -> Vec<ModelConfig> {
    let regs = nonempty(&grid.regularizers, base.regularizer);
    let ds = nonempty(&grid.ds, base.d);
    let cs = nonempty(&grid.cs, base.c);
    let betas = nonempty(&grid.betas, base.beta);
    let etas = nonempty(&grid.etas, base.eta);
    let ks = nonempty(&grid.ks, base.k);
    let npts = nonempty(&grid.npt, base.use_npt);
    let sigmas = nonempty(&grid.sigmas, base.sigma);
    let signs = if grid.signs.is_empty() {
        Sign::combinations(m)
    } else {
        grid.signs.clone()
    };
    let mut out = Vec::new();
    for &reg in &regs {
        let reg_ks = if reg.graph().is_some() { ks.clone() } else { vec![base.k] };
        for &d in &ds {
            for &c in &cs {
                for &beta in &betas {
                    for &eta in &etas {
                        for &k in &reg_ks {
                            for &use_npt in &npts {
                                let sig = if use_npt { sigmas.clone() } else { vec![base.sigma] };
                                for &sigma in &sig {
                                    for s in &signs {
                                        out.push(ModelConfig {
                                            d,
                                            c,
                                            beta,
                                            eta,
                                            sigma,
                                            k,
                                            regularizer: reg,
                                            signs: s.clone(),
                                            use_npt,
                                            ..base.clone()
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Split a dataset by source event into a fitting part and a holdout of
/// `floor(n_events / 3)` events (at least one).
pub fn holdout_split(ds: &MultimodalDataset, seed: u64) -> Result<(MultimodalDataset, MultimodalDataset, usize)> {
    let events: BTreeSet<&str> = ds.instances().iter().map(|i| i.source_event.as_str()).collect();
    let mut events: Vec<String> = events.into_iter().map(str::to_string).collect();
    if events.len() < 2 {
        return invalid("grid search needs at least two training events for a holdout");
    }
    events.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_hold = (events.len() / 3).max(1);
    let hold: BTreeSet<String> = events[..n_hold].iter().cloned().collect();
    let fit = ds.subset(|_, i| !hold.contains(&i.source_event))?;
    let val = ds.subset(|_, i| hold.contains(&i.source_event))?;
    Ok((fit, val, n_hold))
}

/// Worker count from the environment, defaulting to the available cores.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Evaluate every configuration on the holdout, rank by gm and retrain the
/// winner on all of `train`. `test` is scored with the winner when given.
pub fn gridsearch(
    cfg: &ExperimentConfig,
    train: &MultimodalDataset,
    test: Option<&MultimodalDataset>,
    pre: Option<&Preprocessor>,
    workers: usize,
) -> Result<(GridResult, Option<TrainedModel>)> {
    let m = train.n_modalities();
    let strategies = cfg.strategies_for(m)?;
    let configs = expand_grid(&cfg.grid, &cfg.model, m);
    if configs.is_empty() {
        return invalid("the grid is empty");
    }
    let (fit, val, n_hold) = holdout_split(train, derive_seed(cfg.seed, HOLDOUT))?;

    let job = |(idx, config): (usize, &ModelConfig)| -> Vec<GridRow> {
        let outcome = train_model(config, &fit, None).and_then(|model| evaluate(&model, &val, &strategies));
        match outcome {
            Ok(rep) => rep
                .strategies
                .into_iter()
                .map(|r| GridRow {
                    config_index: idx,
                    config: config.clone(),
                    strategy: r.strategy,
                    report: Some(r.report),
                    error: None,
                })
                .collect(),
            Err(e) => strategies
                .iter()
                .map(|&s| GridRow {
                    config_index: idx,
                    config: config.clone(),
                    strategy: s,
                    report: None,
                    error: Some(e.to_string()),
                })
                .collect(),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    // collect() on an indexed parallel iterator keeps enumeration order
    let per_config: Vec<Vec<GridRow>> = pool.install(|| configs.par_iter().enumerate().map(job).collect());
    let mut rows: Vec<GridRow> = per_config.into_iter().flatten().collect();
    rows.sort_by(|a, b| match (a.gm(), b.gm()) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });

    let best = rows.first().filter(|r| r.report.is_some()).cloned();
    let (model, test_report) = match &best {
        Some(b) => {
            let model = train_model(&b.config, train, pre)?;
            let report = match test {
                Some(t) => Some(evaluate(&model, t, &[b.strategy])?),
                None => None,
            };
            (Some(model), report)
        }
        None => (None, None),
    };
    Ok((
        GridResult {
            n_configs: configs.len(),
            n_holdout_events: n_hold,
            rows,
            best,
            test_report,
        },
        model,
    ))
}

pub fn run_gridsearch(cfg: &ExperimentConfig) -> Result<GridResult> {
    let prepared = load_prepared(&cfg.out_dir)?;
    let (result, model) = gridsearch(cfg, &prepared.train, Some(&prepared.test), Some(&prepared.preprocessor), worker_count())?;
    let out = &cfg.out_dir;
    write_json(&out.join(GRID_JSON), &result)?;
    fs::write(out.join(GRID_TXT), result.table())?;
    match model {
        Some(model) => {
            save_model_checked(&model, &out.join(MODEL_FILE))?;
            if let Some(report) = &result.test_report {
                write_report(out, &model, &prepared.test, report)?;
            }
            Ok(result)
        }
        None => invalid("no grid configuration could be trained"),
    }
}

// --------------------------------------------------------------- earliness

/// First fused-abnormal rolling window of every event. When the model carries
/// a noise factor, the rolling windows get the same kind of noise as training.
pub fn detect_events(
    model: &TrainedModel,
    strategy: DecisionStrategy,
    events: &[EventSeries],
    window: usize,
    seed: u64,
) -> Result<Vec<EventDetection>> {
    let strategy = strategy.validate(model.n_modalities())?;
    let spec = WindowSpec::new(window, ExtractionMode::Rolling)?;
    events
        .iter()
        .enumerate()
        .map(|(e, ev)| {
            let rolled = assemble_dataset(extract_rolling_instances(ev, &spec)?)?;
            let rolled = match &model.preprocessing {
                Some(p) if p.noise_factor > 0.0 => preprocessing::inject_noise(
                    &rolled,
                    p.noise_factor,
                    &p.channel_std,
                    derive_seed(seed, NOISE_ROLLING.wrapping_add((e as u64) << 8)),
                )?,
                _ => rolled,
            };
            let mut first = None;
            for inst in rolled.instances() {
                if inference::fuse(&inference::classify_modalities(model, inst)?, strategy) {
                    first = Some(inst.end_time);
                    break;
                }
            }
            Ok(EventDetection {
                event_id: ev.id().to_string(),
                tau1: ev.tau1(),
                tau2: ev.tau2(),
                first_detection: first,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyEarliness {
    pub strategy: DecisionStrategy,
    pub report: EarlinessReport,
}

pub fn earliness_table(rows: &[StrategyEarliness]) -> String {
    use std::fmt::Write as _;
    let mut out = format!("{:<10} {:>8} {:>6} {:>6} {:>10} {:>6}\n", "strategy", "events", "ttr", "ftr", "del_ms", "earl");
    let opt = |v: Option<f64>, scale: f64| v.map_or("-".to_string(), |x| format!("{:.3}", x * scale));
    for r in rows {
        let e = &r.report;
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>6.3} {:>6.3} {:>10} {:>6}",
            r.strategy.to_string(),
            e.n_events,
            e.ttr,
            e.ftr,
            opt(e.del, 1000.0),
            opt(e.earl, 1.0)
        );
    }
    out
}

pub fn run_earliness(cfg: &ExperimentConfig, model_path: &Path) -> Result<Vec<StrategyEarliness>> {
    let model = TrainedModel::load(model_path)?;
    let split: SplitRecord = read_json(&cfg.out_dir.join(SPLIT_FILE))?;
    let events = data::load_events_dir(&cfg.events_dir)?;
    let test: Vec<EventSeries> = split
        .test
        .iter()
        .map(|id| {
            events
                .iter()
                .find(|e| e.id() == id)
                .cloned()
                .ok_or_else(|| Error::InvalidInput(format!("test event {id} not found in {}", cfg.events_dir.display())))
        })
        .collect::<Result<_>>()?;
    let rows = cfg
        .strategies_for(model.n_modalities())?
        .into_iter()
        .map(|s| {
            let det = detect_events(&model, s, &test, cfg.window, cfg.seed)?;
            Ok(StrategyEarliness {
                strategy: s,
                report: metrics::earliness_from_detections(det, cfg.cct)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(&cfg.out_dir.join(EARLINESS_JSON), &rows)?;
    fs::write(cfg.out_dir.join(EARLINESS_TXT), earliness_table(&rows))?;
    Ok(rows)
}
