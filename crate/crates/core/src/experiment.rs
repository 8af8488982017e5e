//! Experiment orchestration behind the `wsvd` binary: configuration
//! resolution, single runs and hyperparameter sweeps.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, RatingsDataset, SplitSpec};
use crate::eval::{self, TrainReport};
use crate::ingest::{self, DatasetFormat, IngestError};
use crate::model::{param_count, ModelKind};
use crate::persist::{Encoding, PersistError, TrainedModel};
use crate::train::{self, HyperParams, PerBlock, TrainError, UpdateRule};

pub const CURVE_FILE: &str = "curve.csv";
pub const WEIGHTS_FILE: &str = "weights.csv";
pub const SUMMARY_FILE: &str = "summary.toml";
pub const MODEL_FILE: &str = "model.wsvd";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("reading dataset: {0}")]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("writing {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("model file: {0}")]
    Model(#[from] PersistError),
}

impl ExperimentError {
    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Ingest(_) | ExperimentError::Dataset(_) => 3,
            ExperimentError::Train(TrainError::Diverged { .. }) => 4,
            ExperimentError::Train(_) => 2,
            ExperimentError::Output { .. } => 5,
            ExperimentError::Model(_) => 6,
        }
    }
}

fn output_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Output {
        path: path.to_owned(),
        source,
    }
}

/// Flat key-value settings. Every field is optional so a config file and
/// command-line flags can be layered; unset values fall back to the
/// per-model defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Rating file to read.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// ml100k | movielens-delim | filmtrust | epinions[-csv|-tsv|-ssv]
    #[arg(long)]
    pub format: Option<String>,
    /// average | bias | pmf | svd | svdpp | wsvd
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Number of latent factors.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Seed for initialization and visit order.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub decay: Option<f64>,
    /// Learning rate for every block (per-block flags take precedence).
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lr_weights: Option<f64>,
    #[arg(long)]
    pub lr_user_factors: Option<f64>,
    #[arg(long)]
    pub lr_item_factors: Option<f64>,
    #[arg(long)]
    pub lr_user_bias: Option<f64>,
    #[arg(long)]
    pub lr_item_bias: Option<f64>,
    /// Regularization for every block (per-block flags take precedence).
    #[arg(long)]
    pub reg: Option<f64>,
    #[arg(long)]
    pub reg_weights: Option<f64>,
    #[arg(long)]
    pub reg_user_factors: Option<f64>,
    #[arg(long)]
    pub reg_item_factors: Option<f64>,
    #[arg(long)]
    pub reg_user_bias: Option<f64>,
    #[arg(long)]
    pub reg_item_bias: Option<f64>,
    /// Shuffle ratings every epoch (false = file order).
    #[arg(long)]
    pub shuffle: Option<bool>,
    /// shared-residual | sequential
    #[arg(long)]
    pub update: Option<String>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Write per-epoch curve and weight CSV files.
    #[arg(long)]
    pub emit_curves: Option<bool>,
    /// Clamp predictions to the rating scale (predict subcommand only).
    #[arg(long)]
    pub clip_at_inference: Option<bool>,
    /// binary | text
    #[arg(long)]
    pub encoding: Option<String>,
}

macro_rules! layer {
    ($self:ident, $other:ident, $($field:ident),* $(,)?) => {
        $( if $other.$field.is_some() { $self.$field = $other.$field.clone(); } )*
    };
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Values set in `other` replace ours.
    pub fn overlay(mut self, other: &Settings) -> Self {
        layer!(
            self, other, dataset, format, model, output_dir, k, epochs, seed, decay, lr, lr_weights,
            lr_user_factors, lr_item_factors, lr_user_bias, lr_item_bias, reg, reg_weights,
            reg_user_factors, reg_item_factors, reg_user_bias, reg_item_bias, shuffle, update,
            train_fraction, split_seed, emit_curves, clip_at_inference, encoding,
        );
        self
    }

    /// Applies the hyperparameter fields on top of `hp`.
    fn apply_hyperparams(&self, hp: &mut HyperParams) -> Result<(), ExperimentError> {
        if let Some(k) = self.k {
            hp.k = k;
        }
        if let Some(e) = self.epochs {
            hp.epochs = e;
        }
        if let Some(s) = self.seed {
            hp.seed = s;
        }
        if let Some(d) = self.decay {
            hp.decay = d;
        }
        if let Some(s) = self.shuffle {
            hp.shuffle = s;
        }
        if let Some(u) = &self.update {
            hp.update = match u.as_str() {
                "shared-residual" => UpdateRule::SharedResidual,
                "sequential" => UpdateRule::Sequential,
                other => return Err(ExperimentError::Config(format!("unknown update rule {other:?}"))),
            };
        }
        let blocks = |base: &mut PerBlock, all: Option<f64>, each: [Option<f64>; 5]| {
            if let Some(v) = all {
                *base = PerBlock::uniform(v);
            }
            let [w, p, q, bu, bi] = each;
            base.weights = w.unwrap_or(base.weights);
            base.user_factors = p.unwrap_or(base.user_factors);
            base.item_factors = q.unwrap_or(base.item_factors);
            base.user_bias = bu.unwrap_or(base.user_bias);
            base.item_bias = bi.unwrap_or(base.item_bias);
        };
        blocks(
            &mut hp.lr,
            self.lr,
            [self.lr_weights, self.lr_user_factors, self.lr_item_factors, self.lr_user_bias, self.lr_item_bias],
        );
        blocks(
            &mut hp.reg,
            self.reg,
            [self.reg_weights, self.reg_user_factors, self.reg_item_factors, self.reg_user_bias, self.reg_item_bias],
        );
        Ok(())
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub format: DatasetFormat,
    pub model: ModelKind,
    pub hp: HyperParams,
    pub split: SplitSpec,
    pub output_dir: PathBuf,
    pub emit_curves: bool,
    pub clip_at_inference: bool,
    pub encoding: Encoding,
}

impl ExperimentConfig {
    /// Resolves settings against defaults: WSVD on MovieLens-100K, 80/20
    /// split, per-model learning rates and regularization.
    pub fn resolve(settings: &Settings) -> Result<Self, ExperimentError> {
        let cfg = |msg: String| ExperimentError::Config(msg);
        let dataset = settings
            .dataset
            .clone()
            .filter(|p| !p.as_os_str().is_empty())
            .ok_or_else(|| cfg("dataset path is required".into()))?;
        let format = match &settings.format {
            Some(f) => f.parse().map_err(|e: IngestError| cfg(e.to_string()))?,
            None => DatasetFormat::MovieLens100K,
        };
        let model = match &settings.model {
            Some(m) => m.parse().map_err(|e: crate::model::ModelError| cfg(e.to_string()))?,
            None => ModelKind::Wsvd,
        };
        let mut hp = HyperParams::defaults_for(model);
        settings.apply_hyperparams(&mut hp)?;
        if !model.is_closed_form() {
            hp.validate()?;
        }
        let defaults = SplitSpec::default();
        let split = SplitSpec::new(
            settings.train_fraction.unwrap_or(defaults.train_fraction),
            settings.split_seed.unwrap_or(defaults.seed),
        )?;
        let output_dir = settings.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
        if output_dir.as_os_str().is_empty() {
            return Err(cfg("output directory must not be empty".into()));
        }
        let encoding = match &settings.encoding {
            Some(e) => e.parse().map_err(cfg)?,
            None => Encoding::Binary,
        };
        Ok(Self {
            dataset,
            format,
            model,
            hp,
            split,
            output_dir,
            emit_curves: settings.emit_curves.unwrap_or(true),
            clip_at_inference: settings.clip_at_inference.unwrap_or(false),
            encoding,
        })
    }
}

/// Deterministic run results (no timings).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub model: String,
    pub dataset: String,
    pub format: String,
    pub users: usize,
    pub items: usize,
    pub train_ratings: usize,
    pub test_ratings: usize,
    pub factors: usize,
    pub epochs: usize,
    pub param_count: usize,
    pub train_rmse: f64,
    pub test_rmse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Summary,
    pub report: TrainReport,
    pub model: TrainedModel,
}

pub fn load_and_split(config: &ExperimentConfig) -> Result<(RatingsDataset, RatingsDataset), ExperimentError> {
    let ds = ingest::parse_file(&config.dataset, config.format)?;
    Ok(ds.split(config.split)?)
}

/// Parses, splits, trains and writes `curve.csv`, `weights.csv` (WSVD),
/// `summary.toml` and `model.wsvd` into the output directory.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome, ExperimentError> {
    let (train_set, test_set) = load_and_split(config)?;
    let outcome = run_on(config, &train_set, &test_set)?;
    write_outputs(config, &outcome)?;
    Ok(outcome)
}

/// Trains on an existing split without touching the filesystem.
pub fn run_on(
    config: &ExperimentConfig,
    train_set: &RatingsDataset,
    test_set: &RatingsDataset,
) -> Result<RunOutcome, ExperimentError> {
    let test = (!test_set.is_empty()).then_some(test_set);
    let (params, report) = train::train(config.model, train_set, test, &config.hp)?;
    let fb = train_set.feedback();
    let train_rmse = eval::rmse(&params, train_set, fb).expect("train split is non-empty");
    let test_rmse = test.map(|t| eval::rmse(&params, t, fb).expect("checked non-empty"));
    let summary = Summary {
        model: config.model.to_string(),
        dataset: config.dataset.display().to_string(),
        format: config.format.to_string(),
        users: train_set.n_users(),
        items: train_set.n_items(),
        train_ratings: train_set.len(),
        test_ratings: test_set.len(),
        factors: params.k,
        epochs: report.epochs.len(),
        param_count: param_count(config.model, train_set.n_users(), train_set.n_items(), params.k),
        train_rmse,
        test_rmse,
    };
    Ok(RunOutcome {
        summary,
        report,
        model: TrainedModel::new(params, train_set),
    })
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), ExperimentError> {
    let mut out = BufWriter::new(File::create(path).map_err(output_err(path))?);
    write(&mut out).and_then(|_| out.flush()).map_err(output_err(path))
}

pub fn write_outputs(config: &ExperimentConfig, outcome: &RunOutcome) -> Result<(), ExperimentError> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(output_err(dir))?;
    if config.emit_curves {
        write_file(&dir.join(CURVE_FILE), |w| outcome.report.write_curve_csv(w))?;
        if config.model.has_weights() {
            let k = outcome.model.params.k;
            write_file(&dir.join(WEIGHTS_FILE), |w| outcome.report.write_weights_csv(k, w))?;
        }
    }
    let summary = toml::to_string(&outcome.summary).map_err(|e| ExperimentError::Config(e.to_string()))?;
    write_file(&dir.join(SUMMARY_FILE), |w| w.write_all(summary.as_bytes()))?;
    let model_path = dir.join(MODEL_FILE);
    outcome.model.save(&model_path, config.encoding).map_err(|e| match e {
        PersistError::Io(source) => ExperimentError::Output {
            path: model_path.clone(),
            source,
        },
        other => other.into(),
    })
}

/// The (k, lambda, model) grid; lambda is applied to every regularization
/// component, everything else follows the base config and per-model defaults.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub ks: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub models: Vec<ModelKind>,
    pub base: ExperimentConfig,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.ks.is_empty() || self.lambdas.is_empty() || self.models.is_empty() {
            return Err(ExperimentError::Config("sweep grid lists must be non-empty".into()));
        }
        Ok(())
    }

    /// Cells in output order: by k, then lambda, then model.
    pub fn cells(&self) -> Vec<(usize, f64, ModelKind)> {
        let mut ks = self.ks.clone();
        ks.sort_unstable();
        ks.dedup();
        let mut lambdas = self.lambdas.clone();
        lambdas.sort_by(f64::total_cmp);
        lambdas.dedup();
        let mut models = self.models.clone();
        models.sort_unstable();
        models.dedup();
        let mut cells = Vec::new();
        for &k in &ks {
            for &l in &lambdas {
                for &m in &models {
                    cells.push((k, l, m));
                }
            }
        }
        cells
    }

    pub fn cell_hyperparams(&self, k: usize, lambda: f64, model: ModelKind) -> HyperParams {
        let mut hp = HyperParams::defaults_for(model);
        hp.k = k;
        hp.reg = PerBlock::uniform(lambda);
        let base = &self.base.hp;
        hp.epochs = base.epochs;
        hp.decay = base.decay;
        hp.seed = base.seed;
        hp.shuffle = base.shuffle;
        hp.update = base.update;
        hp
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub lambda: f64,
    pub model: ModelKind,
    /// `None` when the cell diverged.
    pub test_rmse: Option<f64>,
}

/// Trains one sweep cell on a shared split.
pub fn sweep_cell(
    grid: &SweepGrid,
    train_set: &RatingsDataset,
    test_set: &RatingsDataset,
    (k, lambda, model): (usize, f64, ModelKind),
) -> Result<SweepRow, ExperimentError> {
    let config = ExperimentConfig {
        model,
        hp: grid.cell_hyperparams(k, lambda, model),
        ..grid.base.clone()
    };
    let test_rmse = match run_on(&config, train_set, test_set) {
        Ok(outcome) => outcome.summary.test_rmse,
        Err(ExperimentError::Train(TrainError::Diverged { .. })) => None,
        Err(e) => return Err(e),
    };
    Ok(SweepRow {
        k,
        lambda,
        model,
        test_rmse,
    })
}

/// Runs every grid cell (up to `workers` at a time) on one seeded split.
pub fn sweep_on(
    grid: &SweepGrid,
    train_set: &RatingsDataset,
    test_set: &RatingsDataset,
    workers: usize,
) -> Result<Vec<SweepRow>, ExperimentError> {
    grid.validate()?;
    if test_set.is_empty() {
        return Err(ExperimentError::Config("sweep needs a non-empty test split".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    let cells = grid.cells();
    pool.install(|| {
        cells
            .par_iter()
            .map(|&cell| sweep_cell(grid, train_set, test_set, cell))
            .collect()
    })
}

pub fn sweep(grid: &SweepGrid, workers: usize) -> Result<Vec<SweepRow>, ExperimentError> {
    grid.validate()?;
    let (train_set, test_set) = load_and_split(&grid.base)?;
    sweep_on(grid, &train_set, &test_set, workers)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "k,lambda,model,test_rmse")?;
    for r in rows {
        let rmse = r.test_rmse.map_or_else(|| "diverged".to_owned(), |v| v.to_string());
        writeln!(out, "{},{},{},{}", r.k, r.lambda, r.model, rmse)?;
    }
    Ok(())
}

pub fn write_sweep_file(rows: &[SweepRow], dir: &Path) -> Result<PathBuf, ExperimentError> {
    fs::create_dir_all(dir).map_err(output_err(dir))?;
    let path = dir.join(SWEEP_FILE);
    write_file(&path, |w| write_sweep_csv(rows, w))?;
    Ok(path)
}
