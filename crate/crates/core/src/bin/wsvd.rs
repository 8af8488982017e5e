//! `wsvd` experiment runner.
//!
//! ```text
//! wsvd run     --dataset data/ml-100k/u.data --model wsvd --output-dir out
//! wsvd sweep   --dataset data/ml-100k/u.data --ks 10,80 --lambdas 0.001 --models wsvd,svd
//! wsvd predict --model out/model.wsvd --user 196 --item 242
//! wsvd inspect --model out/model.wsvd
//! ```

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wsvd_core::experiment::{self, ExperimentConfig, ExperimentError, Settings, SweepGrid};
use wsvd_core::{eval, param_count, ModelKind, TrainedModel};

#[derive(Debug, Parser)]
#[command(name = "wsvd", version, about = "Weighted-SVD and baseline rating models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one model and write curve, weights, summary and model files.
    Run {
        /// TOML file with the same keys as the flags (snake_case).
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Train every (k, lambda, model) cell and write sweep.csv.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![10, 20, 40, 80])]
        ks: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0])]
        lambdas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "wsvd,svd,svdpp,pmf")]
        models: Vec<ModelKind>,
        /// Cells trained concurrently (default: available cores).
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Predict one rating from a saved model by raw user and item id.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        user: String,
        #[arg(long)]
        item: String,
        /// Clamp the prediction to the model's rating scale.
        #[arg(long)]
        clip: bool,
    },
    /// Print parameter counts and, for WSVD, the relative factor importance.
    Inspect {
        /// Saved model to inspect.
        #[arg(long, conflicts_with_all = ["kind", "users", "items", "k"])]
        model: Option<PathBuf>,
        /// Count parameters for a hypothetical shape instead.
        #[arg(long, requires_all = ["users", "items"])]
        kind: Option<ModelKind>,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        items: Option<usize>,
        #[arg(long, default_value_t = 15)]
        k: usize,
    },
}

fn settings(config: Option<&Path>, flags: &Settings) -> Result<Settings, ExperimentError> {
    let base = match config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    Ok(base.overlay(flags))
}

fn run(config: Option<&Path>, flags: &Settings) -> Result<(), ExperimentError> {
    let cfg = ExperimentConfig::resolve(&settings(config, flags)?)?;
    let outcome = experiment::run(&cfg)?;
    let s = &outcome.summary;
    println!("model       {}", s.model);
    println!("ratings     {} train / {} test", s.train_ratings, s.test_ratings);
    println!("parameters  {}", s.param_count);
    println!("train RMSE  {:.4}", s.train_rmse);
    if let Some(t) = s.test_rmse {
        println!("test RMSE   {t:.4}");
    }
    if let Ok(secs) = eval::epoch_seconds_summary(&outcome.report) {
        println!("epoch time  {secs:.4} s");
    }
    println!("output      {}", cfg.output_dir.display());
    Ok(())
}

fn sweep(
    config: Option<&Path>,
    flags: &Settings,
    ks: Vec<usize>,
    lambdas: Vec<f64>,
    models: Vec<ModelKind>,
    workers: Option<usize>,
) -> Result<(), ExperimentError> {
    let base = ExperimentConfig::resolve(&settings(config, flags)?)?;
    let grid = SweepGrid {
        ks,
        lambdas,
        models,
        base,
    };
    let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let rows = experiment::sweep(&grid, workers)?;
    experiment::write_sweep_csv(&rows, std::io::stdout().lock())
        .map_err(|source| ExperimentError::Output { path: "<stdout>".into(), source })?;
    let path = experiment::write_sweep_file(&rows, &grid.base.output_dir)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn predict(model: &Path, user: &str, item: &str, clip: bool) -> Result<(), ExperimentError> {
    let trained = TrainedModel::load(model)?;
    let mut r = trained.predict_raw(user, item);
    if clip {
        r = trained.scale.clamp(r);
    }
    println!("{r}");
    Ok(())
}

fn print_counts(kind: ModelKind, m: usize, n: usize, k: usize) {
    println!("shape  {m} users x {n} items, k = {k}");
    for kind in ModelKind::ALL {
        let k = if kind.is_closed_form() { 0 } else { k };
        println!("{:<8} {:>12}", kind.name(), param_count(kind, m, n, k));
    }
    println!("selected {kind}: {}", param_count(kind, m, n, if kind.is_closed_form() { 0 } else { k }));
}

fn inspect(
    model: Option<&Path>,
    kind: Option<ModelKind>,
    users: Option<usize>,
    items: Option<usize>,
    k: usize,
) -> Result<(), ExperimentError> {
    if let Some(path) = model {
        let trained = TrainedModel::load(path)?;
        let p = &trained.params;
        print_counts(p.kind, p.n_users, p.n_items, p.k);
        println!("stored   {}", p.learnable_len());
        if p.kind.has_weights() {
            println!("factor  weight  relative");
            match eval::relative_importance(&p.weights) {
                Ok(rel) => {
                    for (f, (w, r)) in p.weights.iter().zip(&rel).enumerate() {
                        println!("{f:>6}  {w:>9.4}  {r:>8.2}");
                    }
                }
                Err(e) => println!("relative importance unavailable: {e}"),
            }
        }
        return Ok(());
    }
    match (kind, users, items) {
        (Some(kind), Some(m), Some(n)) => {
            print_counts(kind, m, n, k);
            Ok(())
        }
        _ => Err(ExperimentError::Config(
            "inspect needs --model, or --kind with --users and --items".into(),
        )),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, settings } => run(config.as_deref(), &settings),
        Command::Sweep {
            config,
            ks,
            lambdas,
            models,
            workers,
            settings,
        } => sweep(config.as_deref(), &settings, ks, lambdas, models, workers),
        Command::Predict { model, user, item, clip } => predict(&model, &user, &item, clip),
        Command::Inspect {
            model,
            kind,
            users,
            items,
            k,
        } => inspect(model.as_deref(), kind, users, items, k),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
