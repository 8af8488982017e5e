//! Accuracy metrics, training curves and learned-weight analysis.

use std::io::{self, Write};

use thiserror::Error;

use crate::dataset::{FeedbackIndex, RatingsDataset};
use crate::model::ModelParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no ratings to evaluate")]
    Empty,
    #[error("report has no epochs")]
    EmptyReport,
    #[error("degenerate weights: smallest |w| is {min_abs:e}")]
    DegenerateWeights { min_abs: f64 },
}

/// Smallest admissible `min |w_j|` for [`relative_importance`].
pub const MIN_WEIGHT_MAGNITUDE: f64 = 1e-12;

/// Root-mean-squared error of `params` on `ds`.
///
/// `feedback` must come from the training split; users or items without
/// training ratings are predicted through the cold-start fallback.
pub fn rmse(params: &ModelParams, ds: &RatingsDataset, feedback: &FeedbackIndex) -> Result<f64, EvalError> {
    if ds.is_empty() {
        return Err(EvalError::Empty);
    }
    let sse: f64 = ds
        .ratings()
        .iter()
        .map(|r| {
            let e = r.value - params.predict_cold(feedback, Some(r.user), Some(r.item));
            e * e
        })
        .sum();
    Ok((sse / ds.len() as f64).sqrt())
}

/// Each weight divided by the smallest absolute weight.
pub fn relative_importance(weights: &[f64]) -> Result<Vec<f64>, EvalError> {
    let min_abs = weights.iter().map(|w| w.abs()).fold(f64::INFINITY, f64::min);
    if weights.is_empty() || min_abs.is_nan() || min_abs <= MIN_WEIGHT_MAGNITUDE {
        return Err(EvalError::DegenerateWeights { min_abs });
    }
    Ok(weights.iter().map(|w| w / min_abs).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_rmse: f64,
    pub test_rmse: Option<f64>,
    /// Wall-clock time of the update loop only (evaluation excluded).
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Weight vector after each epoch (WSVD only).
    pub weight_history: Vec<Vec<f64>>,
}

impl TrainReport {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn write_curve_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "epoch,train_rmse,test_rmse,epoch_seconds")?;
        for r in &self.epochs {
            let test = r.test_rmse.map(|t| t.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", r.epoch, r.train_rmse, test, r.seconds)?;
        }
        Ok(())
    }

    pub fn write_weights_csv<W: Write>(&self, k: usize, mut out: W) -> io::Result<()> {
        let header: Vec<String> = std::iter::once("epoch".to_owned())
            .chain((0..k).map(|f| format!("w_{f}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (epoch, w) in self.weight_history.iter().enumerate() {
            let row: Vec<String> = w.iter().map(f64::to_string).collect();
            writeln!(out, "{epoch},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Mean wall-clock seconds per epoch.
pub fn epoch_seconds_summary(report: &TrainReport) -> Result<f64, EvalError> {
    if report.epochs.is_empty() {
        return Err(EvalError::EmptyReport);
    }
    Ok(report.epochs.iter().map(|r| r.seconds).sum::<f64>() / report.epochs.len() as f64)
}
