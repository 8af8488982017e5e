//! Latent factor models for explicit rating prediction.
//!
//! Implements Weighted-SVD, a biased matrix factorization whose latent
//! factors each carry a learned weight,
//!
//! ```text
//! r̂_uj = r̄ + b_u + b_j + (w ⊙ p_u)ᵀ q_j
//! ```
//!
//! together with the average, bias, PMF, SVD and SVD++ baselines, SGD
//! training with per-epoch learning-rate decay, rating-file ingestion, RMSE
//! evaluation, model persistence and sweep tooling.

pub mod dataset;
pub mod eval;
pub mod experiment;
pub mod ingest;
pub mod model;
pub mod persist;
pub mod train;

pub use dataset::{DatasetBuilder, DatasetError, FeedbackIndex, IdMap, Rating, RatingScale, RatingsDataset, SplitSpec};
pub use eval::{epoch_seconds_summary, relative_importance, rmse, EpochRecord, EvalError, TrainReport};
pub use ingest::{generate_synthetic, parse, parse_file, DatasetFormat, Delimiter, IngestError, SyntheticSpec};
pub use model::{param_count, FactorMatrix, ModelError, ModelKind, ModelParams};
pub use persist::{load_model, save_model, Encoding, PersistError, TrainedModel};
pub use train::{gradient_at, loss, sgd_step, train, GradientBundle, HyperParams, PerBlock, StepScratch, TrainError, Trainer, UpdateRule};
