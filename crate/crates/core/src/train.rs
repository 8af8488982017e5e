//! Regularized squared loss, per-rating gradients and the SGD training loop.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{FeedbackIndex, Rating, RatingsDataset};
use crate::eval::{self, EpochRecord, TrainReport};
use crate::model::{dot, ModelError, ModelKind, ModelParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),
    #[error("training set is empty")]
    EmptyTrain,
    #[error(
        "training diverged at epoch {epoch}, rating #{position} (user {user}, item {item}): non-finite parameter"
    )]
    Diverged {
        epoch: usize,
        position: usize,
        user: u32,
        item: u32,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One value per learnable block. Used for both regularization
/// coefficients and learning rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerBlock {
    pub weights: f64,
    pub user_factors: f64,
    pub item_factors: f64,
    pub user_bias: f64,
    pub item_bias: f64,
}

impl PerBlock {
    pub fn uniform(v: f64) -> Self {
        Self {
            weights: v,
            user_factors: v,
            item_factors: v,
            user_bias: v,
            item_bias: v,
        }
    }

    fn values(&self) -> [f64; 5] {
        [
            self.weights,
            self.user_factors,
            self.item_factors,
            self.user_bias,
            self.item_bias,
        ]
    }

    fn scaled(&self, s: f64) -> Self {
        Self {
            weights: self.weights * s,
            user_factors: self.user_factors * s,
            item_factors: self.item_factors * s,
            user_bias: self.user_bias * s,
            item_bias: self.item_bias * s,
        }
    }
}

/// How the five block updates of one rating are sequenced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// One residual from the pre-update parameters drives every block update.
    #[default]
    SharedResidual,
    /// Blocks updated one after another (user bias, item bias, weights,
    /// user factors, item factors, implicit factors), each gradient
    /// re-evaluated against the already-updated values.
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub k: usize,
    pub reg: PerBlock,
    pub lr: PerBlock,
    /// Per-epoch learning-rate decay; the step at epoch `e` is scaled by `decay^e`.
    pub decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
    pub update: UpdateRule,
}

impl HyperParams {
    /// Standard settings: k = 15, decay 0.9, 50 epochs. SVD++ uses learning
    /// rate 0.007 with regularization 0.005 on biases and 0.015 on factors;
    /// every other kind uses 0.005 / 0.02 throughout.
    pub fn defaults_for(kind: ModelKind) -> Self {
        let (lr, reg) = match kind {
            ModelKind::SvdPlusPlus => (
                PerBlock::uniform(0.007),
                PerBlock {
                    weights: 0.015,
                    user_factors: 0.015,
                    item_factors: 0.015,
                    user_bias: 0.005,
                    item_bias: 0.005,
                },
            ),
            _ => (PerBlock::uniform(0.005), PerBlock::uniform(0.02)),
        };
        Self {
            k: 15,
            reg,
            lr,
            decay: 0.9,
            epochs: 50,
            seed: 42,
            shuffle: true,
            update: UpdateRule::SharedResidual,
        }
    }

    /// Learning rates may be zero (to freeze a block) but not negative.
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidHyperParams(msg));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.reg.values().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad(format!("regularization must be finite and >= 0: {:?}", self.reg));
        }
        if self.lr.values().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad(format!("learning rates must be finite and >= 0: {:?}", self.lr));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad(format!("decay must lie in (0, 1], got {}", self.decay));
        }
        Ok(())
    }

    /// Step scale `decay^epoch` (epochs count from 0).
    pub fn decay_factor(&self, epoch: usize) -> f64 {
        self.decay.powi(epoch as i32)
    }
}

/// Partial derivatives of the per-rating loss.
///
/// Blocks the model kind does not have are zero / empty. For SVD++
/// `implicit_items` lists R(u) and `d_implicit` holds one row of `k`
/// derivatives per entry, flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub residual: f64,
    pub d_user_bias: f64,
    pub d_item_bias: f64,
    pub d_weights: Vec<f64>,
    pub d_user: Vec<f64>,
    pub d_item: Vec<f64>,
    pub implicit_items: Vec<u32>,
    pub d_implicit: Vec<f64>,
}

impl GradientBundle {
    pub fn zeros(k: usize) -> Self {
        Self {
            residual: 0.0,
            d_user_bias: 0.0,
            d_item_bias: 0.0,
            d_weights: vec![0.0; k],
            d_user: vec![0.0; k],
            d_item: vec![0.0; k],
            implicit_items: Vec::new(),
            d_implicit: Vec::new(),
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.d_user_bias, self.d_item_bias]
            .iter()
            .chain(&self.d_weights)
            .chain(&self.d_user)
            .chain(&self.d_item)
            .chain(&self.d_implicit)
            .all(|v| v.is_finite())
    }
}

/// Regularized squared loss over `ds`:
/// half the residual sum of squares plus `reg/2 * ||block||^2` per learnable block.
/// Implicit factors share the item-factor coefficient.
pub fn loss(params: &ModelParams, ds: &RatingsDataset, reg: &PerBlock) -> f64 {
    let fb = ds.feedback();
    let sse: f64 = ds
        .ratings()
        .iter()
        .map(|r| {
            let e = r.value - params.predict_unchecked(fb, r.user, r.item);
            e * e
        })
        .sum();
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    0.5 * sse
        + 0.5 * reg.weights * sq(&params.weights)
        + 0.5 * reg.user_factors * sq(params.user_factors.as_slice())
        + 0.5 * reg.item_factors * sq(params.item_factors.as_slice())
        + 0.5 * reg.item_factors * sq(params.implicit.as_slice())
        + 0.5 * reg.user_bias * sq(&params.user_bias)
        + 0.5 * reg.item_bias * sq(&params.item_bias)
}

/// Gradient of the loss contribution of a single rating `r_uj`.
pub fn gradient_at(
    params: &ModelParams,
    feedback: &FeedbackIndex,
    rating: Rating,
    reg: &PerBlock,
) -> GradientBundle {
    let mut g = GradientBundle::zeros(params.k);
    let mut z = vec![0.0; params.k];
    gradient_into(params, feedback, rating, reg, &mut g, &mut z);
    g
}

/// Allocation-free core of [`gradient_at`]. `z` receives the normalized
/// implicit sum for SVD++ (scratch of length k).
fn gradient_into(
    params: &ModelParams,
    feedback: &FeedbackIndex,
    rating: Rating,
    reg: &PerBlock,
    g: &mut GradientBundle,
    z: &mut [f64],
) {
    let kind = params.kind;
    let (u, j) = (rating.user as usize, rating.item as usize);
    let p = params.user_factors.row(u);
    let q = params.item_factors.row(j);

    let mut pred = if kind.has_mean() { params.mean } else { 0.0 };
    if kind.has_biases() {
        pred += params.user_bias[u] + params.item_bias[j];
    }
    let rated = if kind.has_implicit() {
        feedback.rated_by(rating.user)
    } else {
        &[]
    };
    match kind {
        ModelKind::Average | ModelKind::Bias => {}
        ModelKind::Pmf | ModelKind::Svd => pred += dot(p, q),
        ModelKind::Wsvd => {
            pred += params
                .weights
                .iter()
                .zip(p)
                .zip(q)
                .map(|((w, p), q)| w * p * q)
                .sum::<f64>()
        }
        ModelKind::SvdPlusPlus => {
            params.implicit_user_term(rated, z);
            pred += p.iter().zip(&*z).zip(q).map(|((p, z), q)| (p + z) * q).sum::<f64>();
        }
    }
    let e = rating.value - pred;
    g.residual = e;

    if kind.has_biases() {
        g.d_user_bias = -e + reg.user_bias * params.user_bias[u];
        g.d_item_bias = -e + reg.item_bias * params.item_bias[j];
    } else {
        g.d_user_bias = 0.0;
        g.d_item_bias = 0.0;
    }
    g.implicit_items.clear();
    g.d_implicit.clear();
    if !kind.has_factors() {
        return;
    }
    let k = params.k;
    g.d_weights.resize(k, 0.0);
    g.d_user.resize(k, 0.0);
    g.d_item.resize(k, 0.0);
    match kind {
        ModelKind::Wsvd => {
            let w = &params.weights;
            for f in 0..k {
                g.d_weights[f] = -e * p[f] * q[f] + reg.weights * w[f];
                g.d_user[f] = -e * w[f] * q[f] + reg.user_factors * p[f];
                g.d_item[f] = -e * w[f] * p[f] + reg.item_factors * q[f];
            }
        }
        ModelKind::SvdPlusPlus => {
            for f in 0..k {
                g.d_weights[f] = 0.0;
                g.d_user[f] = -e * q[f] + reg.user_factors * p[f];
                g.d_item[f] = -e * (p[f] + z[f]) + reg.item_factors * q[f];
            }
            if !rated.is_empty() {
                let norm = (rated.len() as f64).sqrt().recip();
                g.implicit_items.extend_from_slice(rated);
                for &item in rated {
                    let y = params.implicit.row(item as usize);
                    g.d_implicit
                        .extend((0..k).map(|f| -e * norm * q[f] + reg.item_factors * y[f]));
                }
            }
        }
        _ => {
            for f in 0..k {
                g.d_weights[f] = 0.0;
                g.d_user[f] = -e * q[f] + reg.user_factors * p[f];
                g.d_item[f] = -e * p[f] + reg.item_factors * q[f];
            }
        }
    }
}

/// Reusable buffers for [`sgd_step`].
#[derive(Debug, Clone)]
pub struct StepScratch {
    grad: GradientBundle,
    z: Vec<f64>,
}

impl StepScratch {
    pub fn new(k: usize) -> Self {
        Self {
            grad: GradientBundle::zeros(k),
            z: vec![0.0; k],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonFiniteUpdate;

#[derive(Clone, Copy)]
enum Block {
    UserBias,
    ItemBias,
    Weights,
    UserFactors,
    ItemFactors,
    Implicit,
}

fn apply(params: &mut ModelParams, rating: Rating, g: &GradientBundle, step: &PerBlock, block: Block) -> f64 {
    let (u, j) = (rating.user as usize, rating.item as usize);
    let mut sum = 0.0;
    match block {
        Block::UserBias => {
            let b = &mut params.user_bias[u];
            *b -= step.user_bias * g.d_user_bias;
            sum += *b;
        }
        Block::ItemBias => {
            let b = &mut params.item_bias[j];
            *b -= step.item_bias * g.d_item_bias;
            sum += *b;
        }
        Block::Weights => {
            for (w, d) in params.weights.iter_mut().zip(&g.d_weights) {
                *w -= step.weights * d;
                sum += *w;
            }
        }
        Block::UserFactors => {
            for (p, d) in params.user_factors.row_mut(u).iter_mut().zip(&g.d_user) {
                *p -= step.user_factors * d;
                sum += *p;
            }
        }
        Block::ItemFactors => {
            for (q, d) in params.item_factors.row_mut(j).iter_mut().zip(&g.d_item) {
                *q -= step.item_factors * d;
                sum += *q;
            }
        }
        Block::Implicit => {
            let k = params.k;
            for (n, &item) in g.implicit_items.iter().enumerate() {
                let d = &g.d_implicit[n * k..(n + 1) * k];
                for (y, d) in params.implicit.row_mut(item as usize).iter_mut().zip(d) {
                    *y -= step.item_factors * d;
                    sum += *y;
                }
            }
        }
    }
    sum
}

fn blocks_of(kind: ModelKind) -> &'static [Block] {
    use Block::*;
    match kind {
        ModelKind::Average => &[],
        ModelKind::Bias => &[UserBias, ItemBias],
        ModelKind::Pmf => &[UserFactors, ItemFactors],
        ModelKind::Svd => &[UserBias, ItemBias, UserFactors, ItemFactors],
        ModelKind::Wsvd => &[UserBias, ItemBias, Weights, UserFactors, ItemFactors],
        ModelKind::SvdPlusPlus => &[UserBias, ItemBias, UserFactors, ItemFactors, Implicit],
    }
}

/// One SGD update for a single rating: every learnable block of the kind
/// moves by `-decay_factor * lr * gradient`.
#[allow(clippy::too_many_arguments)]
pub fn sgd_step(
    params: &mut ModelParams,
    feedback: &FeedbackIndex,
    rating: Rating,
    reg: &PerBlock,
    lr: &PerBlock,
    decay_factor: f64,
    rule: UpdateRule,
    scratch: &mut StepScratch,
) -> Result<(), NonFiniteUpdate> {
    let step = lr.scaled(decay_factor);
    let mut check = 0.0;
    match rule {
        UpdateRule::SharedResidual => {
            gradient_into(params, feedback, rating, reg, &mut scratch.grad, &mut scratch.z);
            for &block in blocks_of(params.kind) {
                check += apply(params, rating, &scratch.grad, &step, block);
            }
        }
        UpdateRule::Sequential => {
            for &block in blocks_of(params.kind) {
                gradient_into(params, feedback, rating, reg, &mut scratch.grad, &mut scratch.z);
                check += apply(params, rating, &scratch.grad, &step, block);
            }
        }
    }
    if check.is_finite() {
        Ok(())
    } else {
        Err(NonFiniteUpdate)
    }
}

/// Stateful SGD driver; exposes per-epoch (and per-step) progress.
pub struct Trainer<'a> {
    params: ModelParams,
    train: &'a RatingsDataset,
    hp: HyperParams,
    order: Vec<usize>,
    rng: ChaCha8Rng,
    scratch: StepScratch,
    epoch: usize,
}

impl<'a> Trainer<'a> {
    /// Initializes parameters (the global mean comes from `train` and stays fixed).
    pub fn new(kind: ModelKind, train: &'a RatingsDataset, hp: &HyperParams) -> Result<Self, TrainError> {
        if kind.is_closed_form() {
            return Err(ModelError::NotClosedForm(kind).into());
        }
        hp.validate()?;
        if train.is_empty() {
            return Err(TrainError::EmptyTrain);
        }
        let mut params = ModelParams::init(kind, train.n_users(), train.n_items(), hp.k, hp.seed);
        if kind.has_mean() {
            params.mean = train.global_mean().map_err(ModelError::from)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        rng.set_stream(1);
        Ok(Self {
            params,
            train,
            hp: hp.clone(),
            order: (0..train.len()).collect(),
            rng,
            scratch: StepScratch::new(hp.k),
            epoch: 0,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn into_params(self) -> ModelParams {
        self.params
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Runs one epoch, calling `after_step` with the parameters after every
    /// rating update. Returns the wall-clock seconds spent in the update loop.
    pub fn run_epoch_with<F>(&mut self, mut after_step: F) -> Result<f64, TrainError>
    where
        F: FnMut(&ModelParams),
    {
        if self.hp.shuffle {
            self.order.shuffle(&mut self.rng);
        }
        let scale = self.hp.decay_factor(self.epoch);
        let ratings = self.train.ratings();
        let feedback = self.train.feedback();
        let start = Instant::now();
        for (position, &idx) in self.order.iter().enumerate() {
            let r = ratings[idx];
            sgd_step(
                &mut self.params,
                feedback,
                r,
                &self.hp.reg,
                &self.hp.lr,
                scale,
                self.hp.update,
                &mut self.scratch,
            )
            .map_err(|_| TrainError::Diverged {
                epoch: self.epoch,
                position,
                user: r.user,
                item: r.item,
            })?;
            after_step(&self.params);
        }
        let seconds = start.elapsed().as_secs_f64();
        self.epoch += 1;
        Ok(seconds)
    }

    pub fn run_epoch(&mut self) -> Result<f64, TrainError> {
        self.run_epoch_with(|_| {})
    }
}

/// Fits a model of `kind` on `train`.
///
/// SGD kinds run `hp.epochs` epochs and record per-epoch train RMSE, test
/// RMSE (when `test` is given), update-loop seconds and, for WSVD, the
/// weight vector. Average and Bias are fitted in closed form and return an
/// empty curve.
pub fn train(
    kind: ModelKind,
    train: &RatingsDataset,
    test: Option<&RatingsDataset>,
    hp: &HyperParams,
) -> Result<(ModelParams, TrainReport), TrainError> {
    if kind.is_closed_form() {
        if train.is_empty() {
            return Err(TrainError::EmptyTrain);
        }
        return Ok((ModelParams::fit_closed_form(kind, train)?, TrainReport::default()));
    }
    let mut trainer = Trainer::new(kind, train, hp)?;
    let mut report = TrainReport::default();
    for epoch in 0..hp.epochs {
        let seconds = trainer.run_epoch()?;
        let params = trainer.params();
        let fb = train.feedback();
        let train_rmse = eval::rmse(params, train, fb).expect("train is non-empty");
        let test_rmse = match test {
            Some(t) if !t.is_empty() => Some(eval::rmse(params, t, fb).expect("checked non-empty")),
            _ => None,
        };
        report.epochs.push(EpochRecord {
            epoch,
            train_rmse,
            test_rmse,
            seconds,
        });
        if kind.has_weights() {
            report.weight_history.push(params.weights.clone());
        }
    }
    Ok((trainer.into_params(), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetBuilder, RatingScale};
    use crate::model::FactorMatrix;

    fn wsvd_example() -> (ModelParams, FeedbackIndex) {
        let mut p = ModelParams::init(ModelKind::Wsvd, 1, 1, 2, 0);
        p.mean = 3.0;
        p.user_bias = vec![0.5];
        p.item_bias = vec![-0.5];
        p.weights = vec![1.0, 2.0];
        p.user_factors = FactorMatrix::from_vec(1, 2, vec![0.5, 1.0]).unwrap();
        p.item_factors = FactorMatrix::from_vec(1, 2, vec![1.0, 0.5]).unwrap();
        (p, FeedbackIndex::from_lists(1, vec![vec![0]]).unwrap())
    }

    fn rating(value: f64) -> Rating {
        Rating {
            user: 0,
            item: 0,
            value,
        }
    }

    fn tiny_dataset() -> RatingsDataset {
        let mut b = DatasetBuilder::new(RatingScale::new(1.0, 5.0).unwrap());
        b.push("u", "i", 4.0).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn hand_evaluated_gradients() {
        let (p, fb) = wsvd_example();
        let reg = PerBlock::uniform(0.02);
        let g = gradient_at(&p, &fb, rating(5.0), &reg);
        assert!((g.residual - 0.5).abs() < 1e-15);
        assert!((g.d_user_bias - (-0.49)).abs() < 1e-15, "{}", g.d_user_bias);
        assert!((g.d_weights[0] - (-0.23)).abs() < 1e-15, "{:?}", g.d_weights);
        assert!((g.d_weights[1] - (-0.21)).abs() < 1e-15, "{:?}", g.d_weights);
    }

    #[test]
    fn zero_residual_zero_reg_gives_zero_bundle() {
        let (p, fb) = wsvd_example();
        let g = gradient_at(&p, &fb, rating(4.5), &PerBlock::uniform(0.0));
        assert_eq!(g, GradientBundle { residual: 0.0, ..GradientBundle::zeros(2) });
    }

    #[test]
    fn step_from_hand_gradient() {
        let (mut p, fb) = wsvd_example();
        let mut scratch = StepScratch::new(2);
        let reg = PerBlock::uniform(0.02);
        sgd_step(&mut p, &fb, rating(5.0), &reg, &PerBlock::uniform(0.005), 1.0, UpdateRule::SharedResidual, &mut scratch)
            .unwrap();
        assert!((p.user_bias[0] - 0.50245).abs() < 1e-15, "{}", p.user_bias[0]);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let (mut p, fb) = wsvd_example();
        let before = p.clone();
        let mut scratch = StepScratch::new(2);
        for rule in [UpdateRule::SharedResidual, UpdateRule::Sequential] {
            sgd_step(&mut p, &fb, rating(4.5), &PerBlock::uniform(0.0), &PerBlock::uniform(0.1), 1.0, rule, &mut scratch)
                .unwrap();
            assert_eq!(p, before);
        }
    }

    #[test]
    fn decay_factor_is_power_of_epoch() {
        let mut hp = HyperParams::defaults_for(ModelKind::Wsvd);
        hp.decay = 0.9;
        assert!((hp.decay_factor(2) - 0.81).abs() < 1e-15);
        assert_eq!(hp.decay_factor(0), 1.0);
    }

    #[test]
    fn loss_examples() {
        let ds = tiny_dataset();
        // all-zero SVD parameters with mean equal to the rating
        let mut p = ModelParams::init(ModelKind::Svd, 1, 1, 2, 0);
        p.user_factors.as_mut_slice().fill(0.0);
        p.item_factors.as_mut_slice().fill(0.0);
        p.mean = 4.0;
        assert_eq!(loss(&p, &ds, &PerBlock::uniform(0.3)), 0.0);
        p.mean = 3.0;
        assert_eq!(loss(&p, &ds, &PerBlock::uniform(0.0)), 0.5);

        let mut w = ModelParams::init(ModelKind::Wsvd, 1, 1, 2, 0);
        w.user_factors.as_mut_slice().fill(0.0);
        w.item_factors.as_mut_slice().fill(0.0);
        w.mean = 4.0;
        w.weights = vec![1.0, 2.0];
        let reg = PerBlock {
            weights: 0.02,
            ..PerBlock::uniform(0.0)
        };
        assert!((loss(&w, &ds, &reg) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn sequential_rule_differs_from_shared_residual() {
        let (p0, fb) = wsvd_example();
        let lr = PerBlock::uniform(0.1);
        let reg = PerBlock::uniform(0.0);
        let mut scratch = StepScratch::new(2);
        let mut a = p0.clone();
        let mut b = p0.clone();
        sgd_step(&mut a, &fb, rating(5.0), &reg, &lr, 1.0, UpdateRule::SharedResidual, &mut scratch).unwrap();
        sgd_step(&mut b, &fb, rating(5.0), &reg, &lr, 1.0, UpdateRule::Sequential, &mut scratch).unwrap();
        // both take the same first (user bias) step
        assert_eq!(a.user_bias, b.user_bias);
        assert_ne!(a.item_bias, b.item_bias);
    }

    #[test]
    fn hyperparams_validation() {
        let mut hp = HyperParams::defaults_for(ModelKind::Svd);
        hp.validate().unwrap();
        hp.decay = 0.0;
        assert!(hp.validate().is_err());
        hp.decay = 1.0;
        hp.reg.user_bias = -0.1;
        assert!(hp.validate().is_err());
        hp.reg.user_bias = 0.0;
        hp.lr.weights = 0.0;
        hp.validate().unwrap();
        hp.k = 0;
        assert!(hp.validate().is_err());
    }

    #[test]
    fn svdpp_defaults() {
        let hp = HyperParams::defaults_for(ModelKind::SvdPlusPlus);
        assert_eq!(hp.lr, PerBlock::uniform(0.007));
        assert_eq!((hp.reg.user_bias, hp.reg.item_factors), (0.005, 0.015));
        let hp = HyperParams::defaults_for(ModelKind::Wsvd);
        assert_eq!((hp.k, hp.decay, hp.epochs), (15, 0.9, 50));
    }

    #[test]
    fn zero_epochs_returns_initial_parameters() {
        let ds = tiny_dataset();
        let mut hp = HyperParams::defaults_for(ModelKind::Wsvd);
        hp.epochs = 0;
        hp.k = 3;
        let (p, report) = train(ModelKind::Wsvd, &ds, None, &hp).unwrap();
        let mut expected = ModelParams::init(ModelKind::Wsvd, 1, 1, 3, hp.seed);
        expected.mean = 4.0;
        assert_eq!(p, expected);
        assert!(report.epochs.is_empty());
    }

    #[test]
    fn divergence_is_reported() {
        let ds = tiny_dataset();
        let mut hp = HyperParams::defaults_for(ModelKind::Svd);
        hp.lr = PerBlock::uniform(1e200);
        hp.epochs = 3;
        let err = train(ModelKind::Svd, &ds, None, &hp).unwrap_err();
        assert!(matches!(err, TrainError::Diverged { .. }), "{err}");
    }

    #[test]
    fn closed_form_kinds_skip_sgd() {
        let ds = tiny_dataset();
        let hp = HyperParams::defaults_for(ModelKind::Bias);
        let (p, report) = train(ModelKind::Bias, &ds, None, &hp).unwrap();
        assert_eq!(p.mean, 4.0);
        assert!(report.epochs.is_empty());
        assert!(Trainer::new(ModelKind::Average, &ds, &hp).is_err());
    }
}
