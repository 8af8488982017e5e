//! Parameter containers and prediction rules for the six model kinds.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, FeedbackIndex, RatingsDataset};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown model kind {0:?}")]
    UnknownKind(String),
    #[error("{kind} index {index} out of range (0..{len})")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        len: usize,
    },
    #[error("{0} cannot be fitted in closed form")]
    NotClosedForm(ModelKind),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// The model family. Declaration order is the canonical sort order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Average,
    Bias,
    Pmf,
    Svd,
    #[serde(alias = "svd++")]
    SvdPlusPlus,
    Wsvd,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Average,
        ModelKind::Bias,
        ModelKind::Pmf,
        ModelKind::Svd,
        ModelKind::SvdPlusPlus,
        ModelKind::Wsvd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Average => "average",
            ModelKind::Bias => "bias",
            ModelKind::Pmf => "pmf",
            ModelKind::Svd => "svd",
            ModelKind::SvdPlusPlus => "svdpp",
            ModelKind::Wsvd => "wsvd",
        }
    }

    pub fn has_mean(self) -> bool {
        self != ModelKind::Pmf
    }

    pub fn has_biases(self) -> bool {
        !matches!(self, ModelKind::Average | ModelKind::Pmf)
    }

    pub fn has_factors(self) -> bool {
        !matches!(self, ModelKind::Average | ModelKind::Bias)
    }

    pub fn has_weights(self) -> bool {
        self == ModelKind::Wsvd
    }

    pub fn has_implicit(self) -> bool {
        self == ModelKind::SvdPlusPlus
    }

    /// Average and Bias are fitted from rating averages, not by SGD.
    pub fn is_closed_form(self) -> bool {
        !self.has_factors()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "average" | "avg" => Ok(ModelKind::Average),
            "bias" => Ok(ModelKind::Bias),
            "pmf" => Ok(ModelKind::Pmf),
            "svd" => Ok(ModelKind::Svd),
            "svdpp" | "svd++" => Ok(ModelKind::SvdPlusPlus),
            "wsvd" | "weighted-svd" => Ok(ModelKind::Wsvd),
            _ => Err(ModelError::UnknownKind(s.to_owned())),
        }
    }
}

/// Number of learnable parameters of `kind` on an `m x n` problem with `k` factors.
///
/// The global mean is derived from data and is not counted.
pub fn param_count(kind: ModelKind, m: usize, n: usize, k: usize) -> usize {
    match kind {
        ModelKind::Average => 0,
        ModelKind::Bias => m + n,
        ModelKind::Pmf => m * k + n * k,
        ModelKind::Svd => m * (k + 1) + n * (k + 1),
        ModelKind::Wsvd => m * (k + 1) + n * (k + 1) + k,
        ModelKind::SvdPlusPlus => m * (k + 1) + n * (k + 1) + n * k,
    }
}

/// Dense row-major matrix; one row of `cols` factors per user or item.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FactorMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn empty() -> Self {
        Self::zeros(0, 0)
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    fn standard_normal<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Learnable state of a rating model.
///
/// Blocks a kind does not use are left empty: Average keeps only `mean`,
/// Bias adds the two bias vectors, PMF keeps only the factor matrices, SVD
/// has mean + biases + factors, WSVD adds `weights`, SVD++ adds `implicit`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub n_users: usize,
    pub n_items: usize,
    pub k: usize,
    pub mean: f64,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub user_factors: FactorMatrix,
    pub item_factors: FactorMatrix,
    pub weights: Vec<f64>,
    pub implicit: FactorMatrix,
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ModelParams {
    /// Fresh parameters: factor blocks ~ N(0, 1) from a seeded generator,
    /// weights all one, biases and mean zero.
    ///
    /// Draw order is user factors, item factors, implicit factors, so kinds
    /// sharing `(m, n, k, seed)` start from identical `P` and `Q`.
    pub fn init(kind: ModelKind, m: usize, n: usize, k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = if kind.has_factors() { k } else { 0 };
        let (user_factors, item_factors) = if kind.has_factors() {
            let p = FactorMatrix::standard_normal(m, k, &mut rng);
            let q = FactorMatrix::standard_normal(n, k, &mut rng);
            (p, q)
        } else {
            (FactorMatrix::empty(), FactorMatrix::empty())
        };
        let implicit = if kind.has_implicit() {
            FactorMatrix::standard_normal(n, k, &mut rng)
        } else {
            FactorMatrix::empty()
        };
        let (user_bias, item_bias) = if kind.has_biases() {
            (vec![0.0; m], vec![0.0; n])
        } else {
            (Vec::new(), Vec::new())
        };
        Self {
            kind,
            n_users: m,
            n_items: n,
            k,
            mean: 0.0,
            user_bias,
            item_bias,
            user_factors,
            item_factors,
            weights: if kind.has_weights() { vec![1.0; k] } else { Vec::new() },
            implicit,
        }
    }

    /// Average and bias models fitted from rating averages.
    ///
    /// A user's bias is the mean of their ratings minus the global mean; an
    /// item's bias likewise. Users or items with no ratings get zero bias.
    pub fn fit_closed_form(kind: ModelKind, train: &RatingsDataset) -> Result<Self, ModelError> {
        if !kind.is_closed_form() {
            return Err(ModelError::NotClosedForm(kind));
        }
        let mean = train.global_mean()?;
        let mut params = Self::init(kind, train.n_users(), train.n_items(), 0, 0);
        params.mean = mean;
        if kind == ModelKind::Bias {
            let mut user_sum = vec![(0.0, 0usize); train.n_users()];
            let mut item_sum = vec![(0.0, 0usize); train.n_items()];
            for r in train.ratings() {
                let u = &mut user_sum[r.user as usize];
                u.0 += r.value;
                u.1 += 1;
                let i = &mut item_sum[r.item as usize];
                i.0 += r.value;
                i.1 += 1;
            }
            let bias = |(sum, count): (f64, usize)| {
                if count == 0 {
                    0.0
                } else {
                    sum / count as f64 - mean
                }
            };
            params.user_bias = user_sum.into_iter().map(bias).collect();
            params.item_bias = item_sum.into_iter().map(bias).collect();
        }
        Ok(params)
    }

    /// Count of stored learnable values (mean excluded).
    pub fn learnable_len(&self) -> usize {
        self.user_bias.len()
            + self.item_bias.len()
            + self.user_factors.len()
            + self.item_factors.len()
            + self.weights.len()
            + self.implicit.len()
    }

    pub fn is_finite(&self) -> bool {
        self.mean.is_finite()
            && self
                .user_bias
                .iter()
                .chain(&self.item_bias)
                .chain(self.user_factors.as_slice())
                .chain(self.item_factors.as_slice())
                .chain(&self.weights)
                .chain(self.implicit.as_slice())
                .all(|v| v.is_finite())
    }

    fn check_index(&self, user: u32, item: u32) -> Result<(), ModelError> {
        let (m, n) = (self.n_users, self.n_items);
        if user as usize >= m {
            return Err(ModelError::IndexOutOfRange {
                kind: "user",
                index: user as usize,
                len: m,
            });
        }
        if item as usize >= n {
            return Err(ModelError::IndexOutOfRange {
                kind: "item",
                index: item as usize,
                len: n,
            });
        }
        Ok(())
    }

    /// `|R(u)|^{-1/2} * sum of implicit rows over R(u)`; zero when R(u) is empty.
    pub(crate) fn implicit_user_term(&self, rated: &[u32], out: &mut [f64]) {
        out.fill(0.0);
        if rated.is_empty() {
            return;
        }
        for &g in rated {
            for (o, y) in out.iter_mut().zip(self.implicit.row(g as usize)) {
                *o += y;
            }
        }
        let norm = (rated.len() as f64).sqrt().recip();
        out.iter_mut().for_each(|o| *o *= norm);
    }

    /// Latent interaction term for a seen (user, item) pair.
    pub(crate) fn interaction(&self, feedback: &FeedbackIndex, user: usize, item: usize) -> f64 {
        let p = self.user_factors.row(user);
        let q = self.item_factors.row(item);
        match self.kind {
            ModelKind::Average | ModelKind::Bias => 0.0,
            ModelKind::Pmf | ModelKind::Svd => dot(p, q),
            ModelKind::Wsvd => self
                .weights
                .iter()
                .zip(p)
                .zip(q)
                .map(|((w, p), q)| w * p * q)
                .sum(),
            ModelKind::SvdPlusPlus => {
                let mut z = vec![0.0; self.k];
                self.implicit_user_term(feedback.rated_by(user as u32), &mut z);
                p.iter().zip(&z).zip(q).map(|((p, z), q)| (p + z) * q).sum()
            }
        }
    }

    pub(crate) fn predict_unchecked(&self, feedback: &FeedbackIndex, user: u32, item: u32) -> f64 {
        let (u, j) = (user as usize, item as usize);
        let mut pred = self.interaction(feedback, u, j);
        if self.kind.has_biases() {
            pred += self.user_bias[u] + self.item_bias[j];
        }
        if self.kind.has_mean() {
            pred += self.mean;
        }
        pred
    }

    /// Model prediction for dense indices, with no clipping.
    ///
    /// `feedback` supplies the implicit set R(u) for SVD++ and must come from
    /// the training split.
    pub fn predict(&self, feedback: &FeedbackIndex, user: u32, item: u32) -> Result<f64, ModelError> {
        self.check_index(user, item)?;
        if self.kind.has_implicit() && user as usize >= feedback.n_users() {
            return Err(ModelError::IndexOutOfRange {
                kind: "user",
                index: user as usize,
                len: feedback.n_users(),
            });
        }
        Ok(self.predict_unchecked(feedback, user, item))
    }

    /// Prediction that degrades gracefully for users/items without training
    /// ratings: an unseen side loses its bias and the whole interaction term.
    /// `None` (or an index with no ratings in `feedback`) means unseen.
    pub fn predict_cold(&self, feedback: &FeedbackIndex, user: Option<u32>, item: Option<u32>) -> f64 {
        let user = user.filter(|&u| (u as usize) < self.n_users && feedback.user_seen(u));
        let item = item.filter(|&j| (j as usize) < self.n_items && feedback.item_seen(j));
        let mut pred = if self.kind.has_mean() { self.mean } else { 0.0 };
        if self.kind.has_biases() {
            if let Some(u) = user {
                pred += self.user_bias[u as usize];
            }
            if let Some(j) = item {
                pred += self.item_bias[j as usize];
            }
        }
        if let (Some(u), Some(j)) = (user, item) {
            pred += self.interaction(feedback, u as usize, j as usize);
        }
        pred
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetBuilder, RatingScale};

    fn one_user_one_item() -> FeedbackIndex {
        FeedbackIndex::from_lists(1, vec![vec![0]]).unwrap()
    }

    fn wsvd_example() -> ModelParams {
        let mut p = ModelParams::init(ModelKind::Wsvd, 1, 1, 2, 0);
        p.mean = 3.0;
        p.user_bias = vec![0.5];
        p.item_bias = vec![-0.5];
        p.weights = vec![1.0, 2.0];
        p.user_factors = FactorMatrix::from_vec(1, 2, vec![0.5, 1.0]).unwrap();
        p.item_factors = FactorMatrix::from_vec(1, 2, vec![1.0, 0.5]).unwrap();
        p
    }

    #[test]
    fn wsvd_hand_evaluation() {
        let p = wsvd_example();
        let got = p.predict(&one_user_one_item(), 0, 0).unwrap();
        assert!((got - 4.5).abs() < 1e-15, "{got}");
    }

    #[test]
    fn unit_weights_match_svd() {
        let mut w = wsvd_example();
        w.weights = vec![1.0, 1.0];
        let mut s = ModelParams::init(ModelKind::Svd, 1, 1, 2, 0);
        s.mean = w.mean;
        s.user_bias = w.user_bias.clone();
        s.item_bias = w.item_bias.clone();
        s.user_factors = w.user_factors.clone();
        s.item_factors = w.item_factors.clone();
        let fb = one_user_one_item();
        assert_eq!(w.predict(&fb, 0, 0).unwrap(), s.predict(&fb, 0, 0).unwrap());
    }

    #[test]
    fn zero_bias_model_predicts_mean() {
        let mut p = ModelParams::init(ModelKind::Bias, 2, 2, 0, 0);
        p.mean = 3.7;
        let fb = FeedbackIndex::from_lists(2, vec![vec![0], vec![1]]).unwrap();
        assert_eq!(p.predict(&fb, 1, 0).unwrap(), 3.7);
    }

    #[test]
    fn pmf_orthogonal_factors_predict_zero() {
        let mut p = ModelParams::init(ModelKind::Pmf, 1, 1, 2, 0);
        p.user_factors = FactorMatrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        p.item_factors = FactorMatrix::from_vec(1, 2, vec![0.0, 1.0]).unwrap();
        assert_eq!(p.predict(&one_user_one_item(), 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn svdpp_with_empty_feedback_drops_implicit_term() {
        let mut p = ModelParams::init(ModelKind::SvdPlusPlus, 2, 2, 3, 9);
        p.mean = 3.0;
        let fb = FeedbackIndex::from_lists(2, vec![vec![], vec![0, 1]]).unwrap();
        let q = p.item_factors.row(1).to_vec();
        let expected = 3.0 + dot(p.user_factors.row(0), &q);
        assert_eq!(p.predict(&fb, 0, 1).unwrap(), expected);
    }

    #[test]
    fn predict_rejects_out_of_range() {
        let p = wsvd_example();
        assert!(matches!(
            p.predict(&one_user_one_item(), 1, 0),
            Err(ModelError::IndexOutOfRange { kind: "user", .. })
        ));
        assert!(matches!(
            p.predict(&one_user_one_item(), 0, 3),
            Err(ModelError::IndexOutOfRange { kind: "item", .. })
        ));
    }

    #[test]
    fn cold_start_fallbacks() {
        let mut svd = ModelParams::init(ModelKind::Svd, 2, 2, 2, 1);
        svd.mean = 3.5;
        svd.user_bias = vec![0.25, 0.75];
        svd.item_bias = vec![-0.5, 0.125];
        // user 1 and item 1 have no training ratings
        let fb = FeedbackIndex::from_lists(2, vec![vec![0], vec![]]).unwrap();
        assert_eq!(svd.predict_cold(&fb, Some(1), Some(0)), 3.5 - 0.5);
        assert_eq!(svd.predict_cold(&fb, None, Some(0)), 3.5 - 0.5);
        assert_eq!(svd.predict_cold(&fb, Some(0), Some(1)), 3.5 + 0.25);
        assert_eq!(svd.predict_cold(&fb, None, None), 3.5);
        assert_eq!(
            svd.predict_cold(&fb, Some(0), Some(0)),
            svd.predict(&fb, 0, 0).unwrap()
        );

        let pmf = ModelParams::init(ModelKind::Pmf, 2, 2, 2, 1);
        assert_eq!(pmf.predict_cold(&fb, None, None), 0.0);
        assert_eq!(pmf.predict_cold(&fb, Some(1), Some(0)), 0.0);
    }

    #[test]
    fn param_count_formulas() {
        assert_eq!(param_count(ModelKind::Pmf, 943, 1682, 15), 39_375);
        assert_eq!(param_count(ModelKind::Svd, 943, 1682, 15), 42_000);
        assert_eq!(param_count(ModelKind::Wsvd, 943, 1682, 15), 42_015);
        assert_eq!(param_count(ModelKind::SvdPlusPlus, 943, 1682, 15), 67_230);
        assert_eq!(param_count(ModelKind::Bias, 943, 1682, 15), 943 + 1682);
        assert_eq!(param_count(ModelKind::Average, 943, 1682, 15), 0);
    }

    #[test]
    fn init_is_deterministic_and_follows_defaults() {
        let a = ModelParams::init(ModelKind::Wsvd, 4, 5, 3, 11);
        let b = ModelParams::init(ModelKind::Wsvd, 4, 5, 3, 11);
        assert_eq!(a, b);
        assert_eq!(a.weights, vec![1.0; 3]);
        assert!(a.user_bias.iter().chain(&a.item_bias).all(|&b| b == 0.0));
        let c = ModelParams::init(ModelKind::Wsvd, 4, 5, 3, 12);
        assert_ne!(a.user_factors, c.user_factors);
        // shared draws across kinds
        let s = ModelParams::init(ModelKind::Svd, 4, 5, 3, 11);
        assert_eq!(a.user_factors, s.user_factors);
        assert_eq!(a.item_factors, s.item_factors);
    }

    #[test]
    fn learnable_len_matches_param_count_for_every_kind() {
        for kind in ModelKind::ALL {
            let p = ModelParams::init(kind, 7, 4, 3, 0);
            assert_eq!(p.learnable_len(), param_count(kind, 7, 4, 3), "{kind}");
        }
    }

    fn ds(triplets: &[(&str, &str, f64)]) -> RatingsDataset {
        let mut b = DatasetBuilder::new(RatingScale::new(1.0, 5.0).unwrap());
        for &(u, i, r) in triplets {
            b.push(u, i, r).unwrap();
        }
        b.build().unwrap()
    }

    #[test]
    fn closed_form_fits() {
        let single = ds(&[("u", "i", 4.0)]);
        let p = ModelParams::fit_closed_form(ModelKind::Bias, &single).unwrap();
        assert_eq!((p.mean, p.user_bias[0], p.item_bias[0]), (4.0, 0.0, 0.0));

        let two = ds(&[("u0", "i0", 5.0), ("u1", "i0", 3.0)]);
        let p = ModelParams::fit_closed_form(ModelKind::Bias, &two).unwrap();
        assert_eq!(p.mean, 4.0);
        assert_eq!(p.user_bias, vec![1.0, -1.0]);
        assert_eq!(p.item_bias, vec![0.0]);
        assert_eq!(p.predict(two.feedback(), 0, 0).unwrap(), 5.0);

        let avg = ModelParams::fit_closed_form(ModelKind::Average, &two).unwrap();
        assert_eq!(avg.predict(two.feedback(), 1, 0).unwrap(), 4.0);
        assert!(matches!(
            ModelParams::fit_closed_form(ModelKind::Svd, &two),
            Err(ModelError::NotClosedForm(ModelKind::Svd))
        ));
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in ModelKind::ALL {
            assert_eq!(kind.name().parse::<ModelKind>().unwrap(), kind);
        }
        assert_eq!("SVD++".parse::<ModelKind>().unwrap(), ModelKind::SvdPlusPlus);
        assert!("nnmf".parse::<ModelKind>().is_err());
    }
}
