//! Sparse rating triplets with dense id remapping.
//!
//! A [`RatingsDataset`] owns the observed `(user, item, rating)` triplets of a
//! user-item matrix. Raw identifiers from source files are remapped to dense
//! `0..m` / `0..n` indices at construction; the maps are kept (behind `Arc`,
//! shared with every split) so that models can be queried by raw id later.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("dataset has no ratings")]
    Empty,
    #[error("{kind} index {index} out of range (0..{len})")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        len: usize,
    },
    #[error("duplicate rating for user {user:?}, item {item:?}")]
    Duplicate { user: String, item: String },
    #[error("rating {value} outside scale [{min}, {max}]")]
    OutOfScale { value: f64, min: f64, max: f64 },
    #[error("invalid rating scale [{min}, {max}]")]
    InvalidScale { min: f64, max: f64 },
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
}

/// A single observed rating, addressed by dense indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    pub value: f64,
}

/// Inclusive `[min, max]` range of valid rating values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

impl RatingScale {
    pub fn new(min: f64, max: f64) -> Result<Self, DatasetError> {
        if !(min.is_finite() && max.is_finite() && min <= max) {
            return Err(DatasetError::InvalidScale { min, max });
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.min && value <= self.max
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.min, self.max)
    }
}

/// Bidirectional raw-id <-> dense-index map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdMap {
    raw: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a map from raw ids listed in dense-index order.
    /// Returns `None` if an id repeats.
    pub fn from_raw_ids<I, S>(ids: I) -> Option<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut map = Self::new();
        for id in ids {
            let id = id.into();
            if map.index.contains_key(&id) {
                return None;
            }
            map.insert(id);
        }
        Some(map)
    }

    fn insert(&mut self, id: String) -> u32 {
        let next = self.raw.len() as u32;
        match self.index.entry(id) {
            Entry::Occupied(e) => *e.get(),
            Entry::Vacant(e) => {
                self.raw.push(e.key().clone());
                e.insert(next);
                next
            }
        }
    }

    pub fn get_or_insert(&mut self, id: &str) -> u32 {
        match self.index.get(id) {
            Some(&i) => i,
            None => self.insert(id.to_owned()),
        }
    }

    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn raw_id(&self, index: u32) -> Option<&str> {
        self.raw.get(index as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn raw_ids(&self) -> impl Iterator<Item = &str> {
        self.raw.iter().map(String::as_str)
    }
}

/// Per-user lists of rated items plus per-item "has a rating" flags.
///
/// Built from a training split, this is everything a fitted model needs at
/// prediction time besides its parameters: the implicit feedback set of
/// SVD++ and the seen/unseen status used for cold-start fallbacks.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackIndex {
    offsets: Vec<usize>,
    items: Vec<u32>,
    item_seen: Vec<bool>,
}

impl FeedbackIndex {
    pub fn build(n_users: usize, n_items: usize, ratings: &[Rating]) -> Self {
        let mut offsets = vec![0usize; n_users + 1];
        for r in ratings {
            offsets[r.user as usize + 1] += 1;
        }
        for u in 0..n_users {
            offsets[u + 1] += offsets[u];
        }
        let mut cursor = offsets.clone();
        let mut items = vec![0u32; ratings.len()];
        let mut item_seen = vec![false; n_items];
        for r in ratings {
            let slot = &mut cursor[r.user as usize];
            items[*slot] = r.item;
            *slot += 1;
            item_seen[r.item as usize] = true;
        }
        for u in 0..n_users {
            items[offsets[u]..offsets[u + 1]].sort_unstable();
        }
        Self {
            offsets,
            items,
            item_seen,
        }
    }

    /// Reassembles an index from per-user item lists (as stored in model files).
    pub fn from_lists(n_items: usize, lists: Vec<Vec<u32>>) -> Result<Self, DatasetError> {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut items = Vec::new();
        let mut item_seen = vec![false; n_items];
        for mut list in lists {
            list.sort_unstable();
            list.dedup();
            for &j in &list {
                let seen = item_seen
                    .get_mut(j as usize)
                    .ok_or(DatasetError::IndexOutOfRange {
                        kind: "item",
                        index: j as usize,
                        len: n_items,
                    })?;
                *seen = true;
            }
            items.extend_from_slice(&list);
            offsets.push(items.len());
        }
        Ok(Self {
            offsets,
            items,
            item_seen,
        })
    }

    pub fn n_users(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_items(&self) -> usize {
        self.item_seen.len()
    }

    /// Items rated by `user`, sorted ascending. Panics if `user` is out of range.
    #[inline]
    pub fn rated_by(&self, user: u32) -> &[u32] {
        let u = user as usize;
        &self.items[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn user_seen(&self, user: u32) -> bool {
        (user as usize) < self.n_users() && !self.rated_by(user).is_empty()
    }

    pub fn item_seen(&self, item: u32) -> bool {
        self.item_seen.get(item as usize).copied().unwrap_or(false)
    }

    pub fn total(&self) -> usize {
        self.items.len()
    }
}

/// Immutable set of observed ratings over a fixed user/item index space.
#[derive(Debug, Clone)]
pub struct RatingsDataset {
    users: Arc<IdMap>,
    items: Arc<IdMap>,
    ratings: Vec<Rating>,
    scale: RatingScale,
    feedback: FeedbackIndex,
}

impl RatingsDataset {
    /// Validates and wraps triplets that already use dense indices.
    pub fn from_parts(
        users: Arc<IdMap>,
        items: Arc<IdMap>,
        ratings: Vec<Rating>,
        scale: RatingScale,
    ) -> Result<Self, DatasetError> {
        let (m, n) = (users.len(), items.len());
        let mut pairs = HashSet::with_capacity(ratings.len());
        for r in &ratings {
            if r.user as usize >= m {
                return Err(DatasetError::IndexOutOfRange {
                    kind: "user",
                    index: r.user as usize,
                    len: m,
                });
            }
            if r.item as usize >= n {
                return Err(DatasetError::IndexOutOfRange {
                    kind: "item",
                    index: r.item as usize,
                    len: n,
                });
            }
            if !scale.contains(r.value) {
                return Err(DatasetError::OutOfScale {
                    value: r.value,
                    min: scale.min,
                    max: scale.max,
                });
            }
            if !pairs.insert((r.user, r.item)) {
                return Err(DatasetError::Duplicate {
                    user: users.raw_id(r.user).unwrap_or_default().to_owned(),
                    item: items.raw_id(r.item).unwrap_or_default().to_owned(),
                });
            }
        }
        let feedback = FeedbackIndex::build(m, n, &ratings);
        Ok(Self {
            users,
            items,
            ratings,
            scale,
            feedback,
        })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn scale(&self) -> RatingScale {
        self.scale
    }

    pub fn users(&self) -> &Arc<IdMap> {
        &self.users
    }

    pub fn items(&self) -> &Arc<IdMap> {
        &self.items
    }

    pub fn feedback(&self) -> &FeedbackIndex {
        &self.feedback
    }

    /// Mean of all observed ratings.
    pub fn global_mean(&self) -> Result<f64, DatasetError> {
        if self.ratings.is_empty() {
            return Err(DatasetError::Empty);
        }
        let sum: f64 = self.ratings.iter().map(|r| r.value).sum();
        Ok(sum / self.ratings.len() as f64)
    }

    /// Fraction of the `m x n` matrix that is observed.
    pub fn density(&self) -> Result<f64, DatasetError> {
        let cells = self.n_users() * self.n_items();
        if cells == 0 || self.ratings.is_empty() {
            return Err(DatasetError::Empty);
        }
        Ok(self.ratings.len() as f64 / cells as f64)
    }

    pub fn items_rated_by(&self, user: u32) -> Result<&[u32], DatasetError> {
        if user as usize >= self.n_users() {
            return Err(DatasetError::IndexOutOfRange {
                kind: "user",
                index: user as usize,
                len: self.n_users(),
            });
        }
        Ok(self.feedback.rated_by(user))
    }

    /// Seeded global (non-stratified) random split into train and test.
    ///
    /// `|train| = round_half_up(fraction * |K|)`. Both halves keep this
    /// dataset's id maps, so indices stay comparable across them.
    pub fn split(&self, spec: SplitSpec) -> Result<(Self, Self), DatasetError> {
        spec.validate()?;
        if self.ratings.is_empty() {
            return Err(DatasetError::Empty);
        }
        let n_train = spec.train_len(self.ratings.len());
        let mut order: Vec<usize> = (0..self.ratings.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
        let (train_idx, test_idx) = order.split_at(n_train);
        let pick = |idx: &[usize]| {
            let ratings: Vec<Rating> = idx.iter().map(|&i| self.ratings[i]).collect();
            let feedback = FeedbackIndex::build(self.n_users(), self.n_items(), &ratings);
            Self {
                users: Arc::clone(&self.users),
                items: Arc::clone(&self.items),
                ratings,
                scale: self.scale,
                feedback,
            }
        };
        Ok((pick(train_idx), pick(test_idx)))
    }
}

/// Incrementally assembles a dataset from raw-id triplets.
#[derive(Debug)]
pub struct DatasetBuilder {
    users: IdMap,
    items: IdMap,
    ratings: Vec<Rating>,
    pairs: HashSet<(u32, u32)>,
    scale: RatingScale,
}

impl DatasetBuilder {
    pub fn new(scale: RatingScale) -> Self {
        Self {
            users: IdMap::new(),
            items: IdMap::new(),
            ratings: Vec::new(),
            pairs: HashSet::new(),
            scale,
        }
    }

    pub fn push(&mut self, user: &str, item: &str, value: f64) -> Result<(), DatasetError> {
        if !self.scale.contains(value) {
            return Err(DatasetError::OutOfScale {
                value,
                min: self.scale.min,
                max: self.scale.max,
            });
        }
        let u = self.users.get_or_insert(user);
        let i = self.items.get_or_insert(item);
        if !self.pairs.insert((u, i)) {
            return Err(DatasetError::Duplicate {
                user: user.to_owned(),
                item: item.to_owned(),
            });
        }
        self.ratings.push(Rating {
            user: u,
            item: i,
            value,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn build(self) -> Result<RatingsDataset, DatasetError> {
        if self.ratings.is_empty() {
            return Err(DatasetError::Empty);
        }
        let feedback = FeedbackIndex::build(self.users.len(), self.items.len(), &self.ratings);
        Ok(RatingsDataset {
            users: Arc::new(self.users),
            items: Arc::new(self.items),
            ratings: self.ratings,
            scale: self.scale,
            feedback,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self, DatasetError> {
        let spec = Self {
            train_fraction,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.train_fraction > 0.0 && self.train_fraction < 1.0 {
            Ok(())
        } else {
            Err(DatasetError::InvalidFraction(self.train_fraction))
        }
    }

    pub fn train_len(&self, total: usize) -> usize {
        // round half up
        ((self.train_fraction * total as f64) + 0.5).floor() as usize
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 42,
        }
    }
}
