//! On-disk model format.
//!
//! ```text
//! wsvd-model 1            format tag and version
//! encoding binary|text
//! kind <model kind>
//! users <m>
//! items <n>
//! factors <k>
//! scale <min> <max>       rating scale of the training data
//! end-header
//! <m raw user ids, one per line>
//! <n raw item ids, one per line>
//! data
//! <payload>
//! ```
//!
//! The payload holds, in order: mean; user biases (m); item biases (n);
//! weights (k); user factors (m*k, row-major); item factors (n*k); implicit
//! factors (n*k); then for each user the number of rated training items
//! followed by their indices. Blocks the kind does not have are omitted.
//! `binary` stores f64 and u32 values little-endian; `text` stores one
//! value per line in shortest round-trip decimal. Both reproduce every
//! parameter bit for bit.

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::dataset::{FeedbackIndex, IdMap, RatingScale, RatingsDataset};
use crate::model::{FactorMatrix, ModelKind, ModelParams};

pub const FORMAT_TAG: &str = "wsvd-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a model file (missing {FORMAT_TAG:?} tag)")]
    BadTag,
    #[error("unsupported model format version {found} (expected {FORMAT_VERSION})")]
    Version { found: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("corrupt model file: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Encoding {
    #[default]
    Binary,
    Text,
}

impl FromStr for Encoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" => Ok(Encoding::Binary),
            "text" => Ok(Encoding::Text),
            _ => Err(format!("unknown encoding {s:?}")),
        }
    }
}

impl Encoding {
    fn name(self) -> &'static str {
        match self {
            Encoding::Binary => "binary",
            Encoding::Text => "text",
        }
    }
}

/// Fitted parameters plus everything needed to predict by raw id.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub users: Arc<IdMap>,
    pub items: Arc<IdMap>,
    /// Training-split feedback: SVD++ implicit sets and seen/unseen status.
    pub feedback: FeedbackIndex,
    pub scale: RatingScale,
}

impl TrainedModel {
    pub fn new(params: ModelParams, train: &RatingsDataset) -> Self {
        Self {
            params,
            users: Arc::clone(train.users()),
            items: Arc::clone(train.items()),
            feedback: train.feedback().clone(),
            scale: train.scale(),
        }
    }

    /// Prediction by raw id; unknown ids take the cold-start path.
    pub fn predict_raw(&self, user: &str, item: &str) -> f64 {
        self.params
            .predict_cold(&self.feedback, self.users.index_of(user), self.items.index_of(item))
    }

    pub fn save(&self, path: impl AsRef<Path>, encoding: Encoding) -> Result<(), PersistError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf, encoding)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PersistError> {
        Self::read_from(&fs::read(path)?)
    }

    pub fn write_to<W: Write>(&self, out: &mut W, encoding: Encoding) -> Result<(), PersistError> {
        let p = &self.params;
        let (m, n) = (self.users.len(), self.items.len());
        if p.n_users != m || p.n_items != n || self.feedback.n_users() != m || self.feedback.n_items() != n {
            return Err(PersistError::Shape(format!(
                "parameters are {}x{}, id maps {m}x{n}",
                p.n_users, p.n_items
            )));
        }
        writeln!(out, "{FORMAT_TAG} {FORMAT_VERSION}")?;
        writeln!(out, "encoding {}", encoding.name())?;
        writeln!(out, "kind {}", p.kind)?;
        writeln!(out, "users {m}")?;
        writeln!(out, "items {n}")?;
        writeln!(out, "factors {}", p.k)?;
        writeln!(out, "scale {:?} {:?}", self.scale.min, self.scale.max)?;
        writeln!(out, "end-header")?;
        for id in self.users.raw_ids().chain(self.items.raw_ids()) {
            if id.contains(['\n', '\r']) {
                return Err(PersistError::Corrupt(format!("id {id:?} contains a line break")));
            }
            writeln!(out, "{id}")?;
        }
        writeln!(out, "data")?;

        let mut values: Vec<f64> = Vec::with_capacity(p.learnable_len() + 1);
        values.push(p.mean);
        values.extend_from_slice(&p.user_bias);
        values.extend_from_slice(&p.item_bias);
        values.extend_from_slice(&p.weights);
        values.extend_from_slice(p.user_factors.as_slice());
        values.extend_from_slice(p.item_factors.as_slice());
        values.extend_from_slice(p.implicit.as_slice());
        let mut counts: Vec<u32> = Vec::with_capacity(m + self.feedback.total());
        for u in 0..m as u32 {
            let rated = self.feedback.rated_by(u);
            counts.push(rated.len() as u32);
            counts.extend_from_slice(rated);
        }
        match encoding {
            Encoding::Binary => {
                let mut bytes = Vec::with_capacity(values.len() * 8 + counts.len() * 4);
                for v in &values {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
                for c in &counts {
                    bytes.extend_from_slice(&c.to_le_bytes());
                }
                out.write_all(&bytes)?;
            }
            Encoding::Text => {
                for v in &values {
                    writeln!(out, "{v:?}")?;
                }
                for c in &counts {
                    writeln!(out, "{c}")?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from(bytes: &[u8]) -> Result<Self, PersistError> {
        let mut cur = Cursor { bytes, pos: 0 };
        let first = cur.line()?;
        let mut tag = first.split_whitespace();
        if tag.next() != Some(FORMAT_TAG) {
            return Err(PersistError::BadTag);
        }
        let version = tag.next().unwrap_or("");
        if version != FORMAT_VERSION.to_string() {
            return Err(PersistError::Version {
                found: version.to_owned(),
            });
        }
        let encoding: Encoding = cur
            .field("encoding")?
            .parse()
            .map_err(PersistError::Corrupt)?;
        let kind: ModelKind = cur
            .field("kind")?
            .parse()
            .map_err(|e: crate::model::ModelError| PersistError::Corrupt(e.to_string()))?;
        let m = cur.number("users")?;
        let n = cur.number("items")?;
        let k = cur.number("factors")?;
        let scale = cur.field("scale")?;
        let scale = scale
            .split_once(' ')
            .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
            .and_then(|(a, b)| RatingScale::new(a, b).ok())
            .ok_or_else(|| PersistError::Corrupt(format!("invalid scale {scale:?}")))?;
        if cur.line()? != "end-header" {
            return Err(PersistError::Corrupt("missing end-header".into()));
        }
        if kind.has_factors() == (k == 0) {
            return Err(PersistError::Shape(format!("{k} factors for kind {kind}")));
        }
        let users = read_ids(&mut cur, m)?;
        let items = read_ids(&mut cur, n)?;
        if cur.line()? != "data" {
            return Err(PersistError::Corrupt("missing data marker".into()));
        }

        let mut payload: Box<dyn Payload> = match encoding {
            Encoding::Binary => Box::new(BinaryPayload(cur)),
            Encoding::Text => Box::new(TextPayload(cur)),
        };
        let mut params = ModelParams::init(kind, 0, 0, 0, 0);
        params.n_users = m;
        params.n_items = n;
        params.k = k;
        params.mean = payload.f64()?;
        if kind.has_biases() {
            params.user_bias = payload.f64s(m)?;
            params.item_bias = payload.f64s(n)?;
        }
        if kind.has_weights() {
            params.weights = payload.f64s(k)?;
        }
        let matrix = |payload: &mut Box<dyn Payload>, rows: usize| -> Result<FactorMatrix, PersistError> {
            Ok(FactorMatrix::from_vec(rows, k, payload.f64s(rows * k)?).expect("length matches"))
        };
        if kind.has_factors() {
            params.user_factors = matrix(&mut payload, m)?;
            params.item_factors = matrix(&mut payload, n)?;
        }
        if kind.has_implicit() {
            params.implicit = matrix(&mut payload, n)?;
        }
        let mut lists = Vec::with_capacity(m);
        for _ in 0..m {
            let len = payload.u32()? as usize;
            let mut list = Vec::with_capacity(len.min(n));
            for _ in 0..len {
                let j = payload.u32()?;
                if j as usize >= n {
                    return Err(PersistError::Shape(format!("feedback item {j} >= {n}")));
                }
                list.push(j);
            }
            lists.push(list);
        }
        if !payload.at_end() {
            return Err(PersistError::Corrupt("trailing data after payload".into()));
        }
        let feedback = FeedbackIndex::from_lists(n, lists).map_err(|e| PersistError::Shape(e.to_string()))?;
        Ok(Self {
            params,
            users: Arc::new(users),
            items: Arc::new(items),
            feedback,
            scale,
        })
    }
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>, encoding: Encoding) -> Result<(), PersistError> {
    model.save(path, encoding)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel, PersistError> {
    TrainedModel::load(path)
}

fn read_ids(cur: &mut Cursor<'_>, count: usize) -> Result<IdMap, PersistError> {
    let mut ids = Vec::with_capacity(count);
    for _ in 0..count {
        ids.push(cur.line()?.to_owned());
    }
    IdMap::from_raw_ids(ids).ok_or_else(|| PersistError::Corrupt("repeated raw id".into()))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn line(&mut self) -> Result<&'a str, PersistError> {
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| PersistError::Corrupt("unexpected end of file".into()))?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| PersistError::Corrupt("invalid utf-8".into()))
    }

    fn field(&mut self, key: &str) -> Result<&'a str, PersistError> {
        let line = self.line()?;
        line.strip_prefix(key)
            .and_then(|v| v.strip_prefix(' '))
            .ok_or_else(|| PersistError::Corrupt(format!("expected {key:?} header, found {line:?}")))
    }

    fn number(&mut self, key: &str) -> Result<usize, PersistError> {
        let v = self.field(key)?;
        v.parse()
            .map_err(|_| PersistError::Corrupt(format!("invalid {key} value {v:?}")))
    }
}

trait Payload {
    fn f64(&mut self) -> Result<f64, PersistError>;
    fn u32(&mut self) -> Result<u32, PersistError>;
    fn at_end(&self) -> bool;

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>, PersistError> {
        (0..count).map(|_| self.f64()).collect()
    }
}

struct BinaryPayload<'a>(Cursor<'a>);

impl BinaryPayload<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], PersistError> {
        let c = &mut self.0;
        let chunk = c
            .bytes
            .get(c.pos..c.pos + N)
            .ok_or_else(|| PersistError::Corrupt("truncated payload".into()))?;
        c.pos += N;
        Ok(chunk.try_into().expect("slice has length N"))
    }
}

impl Payload for BinaryPayload<'_> {
    fn f64(&mut self) -> Result<f64, PersistError> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn u32(&mut self) -> Result<u32, PersistError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn at_end(&self) -> bool {
        self.0.pos == self.0.bytes.len()
    }
}

struct TextPayload<'a>(Cursor<'a>);

impl TextPayload<'_> {
    fn value<T: FromStr>(&mut self) -> Result<T, PersistError> {
        let line = self
            .0
            .line()
            .map_err(|_| PersistError::Corrupt("truncated payload".into()))?;
        line.parse()
            .map_err(|_| PersistError::Corrupt(format!("invalid number {line:?}")))
    }
}

impl Payload for TextPayload<'_> {
    fn f64(&mut self) -> Result<f64, PersistError> {
        self.value()
    }

    fn u32(&mut self) -> Result<u32, PersistError> {
        self.value()
    }

    fn at_end(&self) -> bool {
        self.0.pos == self.0.bytes.len()
    }
}
