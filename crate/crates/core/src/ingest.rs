//! Rating-file parsers and a planted-factor synthetic generator.
//!
//! Accepted grammar, one rating per line (blank lines are skipped, a
//! trailing `\r` is stripped):
//!
//! | format            | separator          | fields                              | scale      |
//! |-------------------|--------------------|-------------------------------------|------------|
//! | `ml100k`          | `\t`               | user, item, rating, [timestamp]     | [1, 5]     |
//! | `movielens-delim` | `::`               | user, item, rating, [timestamp]     | [0.5, 5]   |
//! | `filmtrust`       | runs of whitespace | user, item, rating                  | [0.5, 4]   |
//! | `epinions`        | configurable       | user, item, rating, [one extra]     | [1, 5]     |
//!
//! Ids are arbitrary non-empty tokens. Ratings are decimal numbers. A
//! malformed line, an out-of-scale rating or a repeated (user, item) pair
//! aborts parsing with the 1-based line number.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetBuilder, DatasetError, RatingScale, RatingsDataset};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: DatasetError,
    },
    #[error("input contains no ratings")]
    Empty,
    #[error("unknown dataset format {0:?}")]
    UnknownFormat(String),
    #[error("infeasible synthetic dataset: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    Whitespace,
    Comma,
    Tab,
    Semicolon,
}

impl Delimiter {
    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Delimiter::Whitespace => line.split_whitespace().collect(),
            Delimiter::Comma => line.split(',').map(str::trim).collect(),
            Delimiter::Tab => line.split('\t').collect(),
            Delimiter::Semicolon => line.split(';').map(str::trim).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// MovieLens-100K `u.data`.
    MovieLens100K,
    /// MovieLens-1M / 10M `ratings.dat`.
    MovieLensDelim,
    FilmTrust,
    Epinions { delimiter: Delimiter },
}

impl DatasetFormat {
    pub fn scale(&self) -> RatingScale {
        let (min, max) = match self {
            DatasetFormat::MovieLens100K => (1.0, 5.0),
            DatasetFormat::MovieLensDelim => (0.5, 5.0),
            DatasetFormat::FilmTrust => (0.5, 4.0),
            DatasetFormat::Epinions { .. } => (1.0, 5.0),
        };
        RatingScale { min, max }
    }

    fn fields<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            DatasetFormat::MovieLens100K => line.split('\t').collect(),
            DatasetFormat::MovieLensDelim => line.split("::").collect(),
            DatasetFormat::FilmTrust => line.split_whitespace().collect(),
            DatasetFormat::Epinions { delimiter } => delimiter.split(line),
        }
    }

    fn max_fields(&self) -> usize {
        match self {
            DatasetFormat::FilmTrust => 3,
            _ => 4,
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetFormat::MovieLens100K => f.write_str("ml100k"),
            DatasetFormat::MovieLensDelim => f.write_str("movielens-delim"),
            DatasetFormat::FilmTrust => f.write_str("filmtrust"),
            DatasetFormat::Epinions { delimiter: Delimiter::Whitespace } => f.write_str("epinions"),
            DatasetFormat::Epinions { delimiter: Delimiter::Comma } => f.write_str("epinions-csv"),
            DatasetFormat::Epinions { delimiter: Delimiter::Tab } => f.write_str("epinions-tsv"),
            DatasetFormat::Epinions { delimiter: Delimiter::Semicolon } => f.write_str("epinions-ssv"),
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let epinions = |delimiter| Ok(DatasetFormat::Epinions { delimiter });
        match s.to_ascii_lowercase().as_str() {
            "ml100k" | "movielens-100k" => Ok(DatasetFormat::MovieLens100K),
            "movielens-delim" | "ml1m" | "ml10m" | "movielens-1m" | "movielens-10m" => {
                Ok(DatasetFormat::MovieLensDelim)
            }
            "filmtrust" => Ok(DatasetFormat::FilmTrust),
            "epinions" => epinions(Delimiter::Whitespace),
            "epinions-csv" => epinions(Delimiter::Comma),
            "epinions-tsv" => epinions(Delimiter::Tab),
            "epinions-ssv" => epinions(Delimiter::Semicolon),
            _ => Err(IngestError::UnknownFormat(s.to_owned())),
        }
    }
}

impl Serialize for DatasetFormat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DatasetFormat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses one rating file.
pub fn parse<R: BufRead>(source: R, format: DatasetFormat) -> Result<RatingsDataset, IngestError> {
    let mut builder = DatasetBuilder::new(format.scale());
    for (n, line) in source.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| IngestError::Malformed {
            line: line_no,
            reason,
        };
        let fields = format.fields(line);
        if fields.len() < 3 || fields.len() > format.max_fields() {
            return Err(malformed(format!(
                "expected 3..={} fields for {format}, found {}",
                format.max_fields(),
                fields.len()
            )));
        }
        let (user, item) = (fields[0].trim(), fields[1].trim());
        if user.is_empty() || item.is_empty() {
            return Err(malformed("empty user or item id".into()));
        }
        let rating: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| malformed(format!("invalid rating {:?}", fields[2])))?;
        if !rating.is_finite() {
            return Err(malformed(format!("invalid rating {:?}", fields[2])));
        }
        builder
            .push(user, item, rating)
            .map_err(|source| IngestError::Invalid {
                line: line_no,
                source,
            })?;
    }
    if builder.is_empty() {
        return Err(IngestError::Empty);
    }
    builder.build().map_err(|_| IngestError::Empty)
}

pub fn parse_file(path: impl AsRef<Path>, format: DatasetFormat) -> Result<RatingsDataset, IngestError> {
    let file = File::open(path)?;
    parse(BufReader::new(file), format)
}

/// Parameters of a planted-factor synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub users: usize,
    pub items: usize,
    pub ratings_per_user: usize,
    pub k_true: usize,
    /// Planted factor weights, length `k_true`.
    pub weights: Vec<f64>,
    pub noise_sd: f64,
    pub seed: u64,
}

/// Centre of the synthetic 1-5 scale.
pub const SYNTHETIC_MEAN: f64 = 3.0;

/// Generates `r_ij = 3 + (w ⊙ p_i)ᵀ q_j + N(0, noise_sd)` clamped to [1, 5].
///
/// Each user rates `ratings_per_user` distinct items drawn uniformly.
/// Planted factors are `N(0, 1/k_true)` so the interaction variance stays
/// near the mean squared weight regardless of `k_true`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<RatingsDataset, IngestError> {
    if spec.ratings_per_user > spec.items {
        return Err(IngestError::Infeasible(format!(
            "{} ratings per user but only {} items",
            spec.ratings_per_user, spec.items
        )));
    }
    if spec.users == 0 || spec.ratings_per_user == 0 {
        return Err(IngestError::Infeasible("no ratings requested".into()));
    }
    if spec.weights.len() != spec.k_true {
        return Err(IngestError::Infeasible(format!(
            "{} weights for {} planted factors",
            spec.weights.len(),
            spec.k_true
        )));
    }
    if !(spec.noise_sd.is_finite() && spec.noise_sd >= 0.0) {
        return Err(IngestError::Infeasible(format!("noise sd {}", spec.noise_sd)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.k_true;
    let sd = if k > 0 { (k as f64).sqrt().recip() } else { 0.0 };
    let normal = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);
    let p: Vec<f64> = (0..spec.users * k).map(|_| sd * normal(&mut rng)).collect();
    let q: Vec<f64> = (0..spec.items * k).map(|_| sd * normal(&mut rng)).collect();

    let scale = RatingScale { min: 1.0, max: 5.0 };
    let mut builder = DatasetBuilder::new(scale);
    for u in 0..spec.users {
        let picked = rand::seq::index::sample(&mut rng, spec.items, spec.ratings_per_user);
        for j in picked.iter() {
            let pu = &p[u * k..(u + 1) * k];
            let qj = &q[j * k..(j + 1) * k];
            let signal: f64 = spec
                .weights
                .iter()
                .zip(pu)
                .zip(qj)
                .map(|((w, a), b)| w * a * b)
                .sum();
            let noise = if spec.noise_sd > 0.0 {
                spec.noise_sd * normal(&mut rng)
            } else {
                0.0
            };
            let value = scale.clamp(SYNTHETIC_MEAN + signal + noise);
            builder
                .push(&u.to_string(), &j.to_string(), value)
                .expect("sampled items are distinct and values clamped");
        }
    }
    builder.build().map_err(|_| IngestError::Empty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse_str(text: &str, format: DatasetFormat) -> Result<RatingsDataset, IngestError> {
        parse(Cursor::new(text), format)
    }

    #[test]
    fn canonical_ml100k_record() {
        let ds = parse_str("196\t242\t3\t881250949\n", DatasetFormat::MovieLens100K).unwrap();
        assert_eq!((ds.n_users(), ds.n_items(), ds.len()), (1, 1, 1));
        let r = ds.ratings()[0];
        assert_eq!(ds.users().raw_id(r.user), Some("196"));
        assert_eq!(ds.items().raw_id(r.item), Some("242"));
        assert_eq!(r.value, 3.0);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(parse_str("", DatasetFormat::MovieLens100K), Err(IngestError::Empty)));
        assert!(matches!(parse_str("\n\n", DatasetFormat::FilmTrust), Err(IngestError::Empty)));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "1\t1\t3\t0\n1\t2\tx\t0\n";
        match parse_str(text, DatasetFormat::MovieLens100K) {
            Err(IngestError::Malformed { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        let text = "1\t1\t3\n1\t1\t4\n";
        match parse_str(text, DatasetFormat::MovieLens100K) {
            Err(IngestError::Invalid {
                line: 2,
                source: DatasetError::Duplicate { .. },
            }) => {}
            other => panic!("{other:?}"),
        }
        let text = "1 1 4.5\n";
        match parse_str(text, DatasetFormat::FilmTrust) {
            Err(IngestError::Invalid {
                line: 1,
                source: DatasetError::OutOfScale { .. },
            }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_str("1\t2\n", DatasetFormat::MovieLens100K),
            Err(IngestError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            parse_str("1 2 3 4\n", DatasetFormat::FilmTrust),
            Err(IngestError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            parse_str("1\t2\tNaN\n", DatasetFormat::MovieLens100K),
            Err(IngestError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn other_formats() {
        let ds = parse_str("1::1193::5::978300760\r\n1::661::3::978302109\r\n", DatasetFormat::MovieLensDelim)
            .unwrap();
        assert_eq!((ds.n_users(), ds.n_items(), ds.len()), (1, 2, 2));
        let ds = parse_str("1 1 2.0\n1  2 0.5\n\n2 1 4\n", DatasetFormat::FilmTrust).unwrap();
        assert_eq!((ds.n_users(), ds.n_items(), ds.len()), (2, 2, 3));
        let csv = DatasetFormat::Epinions {
            delimiter: Delimiter::Comma,
        };
        let ds = parse_str("a, b, 5\nc,b,1\n", csv).unwrap();
        assert_eq!((ds.n_users(), ds.n_items()), (2, 1));
        assert_eq!(ds.scale(), RatingScale { min: 1.0, max: 5.0 });
    }

    #[test]
    fn format_names_round_trip() {
        for name in ["ml100k", "movielens-delim", "filmtrust", "epinions", "epinions-csv", "epinions-tsv", "epinions-ssv"] {
            assert_eq!(name.parse::<DatasetFormat>().unwrap().to_string(), name);
        }
        assert!("netflix".parse::<DatasetFormat>().is_err());
    }

    #[test]
    fn parsing_preserves_every_line() {
        let text = "10\t20\t1\t5\n11\t20\t2\t5\n10\t21\t5\t5\n";
        let ds = parse_str(text, DatasetFormat::MovieLens100K).unwrap();
        for (line, r) in text.lines().zip(ds.ratings()) {
            let f: Vec<&str> = line.split('\t').collect();
            assert_eq!(ds.users().raw_id(r.user), Some(f[0]));
            assert_eq!(ds.items().raw_id(r.item), Some(f[1]));
            assert_eq!(r.value, f[2].parse::<f64>().unwrap());
        }
    }

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            users: 20,
            items: 30,
            ratings_per_user: 7,
            k_true: 3,
            weights: vec![1.0, 0.5, 2.0],
            noise_sd: 0.1,
            seed: 5,
        }
    }

    #[test]
    fn synthetic_counts_and_determinism() {
        let a = generate_synthetic(&spec()).unwrap();
        assert_eq!(a.len(), 20 * 7);
        assert_eq!(a.n_users(), 20);
        let b = generate_synthetic(&spec()).unwrap();
        assert_eq!(a.ratings(), b.ratings());
        assert!(a.ratings().iter().all(|r| (1.0..=5.0).contains(&r.value)));
    }

    #[test]
    fn synthetic_without_signal_is_constant() {
        let s = SyntheticSpec {
            k_true: 0,
            weights: vec![],
            noise_sd: 0.0,
            ..spec()
        };
        let ds = generate_synthetic(&s).unwrap();
        assert!(ds.ratings().iter().all(|r| r.value == SYNTHETIC_MEAN));
    }

    #[test]
    fn synthetic_rejects_infeasible_degree() {
        let s = SyntheticSpec {
            ratings_per_user: 31,
            ..spec()
        };
        assert!(matches!(generate_synthetic(&s), Err(IngestError::Infeasible(_))));
        let s = SyntheticSpec {
            weights: vec![1.0],
            ..spec()
        };
        assert!(generate_synthetic(&s).is_err());
    }
}
