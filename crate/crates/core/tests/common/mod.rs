//! Test-side oracles, written independently of the library's prediction and
//! gradient code, plus data helpers shared by several test targets.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsvd_core::{
    DatasetBuilder, FactorMatrix, ModelKind, ModelParams, PerBlock, Rating, RatingScale, RatingsDataset,
};

/// Straight-line prediction from the raw parameter blocks. `rated` is the
/// implicit set of `u` (only read for SVD++).
pub fn oracle_predict(p: &ModelParams, rated: &[u32], u: usize, j: usize) -> f64 {
    let k = p.k;
    let mean = if p.kind == ModelKind::Pmf { 0.0 } else { p.mean };
    let bias = if matches!(p.kind, ModelKind::Average | ModelKind::Pmf) {
        0.0
    } else {
        p.user_bias[u] + p.item_bias[j]
    };
    let mut inter = 0.0;
    for f in 0..k {
        let pu = p.user_factors.as_slice()[u * k + f];
        let qj = p.item_factors.as_slice()[j * k + f];
        inter += match p.kind {
            ModelKind::Wsvd => p.weights[f] * pu * qj,
            ModelKind::SvdPlusPlus => {
                let mut implicit = 0.0;
                for &g in rated {
                    implicit += p.implicit.as_slice()[g as usize * k + f];
                }
                if !rated.is_empty() {
                    implicit /= (rated.len() as f64).sqrt();
                }
                (pu + implicit) * qj
            }
            _ => pu * qj,
        };
    }
    mean + bias + inter
}

/// Which scalar a finite-difference probe perturbs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coord {
    UserBias,
    ItemBias,
    Weight(usize),
    User(usize),
    Item(usize),
    /// (entry in R(u), factor)
    Implicit(usize, usize),
}

fn coord_slot<'a>(p: &'a mut ModelParams, rated: &[u32], u: usize, j: usize, c: Coord) -> &'a mut f64 {
    let k = p.k;
    match c {
        Coord::UserBias => &mut p.user_bias[u],
        Coord::ItemBias => &mut p.item_bias[j],
        Coord::Weight(f) => &mut p.weights[f],
        Coord::User(f) => &mut p.user_factors.as_mut_slice()[u * k + f],
        Coord::Item(f) => &mut p.item_factors.as_mut_slice()[j * k + f],
        Coord::Implicit(n, f) => &mut p.implicit.as_mut_slice()[rated[n] as usize * k + f],
    }
}

fn coord_reg(reg: &PerBlock, c: Coord) -> f64 {
    match c {
        Coord::UserBias => reg.user_bias,
        Coord::ItemBias => reg.item_bias,
        Coord::Weight(_) => reg.weights,
        Coord::User(_) => reg.user_factors,
        Coord::Item(_) | Coord::Implicit(..) => reg.item_factors,
    }
}

/// Every coordinate the single-rating loss depends on for this kind.
pub fn coords(kind: ModelKind, k: usize, n_rated: usize) -> Vec<Coord> {
    let mut out = Vec::new();
    if !matches!(kind, ModelKind::Average | ModelKind::Pmf) {
        out.extend([Coord::UserBias, Coord::ItemBias]);
    }
    if matches!(kind, ModelKind::Average | ModelKind::Bias) {
        return out;
    }
    for f in 0..k {
        out.push(Coord::User(f));
        out.push(Coord::Item(f));
        if kind == ModelKind::Wsvd {
            out.push(Coord::Weight(f));
        }
        if kind == ModelKind::SvdPlusPlus {
            out.extend((0..n_rated).map(|n| Coord::Implicit(n, f)));
        }
    }
    out
}

/// Central difference of `0.5 * e^2 + reg/2 * x^2` with respect to the
/// coordinate `x`.
pub fn numeric_partial(
    p: &ModelParams,
    rated: &[u32],
    r: Rating,
    reg: &PerBlock,
    c: Coord,
    h: f64,
) -> f64 {
    let (u, j) = (r.user as usize, r.item as usize);
    let lam = coord_reg(reg, c);
    let objective = |shift: f64| {
        let mut q = p.clone();
        let x = {
            let slot = coord_slot(&mut q, rated, u, j, c);
            *slot += shift;
            *slot
        };
        let e = r.value - oracle_predict(&q, rated, u, j);
        0.5 * e * e + 0.5 * lam * x * x
    };
    (objective(h) - objective(-h)) / (2.0 * h)
}

/// Relative error with a floor on the denominator: below 1e-3 the
/// difference is judged against 1e-3, since central differences of an O(1)
/// objective carry about 1e-9 absolute rounding error at h = 1e-6.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// A random small problem: m, n <= 5, k <= 4, a non-empty set of ratings
/// on the 1-5 scale, and randomized (finite) parameters for `kind`.
pub fn random_instance(rng: &mut ChaCha8Rng, kind: ModelKind) -> (ModelParams, RatingsDataset) {
    let m = rng.random_range(1..=5usize);
    let n = rng.random_range(1..=5usize);
    let k = rng.random_range(1..=4usize);
    let mut b = DatasetBuilder::new(RatingScale::new(1.0, 5.0).unwrap());
    let mut any = false;
    for u in 0..m {
        for j in 0..n {
            if rng.random_bool(0.6) || (!any && u == m - 1 && j == n - 1) {
                b.push(&u.to_string(), &j.to_string(), rng.random_range(1..=5u32) as f64)
                    .unwrap();
                any = true;
            }
        }
    }
    let ds = b.build().unwrap();
    let (m, n) = (ds.n_users(), ds.n_items());
    let mut p = ModelParams::init(kind, m, n, k, rng.random());
    p.mean = rng.random_range(2.0..4.0);
    let mut normal = |len: usize, centre: f64, sd: f64| -> Vec<f64> {
        (0..len)
            .map(|_| centre + sd * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect()
    };
    if !p.user_bias.is_empty() {
        p.user_bias = normal(m, 0.0, 0.5);
        p.item_bias = normal(n, 0.0, 0.5);
    }
    if kind == ModelKind::Wsvd {
        p.weights = normal(k, 1.0, 0.5);
    }
    if kind == ModelKind::SvdPlusPlus {
        p.implicit = FactorMatrix::from_vec(n, k, normal(n * k, 0.0, 1.0)).unwrap();
    }
    (p, ds)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Location of the MovieLens-100K `u.data` file: `$WSVD_ML100K`, else
/// `data/ml-100k/u.data` at the workspace root.
pub fn ml100k_path() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("WSVD_ML100K") {
        let p = PathBuf::from(p);
        return p.is_file().then_some(p);
    }
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ml-100k/u.data");
    p.is_file().then_some(p)
}

pub const ML100K_HINT: &str =
    "MovieLens-100K not found: run scripts/fetch-ml100k.sh or set WSVD_ML100K to the u.data path";
