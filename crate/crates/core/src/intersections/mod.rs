//! Counting intersecting pairs `(i, j)` with `T_i ∩ T_{j,θ} ≠ ∅`.
//!
//! Two counters share one contract: an all-pairs oracle and a bucket-grid
//! counter. Everything else (per-rectangle histograms, area sums, the
//! fine-class pair counts) is derived from the adjacency they produce.

mod grid;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

pub use grid::GridIndex;

use crate::cantor::{scale_index, DigitSystem, Level};
use crate::error::{Error, Result};
use crate::geometry::{
    intersection_area, prepare_all, prepared_intersect, rects_intersect, rotate_family,
    OrientedRect, Vec2,
};

pub const DEFAULT_PAIR_CAP: u64 = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bruteforce,
    Fast,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bruteforce => "bruteforce",
            Method::Fast => "fast",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CountOptions {
    /// Maximum number of rectangle-pair tests before failing.
    pub pair_cap: u64,
    /// How many intersecting pairs to keep in the record.
    pub keep_pairs: usize,
}

impl Default for CountOptions {
    fn default() -> Self {
        Self {
            pair_cap: DEFAULT_PAIR_CAP,
            keep_pairs: 0,
        }
    }
}

/// Intersecting partners of every `T_i`: `rows[i]` lists the 0-based `j`
/// with `T_i ∩ T_{j,θ} ≠ ∅`, ascending.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Adjacency {
    pub rows: Vec<Vec<u32>>,
    pub tests: u64,
}

impl Adjacency {
    pub fn total(&self) -> u64 {
        self.rows.iter().map(|r| r.len() as u64).sum()
    }

    pub fn max_row(&self) -> u32 {
        self.rows.iter().map(|r| r.len() as u32).max().unwrap_or(0)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&j| (i, j as usize)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairCountRecord {
    pub n: u32,
    pub delta: f64,
    pub theta: f64,
    pub omega: Vec2,
    /// `L(δ, θ)`.
    pub l: u64,
    pub max_per_i: u32,
    /// First `keep_pairs` intersecting pairs as 1-based `(i, j)`.
    pub pairs: Option<Vec<(u64, u64)>>,
    pub method: Method,
    #[serde(skip)]
    pub elapsed: Duration,
}

fn family_meta(rects: &[OrientedRect], rotated: &[OrientedRect]) -> (u32, f64, f64, Vec2) {
    let n = rects.first().map_or(0, |r| r.source.0);
    let delta = rects.first().map_or(0.0, |r| r.side_lengths().0 / 3.0);
    let (theta, omega) = rotated
        .first()
        .map_or((0.0, Vec2::ZERO), |r| (r.theta, r.omega));
    (n, delta, theta, omega)
}

fn check_levels(rects: &[OrientedRect], rotated: &[OrientedRect]) -> Result<()> {
    if let (Some(a), Some(b)) = (rects.first(), rotated.first()) {
        if a.source.0 != b.source.0 || rects.len() != rotated.len() {
            return Err(Error::Degenerate(format!(
                "families differ in level: {} rectangles at level {} vs {} at level {}",
                rects.len(),
                a.source.0,
                rotated.len(),
                b.source.0
            )));
        }
    }
    Ok(())
}

fn record(
    rects: &[OrientedRect],
    rotated: &[OrientedRect],
    adj: &Adjacency,
    method: Method,
    opts: &CountOptions,
    start: Instant,
) -> PairCountRecord {
    let (n, delta, theta, omega) = family_meta(rects, rotated);
    let pairs = (opts.keep_pairs > 0).then(|| {
        adj.pairs()
            .take(opts.keep_pairs)
            .map(|(i, j)| (i as u64 + 1, j as u64 + 1))
            .collect()
    });
    PairCountRecord {
        n,
        delta,
        theta,
        omega,
        l: adj.total(),
        max_per_i: adj.max_row(),
        pairs,
        method,
        elapsed: start.elapsed(),
    }
}

/// All-pairs adjacency; every ordered pair is tested.
pub fn adjacency_bruteforce(
    rects: &[OrientedRect],
    rotated: &[OrientedRect],
    pair_cap: u64,
) -> Result<Adjacency> {
    check_levels(rects, rotated)?;
    let requested = rects.len() as u128 * rotated.len() as u128;
    if requested > pair_cap as u128 {
        return Err(Error::PairBudget {
            requested,
            cap: pair_cap,
        });
    }
    let base = prepare_all(rects)?;
    let other = prepare_all(rotated)?;
    let rows = base
        .par_iter()
        .map(|a| {
            other
                .iter()
                .enumerate()
                .filter(|(_, b)| prepared_intersect(a, b).verdict.counts())
                .map(|(j, _)| j as u32)
                .collect()
        })
        .collect();
    Ok(Adjacency {
        rows,
        tests: requested as u64,
    })
}

/// Adjacency through a bucket grid over the rotated family, cell equal to
/// the longer rectangle side.
pub fn adjacency_fast(
    rects: &[OrientedRect],
    rotated: &[OrientedRect],
    pair_cap: u64,
) -> Result<Adjacency> {
    check_levels(rects, rotated)?;
    let Some(first) = rotated.first() else {
        return Ok(Adjacency {
            rows: vec![Vec::new(); rects.len()],
            tests: 0,
        });
    };
    let (w, h) = first.side_lengths();
    let index = GridIndex::build(rotated, w.max(h));
    let rows = rects
        .par_iter()
        .map(|a| {
            let (lo, hi) = a.bbox();
            let candidates = index.query(lo, hi);
            let mut row = Vec::new();
            for &j in &candidates {
                if rects_intersect(a, &rotated[j as usize])?.verdict.counts() {
                    row.push(j);
                }
            }
            Ok((row, candidates.len() as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let tests: u64 = rows.iter().map(|r| r.1).sum();
    if tests > pair_cap {
        return Err(Error::PairBudget {
            requested: tests as u128,
            cap: pair_cap,
        });
    }
    Ok(Adjacency {
        rows: rows.into_iter().map(|r| r.0).collect(),
        tests,
    })
}

pub fn count_pairs_bruteforce(
    rects: &[OrientedRect],
    rotated: &[OrientedRect],
    opts: &CountOptions,
) -> Result<PairCountRecord> {
    let start = Instant::now();
    let adj = adjacency_bruteforce(rects, rotated, opts.pair_cap)?;
    Ok(record(
        rects,
        rotated,
        &adj,
        Method::Bruteforce,
        opts,
        start,
    ))
}

pub fn count_pairs_fast(
    rects: &[OrientedRect],
    rotated: &[OrientedRect],
    opts: &CountOptions,
) -> Result<PairCountRecord> {
    let start = Instant::now();
    let adj = adjacency_fast(rects, rotated, opts.pair_cap)?;
    Ok(record(rects, rotated, &adj, Method::Fast, opts, start))
}

/// `#{j : T_i ∩ T_{j,θ} ≠ ∅}` for every `i`.
pub fn per_rect_counts(rects: &[OrientedRect], rotated: &[OrientedRect]) -> Result<Vec<u32>> {
    let adj = adjacency_fast(rects, rotated, DEFAULT_PAIR_CAP)?;
    Ok(adj.rows.iter().map(|r| r.len() as u32).collect())
}

/// Sum of clipped areas over intersecting pairs, summed in `(i, j)` order.
pub fn pairwise_area_sum(rects: &[OrientedRect], rotated: &[OrientedRect]) -> Result<f64> {
    let adj = adjacency_fast(rects, rotated, DEFAULT_PAIR_CAP)?;
    Ok(area_sum_over(&adj, rects, rotated))
}

pub(crate) fn area_sum_over(
    adj: &Adjacency,
    rects: &[OrientedRect],
    rotated: &[OrientedRect],
) -> f64 {
    let per_row: Vec<f64> = adj
        .rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .map(|&j| intersection_area(&rects[i], &rotated[j as usize]))
                .sum()
        })
        .collect();
    per_row.iter().sum()
}

/// `R` (unrotated) and `R_θ = τ_θ(R)` for one level.
#[derive(Clone, Debug)]
pub struct RotatedPair {
    pub base: Vec<OrientedRect>,
    pub rotated: Vec<OrientedRect>,
    pub theta: f64,
    pub omega: Vec2,
}

impl RotatedPair {
    pub fn new(level: &Level, theta: f64, omega: Vec2) -> Self {
        let rects = level.rects();
        Self {
            base: rotate_family(&rects, 0.0, Vec2::ZERO),
            rotated: rotate_family(&rects, theta, omega),
            theta,
            omega,
        }
    }

    pub fn adjacency(&self, pair_cap: u64) -> Result<Adjacency> {
        adjacency_fast(&self.base, &self.rotated, pair_cap)
    }
}

/// Split level `m` with `|θ| ∈ (a^{-(m+1)}, a^{-m}]`, clamped to `0..=n`.
pub fn split_level(a: u32, n: u32, theta: f64) -> u32 {
    scale_index(a, theta.abs()).clamp(0, n as i64) as u32
}

/// Pair counts partitioned by the fine part `x_sma` of the first rectangle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FineClassCounts {
    pub m: u32,
    /// `(sma_x, sma_y)` numerators ↦ number of intersecting pairs.
    pub classes: BTreeMap<(i64, i64), u64>,
}

impl FineClassCounts {
    pub fn max(&self) -> u64 {
        self.classes.values().copied().max().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.classes.values().sum()
    }
}

/// Group the pairs of `adj` by the level-`m` fine part of `T_i`'s corner.
/// Every realizable fine part appears, with zero when it has no pairs.
pub fn fine_class_counts(level: &Level, adj: &Adjacency, m: u32) -> Result<FineClassCounts> {
    if m > level.n() {
        return Err(Error::SplitLevel { m, n: level.n() });
    }
    let mut classes = BTreeMap::new();
    for (rank, row) in adj.rows.iter().enumerate() {
        let key = level.decompose_rank(rank, m).fine_key();
        *classes.entry(key).or_insert(0) += row.len() as u64;
    }
    Ok(FineClassCounts { m, classes })
}

/// `M_θ(ξ)`: intersecting pairs whose first rectangle has fine part `xi`,
/// at the split level determined by `θ`.
pub fn m_theta(level: &Level, theta: f64, omega: Vec2, xi: (i64, i64)) -> Result<u64> {
    let m = split_level(level.a(), level.n(), theta);
    let adj = RotatedPair::new(level, theta, omega).adjacency(DEFAULT_PAIR_CAP)?;
    let counts = fine_class_counts(level, &adj, m)?;
    counts
        .classes
        .get(&xi)
        .copied()
        .ok_or_else(|| Error::Unrealizable(format!("{xi:?} at m = {m}")))
}

/// `L(a^{-t}, θ)` on `R_t` for each requested level `t`.
pub fn multiscale_counts(
    sys: &DigitSystem,
    n: u32,
    theta: f64,
    omega: Vec2,
    levels: &[u32],
    pair_cap: u64,
) -> Result<BTreeMap<u32, u64>> {
    let mut out = BTreeMap::new();
    for &t in levels {
        if t > n {
            return Err(Error::SplitLevel { m: t, n });
        }
        let level = Level::build(sys, t)?;
        let adj = RotatedPair::new(&level, theta, omega).adjacency(pair_cap)?;
        out.insert(t, adj.total());
    }
    Ok(out)
}
