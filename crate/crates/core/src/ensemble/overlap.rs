//! `leb(R_θ ∩ R_θ')` from a disjoint box decomposition of `R`.
//!
//! `R` is cut into interior-disjoint lattice boxes `B_p`, so
//! `leb(R ∩ τ R) = Σ_{p,q} leb(B_p ∩ τ B_q)` with every term a convex clip.

use rayon::prelude::*;
use serde::Serialize;

use super::EnsembleConfig;
use crate::cantor::{LatticeBox, Level};
use crate::error::{Error, Result};
use crate::geometry::{
    intersection_area, raster_intersection, rotate_box, rotate_family, RasterBracket, Vec2,
};
use crate::intersections::{pairwise_area_sum, GridIndex};

/// Float error allowance per clipped box pair, relative to the squared
/// diagonals involved.
const CLIP_REL_ERR: f64 = 1e-12;

/// Largest number of angle pairs evaluated one by one when the common
/// origin reduction is unavailable.
const DIRECT_PAIR_LIMIT: u64 = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Overlap {
    pub value: f64,
    /// Bound on the accumulated rounding error of `value`.
    pub err: f64,
}

impl Overlap {
    pub fn inner(&self) -> f64 {
        (self.value - self.err).max(0.0)
    }

    pub fn outer(&self) -> f64 {
        self.value + self.err
    }
}

/// The box decomposition of one level, ready to be moved around.
#[derive(Clone, Debug)]
pub struct BoxFamily {
    a_pow: i64,
    b_pow: i64,
    boxes: Vec<LatticeBox>,
    base: Vec<crate::geometry::OrientedRect>,
    cell: f64,
    exact_area: f64,
}

impl BoxFamily {
    pub fn new(level: &Level) -> Self {
        let boxes = level.disjoint_boxes();
        let (a_pow, b_pow) = (level.a_pow(), level.b_pow());
        let base: Vec<_> = boxes
            .iter()
            .map(|b| rotate_box(b, a_pow, b_pow, 0.0, 1.0, 0.0, Vec2::ZERO))
            .collect();
        let cell = base
            .iter()
            .map(|r| {
                let (w, h) = r.side_lengths();
                w.max(h)
            })
            .fold(0.0, f64::max);
        Self {
            a_pow,
            b_pow,
            boxes,
            base,
            cell,
            exact_area: level.union_area_exact(),
        }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// `leb(R)` from the lattice.
    pub fn area(&self) -> f64 {
        self.exact_area
    }

    /// `leb(R ∩ (e^{iφ}R + shift))`.
    pub fn overlap(&self, phi: f64, shift: Vec2) -> Overlap {
        if self.boxes.is_empty() {
            return Overlap {
                value: 0.0,
                err: 0.0,
            };
        }
        let (s, c) = if phi == 0.0 {
            (0.0, 1.0)
        } else {
            phi.sin_cos()
        };
        let moved: Vec<_> = self
            .boxes
            .iter()
            .map(|b| rotate_box(b, self.a_pow, self.b_pow, s, c, phi, shift))
            .collect();
        let index = GridIndex::build(&moved, self.cell);
        let parts: Vec<(f64, f64)> = self
            .base
            .par_iter()
            .map(|p| {
                let (lo, hi) = p.bbox();
                let mut v = 0.0;
                let mut e = 0.0;
                for q in index.query(lo, hi) {
                    let q = &moved[q as usize];
                    let area = intersection_area(p, q);
                    if area > 0.0 {
                        v += area;
                        e += CLIP_REL_ERR * (p.diagonal() + q.diagonal()).powi(2);
                    }
                }
                (v, e)
            })
            .collect();
        let (value, err) = parts
            .iter()
            .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
        Overlap { value, err }
    }

    /// `leb(τ_θ R ∩ τ_θ' R)`, pulled back by `τ_θ'`.
    pub fn overlap_between(&self, theta: f64, omega: Vec2, theta2: f64, omega2: Vec2) -> Overlap {
        let shift = (omega - omega2).rotate(-theta2);
        self.overlap(theta - theta2, shift)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ProfileOptions {
    /// Also compute the sum of pairwise rectangle overlaps.
    pub pair_sum: bool,
    /// Cross-check with a raster bracket at this cell size.
    pub raster_cell: Option<f64>,
    pub raster_cap: u64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            pair_sum: true,
            raster_cell: None,
            raster_cap: crate::geometry::DEFAULT_RASTER_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileEntry {
    pub k: u64,
    pub phi: f64,
    /// `leb(R_φ ∩ R)` from the box decomposition.
    pub overlap: Overlap,
    /// `Σ_{i,j} leb(T_i ∩ T_{j,φ})`, an upper bound.
    pub pair_sum_upper: Option<f64>,
    pub raster: Option<RasterBracket>,
}

/// `leb(R_{θ_k} ∩ R_0)` for every `θ_k = kδ` in the angle set, with the
/// translations of the configured policy. Under `ω ≡ 0` this is the
/// difference profile `φ ↦ leb(R_φ ∩ R)`.
pub fn pair_overlap_profile(
    cfg: &EnsembleConfig,
    opts: &ProfileOptions,
) -> Result<Vec<ProfileEntry>> {
    let level = Level::build(&cfg.sys, cfg.n)?;
    let family = BoxFamily::new(&level);
    let angles = cfg.angles();
    let rects = level.rects();
    let omega0 = cfg.policy.omega(0.0);
    let base = rotate_family(&rects, 0.0, omega0);
    angles
        .angles
        .iter()
        .enumerate()
        .map(|(k, &phi)| {
            let omega = cfg.policy.omega(phi);
            let overlap = family.overlap_between(phi, omega, 0.0, omega0);
            let rotated = rotate_family(&rects, phi, omega);
            let pair_sum_upper = if opts.pair_sum {
                Some(pairwise_area_sum(&base, &rotated)?)
            } else {
                None
            };
            let raster = match opts.raster_cell {
                Some(cell) => Some(raster_intersection(&base, &rotated, cell, opts.raster_cap)?),
                None => None,
            };
            Ok(ProfileEntry {
                k: k as u64,
                phi,
                overlap,
                pair_sum_upper,
                raster,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoubleSum {
    pub n: u32,
    pub delta: f64,
    pub angles: usize,
    /// `Σ_{θ,θ'} leb(R_θ ∩ R_θ')`, inner and outer.
    pub total: [f64; 2],
    /// `|A| · leb(R)`.
    pub diagonal: f64,
    /// `Σ_{θ ∈ A, θ ≥ δ} leb(R_θ ∩ R)`, inner and outer.
    pub fixed: [f64; 2],
    pub method: &'static str,
}

/// The double sum over the angle set. With `ω ≡ 0` it is assembled from
/// the difference profile with multiplicities; otherwise every ordered
/// angle pair is evaluated.
pub fn double_sum(cfg: &EnsembleConfig) -> Result<DoubleSum> {
    let level = Level::build(&cfg.sys, cfg.n)?;
    let family = BoxFamily::new(&level);
    let angles = cfg.angles();
    let na = angles.len();
    let diagonal = na as f64 * family.area();

    if cfg.policy.is_zero() {
        let profile: Vec<Overlap> = angles
            .angles
            .iter()
            .skip(1)
            .map(|&phi| family.overlap(phi, Vec2::ZERO))
            .collect();
        let mut total = [diagonal, diagonal];
        let mut fixed = [0.0, 0.0];
        for (d, o) in profile.iter().enumerate() {
            let mult = 2.0 * (na - 1 - d) as f64;
            total[0] += mult * o.inner();
            total[1] += mult * o.outer();
            fixed[0] += o.inner();
            fixed[1] += o.outer();
        }
        return Ok(DoubleSum {
            n: cfg.n,
            delta: angles.delta,
            angles: na,
            total,
            diagonal,
            fixed,
            method: "profile",
        });
    }

    let pairs = na as u64 * na as u64;
    if pairs > DIRECT_PAIR_LIMIT {
        return Err(Error::PairBudget {
            requested: pairs as u128,
            cap: DIRECT_PAIR_LIMIT,
        });
    }
    let omegas: Vec<Vec2> = angles.angles.iter().map(|&t| cfg.policy.omega(t)).collect();
    let mut total = [diagonal, diagonal];
    let mut fixed = [0.0, 0.0];
    for (x, &t) in angles.angles.iter().enumerate() {
        for (y, &t2) in angles.angles.iter().enumerate() {
            if x == y {
                continue;
            }
            let o = family.overlap_between(t, omegas[x], t2, omegas[y]);
            total[0] += o.inner();
            total[1] += o.outer();
            if y == 0 {
                fixed[0] += o.inner();
                fixed[1] += o.outer();
            }
        }
    }
    Ok(DoubleSum {
        n: cfg.n,
        delta: angles.delta,
        angles: na,
        total,
        diagonal,
        fixed,
        method: "direct",
    })
}
