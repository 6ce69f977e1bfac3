//! Level-`n` approximants: Cantor intervals, graph anchors, and the enlarged
//! rectangle family `R_n`, all on the exact lattice `(1/a^n, 1/b^n)`.

use serde::Serialize;

use super::digits::DigitSystem;
use crate::error::{Error, Result};

/// Default refusal threshold for `b^n`.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 20;

/// A closed interval `[num/den, (num+1)/den]` of a Cantor generation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LatticeInterval {
    pub num: i64,
    pub den: i64,
}

impl LatticeInterval {
    pub fn lo(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn hi(&self) -> f64 {
        (self.num + 1) as f64 / self.den as f64
    }
}

/// A point `(x/a^n, y/b^n)` of the level-`n` lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LatticePoint {
    pub x: i64,
    pub y: i64,
    pub a_pow: i64,
    pub b_pow: i64,
}

impl LatticePoint {
    pub fn to_f64(&self) -> (f64, f64) {
        (
            self.x as f64 / self.a_pow as f64,
            self.y as f64 / self.b_pow as f64,
        )
    }
}

/// Axis-aligned lattice rectangle
/// `[px/a^n, (px+w)/a^n] × [py/b^n, (py+h)/b^n]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GridRect {
    pub n: u32,
    /// Vertical rank, 1-based.
    pub i: u64,
    pub px: i64,
    pub py: i64,
    pub width_units: i64,
    pub height_units: i64,
    pub a_pow: i64,
    pub b_pow: i64,
}

impl GridRect {
    pub fn x_min(&self) -> f64 {
        self.px as f64 / self.a_pow as f64
    }

    pub fn x_max(&self) -> f64 {
        (self.px + self.width_units) as f64 / self.a_pow as f64
    }

    pub fn y_min(&self) -> f64 {
        self.py as f64 / self.b_pow as f64
    }

    pub fn y_max(&self) -> f64 {
        (self.py + self.height_units) as f64 / self.b_pow as f64
    }

    pub fn width(&self) -> f64 {
        self.width_units as f64 / self.a_pow as f64
    }

    pub fn height(&self) -> f64 {
        self.height_units as f64 / self.b_pow as f64
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Exact closed containment `other ⊆ self`, across levels.
    ///
    /// Both rectangles must come from the same digit system, so one
    /// lattice refines the other.
    pub fn contains(&self, other: &GridRect) -> bool {
        let den_x = self.a_pow.max(other.a_pow);
        let den_y = self.b_pow.max(other.b_pow);
        let (sx, ox) = (den_x / self.a_pow, den_x / other.a_pow);
        let (sy, oy) = (den_y / self.b_pow, den_y / other.b_pow);
        other.px * ox >= self.px * sx
            && (other.px + other.width_units) * ox <= (self.px + self.width_units) * sx
            && other.py * oy >= self.py * sy
            && (other.py + other.height_units) * oy <= (self.py + self.height_units) * sy
    }
}

/// A lattice box in the disjoint cover of `R_n`, numerators over
/// `a^n` (x) and `b^n` (y).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatticeBox {
    pub x0: i64,
    pub x1: i64,
    pub y0: i64,
    pub y1: i64,
}

/// Split of a rectangle corner into coarse and fine parts at level `m`.
///
/// `x = x_lar + x_sma` with `x_lar = (lar_x/a^m, lar_y/b^m)` and
/// `x_sma = (sma_x/a^n, sma_y/b^n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Decomposition {
    pub m: u32,
    pub n: u32,
    pub lar_x: i64,
    pub lar_y: i64,
    pub sma_x: i64,
    pub sma_y: i64,
    pub a_pow_m: i64,
    pub b_pow_m: i64,
    pub a_pow_n: i64,
    pub b_pow_n: i64,
}

impl Decomposition {
    /// Recombined corner numerators over `(a^n, b^n)`.
    pub fn recompose(&self) -> (i64, i64) {
        (
            self.lar_x * (self.a_pow_n / self.a_pow_m) + self.sma_x,
            self.lar_y * (self.b_pow_n / self.b_pow_m) + self.sma_y,
        )
    }

    /// Fine part as a hashable key.
    pub fn fine_key(&self) -> (i64, i64) {
        (self.sma_x, self.sma_y)
    }
}

/// The level-`n` approximation of one digit system.
///
/// Anchors are stored by vertical rank: the anchor of rank `r` has
/// y-numerator `r` and x-numerator `px_by_rank[r]`. Rank `r` is rectangle
/// index `i = r + 1`.
#[derive(Clone, Debug)]
pub struct Level {
    n: u32,
    a: u32,
    b: u32,
    a_pow: i64,
    b_pow: i64,
    px_by_rank: Vec<i64>,
}

fn checked_pow(base: u32, level: u32) -> Result<i64> {
    (base as i64)
        .checked_pow(level)
        // room for the +2 / ×3 offsets of the enlarged rectangles
        .filter(|p| *p < i64::MAX / 8)
        .ok_or(Error::LatticeOverflow { base, level })
}

impl Level {
    pub fn build(sys: &DigitSystem, n: u32) -> Result<Self> {
        Self::build_capped(sys, n, DEFAULT_ENUMERATION_CAP)
    }

    pub fn build_capped(sys: &DigitSystem, n: u32, cap: u64) -> Result<Self> {
        let (a, b) = (sys.a(), sys.b());
        let requested = (b as u128).checked_pow(n).unwrap_or(u128::MAX);
        if requested > cap as u128 {
            return Err(Error::EnumerationCap {
                level: n,
                requested,
                cap,
            });
        }
        let a_pow = checked_pow(a, n)?;
        let b_pow = checked_pow(b, n)?;

        // (px, py) numerators of the anchors at the current depth
        let mut nodes: Vec<(i64, i64)> = vec![(0, 0)];
        for depth in 0..n {
            let mut next = Vec::with_capacity(nodes.len() * b as usize);
            for &(px, py) in &nodes {
                let branch = sys.branch(depth, px as u128);
                for (&d, &r) in branch.digits.iter().zip(&branch.ranks) {
                    next.push((px * a as i64 + d as i64, py * b as i64 + r as i64));
                }
            }
            nodes = next;
        }
        let mut px_by_rank = vec![0i64; nodes.len()];
        for (px, py) in nodes {
            px_by_rank[py as usize] = px;
        }
        Ok(Self {
            n,
            a,
            b,
            a_pow,
            b_pow,
            px_by_rank,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn a(&self) -> u32 {
        self.a
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn a_pow(&self) -> i64 {
        self.a_pow
    }

    pub fn b_pow(&self) -> i64 {
        self.b_pow
    }

    pub fn s(&self) -> f64 {
        (self.b as f64).ln() / (self.a as f64).ln()
    }

    /// `δ = a^{-n}`.
    pub fn delta(&self) -> f64 {
        1.0 / self.a_pow as f64
    }

    /// `δ^s = b^{-n}`.
    pub fn delta_s(&self) -> f64 {
        1.0 / self.b_pow as f64
    }

    pub fn len(&self) -> usize {
        self.px_by_rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.px_by_rank.is_empty()
    }

    /// Anchor x-numerators indexed by vertical rank.
    pub fn anchor_x_by_rank(&self) -> &[i64] {
        &self.px_by_rank
    }

    /// Intervals of `C_n`, sorted left to right.
    pub fn intervals(&self) -> Vec<LatticeInterval> {
        let mut xs = self.px_by_rank.clone();
        xs.sort_unstable();
        xs.into_iter()
            .map(|num| LatticeInterval {
                num,
                den: self.a_pow,
            })
            .collect()
    }

    /// Anchor points of the graph at level `n`, sorted by x.
    pub fn anchors(&self) -> Vec<LatticePoint> {
        let mut pts: Vec<LatticePoint> = self
            .px_by_rank
            .iter()
            .enumerate()
            .map(|(r, &x)| LatticePoint {
                x,
                y: r as i64,
                a_pow: self.a_pow,
                b_pow: self.b_pow,
            })
            .collect();
        pts.sort_unstable_by_key(|p| (p.x, p.y));
        pts
    }

    /// Enlarged rectangle `T_i` (1-based vertical index).
    pub fn rect(&self, i: u64) -> Result<GridRect> {
        let count = self.len() as u64;
        if i == 0 || i > count {
            return Err(Error::IndexRange { index: i, count });
        }
        Ok(self.rect_by_rank(i as usize - 1))
    }

    pub(crate) fn rect_by_rank(&self, rank: usize) -> GridRect {
        GridRect {
            n: self.n,
            i: rank as u64 + 1,
            px: self.px_by_rank[rank] - 1,
            py: rank as i64 - 1,
            width_units: 3,
            height_units: 3,
            a_pow: self.a_pow,
            b_pow: self.b_pow,
        }
    }

    /// The rectangle family `R_n`, ordered by index.
    pub fn rects(&self) -> Vec<GridRect> {
        (0..self.len()).map(|r| self.rect_by_rank(r)).collect()
    }

    /// Unenlarged core cell of rank `r`.
    pub fn core(&self, rank: usize) -> GridRect {
        GridRect {
            n: self.n,
            i: rank as u64 + 1,
            px: self.px_by_rank[rank],
            py: rank as i64,
            width_units: 1,
            height_units: 1,
            a_pow: self.a_pow,
            b_pow: self.b_pow,
        }
    }

    /// Coarse/fine split of the bottom-left corner of `T_i` at level `m`.
    pub fn decompose(&self, i: u64, m: u32) -> Result<Decomposition> {
        if m > self.n {
            return Err(Error::SplitLevel { m, n: self.n });
        }
        let rect = self.rect(i)?;
        Ok(self.decompose_rank(rect.i as usize - 1, m))
    }

    pub(crate) fn decompose_rank(&self, rank: usize, m: u32) -> Decomposition {
        let ax = (self.a as i64).pow(self.n - m);
        let by = (self.b as i64).pow(self.n - m);
        let px = self.px_by_rank[rank];
        let py = rank as i64;
        Decomposition {
            m,
            n: self.n,
            lar_x: px.div_euclid(ax),
            lar_y: py.div_euclid(by),
            sma_x: px.rem_euclid(ax) - 1,
            sma_y: py.rem_euclid(by) - 1,
            a_pow_m: (self.a as i64).pow(m),
            b_pow_m: (self.b as i64).pow(m),
            a_pow_n: self.a_pow,
            b_pow_n: self.b_pow,
        }
    }

    /// Index of the level-`m` rectangle whose word is the length-`m`
    /// prefix of `T_i`'s word.
    pub fn parent_index(&self, i: u64, m: u32) -> Result<u64> {
        if m > self.n {
            return Err(Error::SplitLevel { m, n: self.n });
        }
        self.rect(i)?;
        let by = (self.b as u64).pow(self.n - m);
        Ok((i - 1) / by + 1)
    }

    /// Level-`n` indices whose parent at level `m` is `parent`.
    pub fn children(&self, parent: u64, m: u32) -> Result<std::ops::RangeInclusive<u64>> {
        if m > self.n {
            return Err(Error::SplitLevel { m, n: self.n });
        }
        let count = (self.b as u64).pow(m);
        if parent == 0 || parent > count {
            return Err(Error::IndexRange {
                index: parent,
                count,
            });
        }
        let by = (self.b as u64).pow(self.n - m);
        Ok((parent - 1) * by + 1..=parent * by)
    }

    /// Disjoint lattice boxes whose union is `R_n`.
    ///
    /// Row `k` is the strip `[k/b^n, (k+1)/b^n]`; it is covered by the
    /// rectangles of rank `k-1, k, k+1`. Identical runs in consecutive rows
    /// are merged into one taller box.
    pub fn disjoint_boxes(&self) -> Vec<LatticeBox> {
        let count = self.len() as i64;
        let mut done = Vec::new();
        let mut open: Vec<LatticeBox> = Vec::new();
        for k in -1..=count {
            let mut spans: Vec<(i64, i64)> = (k - 1..=k + 1)
                .filter(|r| (0..count).contains(r))
                .map(|r| {
                    let x = self.px_by_rank[r as usize];
                    (x - 1, x + 2)
                })
                .collect();
            spans.sort_unstable();
            let mut merged: Vec<(i64, i64)> = Vec::with_capacity(3);
            for (lo, hi) in spans {
                match merged.last_mut() {
                    Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                    _ => merged.push((lo, hi)),
                }
            }
            let mut next_open = Vec::with_capacity(merged.len());
            for (lo, hi) in merged {
                if let Some(pos) = open.iter().position(|b| b.x0 == lo && b.x1 == hi) {
                    let mut b = open.swap_remove(pos);
                    b.y1 = k + 1;
                    next_open.push(b);
                } else {
                    next_open.push(LatticeBox {
                        x0: lo,
                        x1: hi,
                        y0: k,
                        y1: k + 1,
                    });
                }
            }
            done.append(&mut open);
            open = next_open;
        }
        done.append(&mut open);
        done.sort_unstable_by_key(|b| (b.y0, b.x0));
        done
    }

    /// Exact area of `R_n` as a rational `num / (a^n b^n)`.
    pub fn union_area_exact(&self) -> f64 {
        let num: i128 = self
            .disjoint_boxes()
            .iter()
            .map(|b| (b.x1 - b.x0) as i128 * (b.y1 - b.y0) as i128)
            .sum();
        num as f64 / (self.a_pow as f64 * self.b_pow as f64)
    }
}

/// The unique `ℓ` with `x ∈ (a^{-(ℓ+1)}, a^{-ℓ}]`, for `x > 0`.
///
/// Boundary values `x = a^{-ℓ}` resolve to `ℓ`, with powers compared in
/// the same floating-point form they are produced in elsewhere.
pub fn scale_index(a: u32, x: f64) -> i64 {
    assert!(
        x > 0.0 && x.is_finite(),
        "scale_index needs a positive finite value, got {x}"
    );
    let af = a as f64;
    let pow_inv = |l: i64| -> f64 {
        if l >= 0 {
            1.0 / af.powi(l as i32)
        } else {
            af.powi((-l) as i32)
        }
    };
    let mut l = (-x.ln() / af.ln()).floor() as i64;
    while pow_inv(l) < x {
        l -= 1;
    }
    while pow_inv(l + 1) >= x {
        l += 1;
    }
    l
}

/// Points of the graph itself (not lattice approximants): each level-`depth`
/// cell is extended along its minimal-digit path until the tail drops
/// below double precision. Returned in rank order.
pub fn graph_points(sys: &DigitSystem, depth: u32) -> Result<Vec<(f64, f64)>> {
    let level = Level::build(sys, depth)?;
    let (a, b) = (sys.a() as f64, sys.b() as f64);
    let mut out = Vec::with_capacity(level.len());
    for (rank, &px) in level.anchor_x_by_rank().iter().enumerate() {
        let mut x = px as f64 / level.a_pow() as f64;
        let mut y = rank as f64 / level.b_pow() as f64;
        let mut prefix = px as u128;
        let mut sx = 1.0 / level.a_pow() as f64;
        let mut sy = 1.0 / level.b_pow() as f64;
        let mut d = depth;
        while sy > 1e-18 {
            let branch = sys.branch(d, prefix);
            let digit = branch.digits[0];
            sx /= a;
            sy /= b;
            x += digit as f64 * sx;
            y += branch.ranks[0] as f64 * sy;
            match prefix
                .checked_mul(sys.a() as u128)
                .and_then(|p| p.checked_add(digit as u128))
            {
                Some(p) => prefix = p,
                None => break,
            }
            d += 1;
        }
        out.push((x, y));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stair() -> DigitSystem {
        DigitSystem::standard_staircase(3, 2).unwrap()
    }

    #[test]
    fn level_zero_is_unit_interval() {
        for sys in [stair(), DigitSystem::seeded(5, 3, 7).unwrap()] {
            let lv = Level::build(&sys, 0).unwrap();
            assert_eq!(lv.intervals(), vec![LatticeInterval { num: 0, den: 1 }]);
        }
    }

    #[test]
    fn middle_thirds_level_one() {
        let lv = Level::build(&stair(), 1).unwrap();
        let iv = lv.intervals();
        assert_eq!(iv.len(), 2);
        assert_eq!((iv[0].num, iv[0].den), (0, 3));
        assert_eq!((iv[1].num, iv[1].den), (2, 3));
    }

    #[test]
    fn anchors_level_one() {
        let lv = Level::build(&stair(), 1).unwrap();
        let pts: Vec<_> = lv.anchors().iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(pts, vec![(0, 0), (2, 1)]);

        let swapped = DigitSystem::self_similar(3, 2, vec![0, 2], vec![1, 0]).unwrap();
        let lv = Level::build(&swapped, 1).unwrap();
        let pts: Vec<_> = lv.anchors().iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(pts, vec![(0, 1), (2, 0)]);
    }

    #[test]
    fn rect_approx_level_one() {
        let lv = Level::build(&stair(), 1).unwrap();
        let r = lv.rects();
        assert_eq!(r.len(), 2);
        // T1 = [-1/3, 2/3] x [-1/2, 1], T2 = [1/3, 4/3] x [0, 3/2]
        assert_eq!((r[0].px, r[0].py, r[0].a_pow, r[0].b_pow), (-1, -1, 3, 2));
        assert_eq!((r[1].px, r[1].py), (1, 0));
        assert_eq!(r[1].x_max(), 4.0 / 3.0);
        assert_eq!(r[1].y_max(), 1.5);
    }

    #[test]
    fn rect_bottoms_level_two() {
        let lv = Level::build(&stair(), 2).unwrap();
        let bottoms: Vec<i64> = lv.rects().iter().map(|r| r.py).collect();
        // (i-2)/4 for i = 1..4
        assert_eq!(bottoms, vec![-1, 0, 1, 2]);
    }

    #[test]
    fn enumeration_cap() {
        let err = Level::build_capped(&stair(), 11, 1024).unwrap_err();
        assert!(matches!(err, Error::EnumerationCap { cap: 1024, .. }));
        assert!(err.to_string().contains("1024"));
    }

    #[test]
    fn lattice_overflow_is_reported() {
        let sys = DigitSystem::standard_staircase(200, 2).unwrap();
        assert!(matches!(
            Level::build(&sys, 9),
            Err(Error::LatticeOverflow { .. })
        ));
    }

    #[test]
    fn decomposition_examples() {
        let lv = Level::build(&stair(), 2).unwrap();
        // anchor 2/3 + 2/9 has rank 3, index 4
        let d = lv.decompose(4, 1).unwrap();
        assert_eq!((d.lar_x, d.a_pow_m, d.lar_y, d.b_pow_m), (2, 3, 1, 2));
        assert_eq!((d.sma_x, d.a_pow_n), (1, 9));

        let d0 = lv.decompose(4, 0).unwrap();
        assert_eq!((d0.lar_x, d0.lar_y), (0, 0));
        let corner = lv.rect(4).unwrap();
        assert_eq!((d0.sma_x, d0.sma_y), (corner.px, corner.py));

        let dn = lv.decompose(4, 2).unwrap();
        assert_eq!((dn.sma_x, dn.sma_y), (-1, -1));
        assert!(lv.decompose(4, 3).is_err());
    }

    #[test]
    fn parent_and_children() {
        let lv = Level::build(&stair(), 2).unwrap();
        assert_eq!(lv.parent_index(1, 1).unwrap(), 1);
        assert_eq!(lv.parent_index(2, 1).unwrap(), 1);
        assert_eq!(lv.parent_index(3, 1).unwrap(), 2);
        assert_eq!(lv.parent_index(3, 2).unwrap(), 3);
        assert_eq!(lv.children(1, 1).unwrap(), 1..=2);
        assert!(lv.parent_index(5, 1).is_err());
        assert!(lv.children(3, 1).is_err());
    }

    #[test]
    fn contains_across_levels() {
        let sys = stair();
        let coarse = Level::build(&sys, 1).unwrap();
        let fine = Level::build(&sys, 2).unwrap();
        let p = coarse.rect(1).unwrap();
        assert!(p.contains(&fine.rect(1).unwrap()));
        assert!(p.contains(&fine.rect(2).unwrap()));
        assert!(!p.contains(&fine.rect(4).unwrap()));
        assert!(!fine.rect(1).unwrap().contains(&p));
    }

    #[test]
    fn disjoint_boxes_level_one() {
        // R_1 = T1 ∪ T2, inclusion-exclusion gives 8/3
        let lv = Level::build(&stair(), 1).unwrap();
        assert!((lv.union_area_exact() - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn scale_index_half_open() {
        assert_eq!(scale_index(3, 1.0), 0);
        assert_eq!(scale_index(3, 1.0 / 3.0), 1);
        assert_eq!(scale_index(3, 1.0 / 27.0), 3);
        assert_eq!(scale_index(3, 0.34), 0);
        assert_eq!(scale_index(3, 0.2), 1);
        assert_eq!(scale_index(3, 0.026), 3);
        assert_eq!(scale_index(3, 2.0), -1);
        assert_eq!(scale_index(4, 1.0 / 64.0), 3);
    }

    #[test]
    fn graph_points_lie_in_cores() {
        let sys = DigitSystem::seeded(5, 2, 3).unwrap();
        let lv = Level::build(&sys, 4).unwrap();
        let pts = graph_points(&sys, 4).unwrap();
        for (r, &(x, y)) in pts.iter().enumerate() {
            let c = lv.core(r);
            assert!(x >= c.x_min() && x <= c.x_max());
            assert!(y >= c.y_min() && y <= c.y_max());
        }
    }
}
