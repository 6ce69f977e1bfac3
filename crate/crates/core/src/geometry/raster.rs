//! Certified raster brackets for the measure of a union of planar shapes.
//!
//! The plane is cut into square cells anchored at the origin. A cell that
//! lies entirely inside one shape contributes to the inner bound; a cell
//! that meets any shape contributes to the outer bound. Cells whose centre
//! lies in the union give a point estimate between the two.

use rayon::prelude::*;
use serde::Serialize;

use super::{ConvexPolygon, OrientedRect, Vec2, EPS_GEOM};
use crate::error::{Error, Result};

pub const DEFAULT_RASTER_CAP: u64 = 1 << 26;

const ROWS_PER_BAND: usize = 64;
const TOUCHED: u8 = 1;
const CENTER: u8 = 2;
const INSIDE: u8 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RasterBracket {
    pub inner: f64,
    pub center: f64,
    pub outer: f64,
    pub cell: f64,
    pub cells: u64,
}

impl RasterBracket {
    pub fn contains(&self, value: f64) -> bool {
        self.inner <= value && value <= self.outer
    }

    pub fn width(&self) -> f64 {
        self.outer - self.inner
    }

    pub fn empty(cell: f64) -> Self {
        Self {
            inner: 0.0,
            center: 0.0,
            outer: 0.0,
            cell,
            cells: 0,
        }
    }
}

/// A closed planar shape that can be rasterized.
pub trait Coverable: Sync {
    fn bbox(&self) -> (Vec2, Vec2);
    /// Whether the closed shape meets the cell; false positives allowed.
    fn touches_cell(&self, lo: Vec2, hi: Vec2) -> bool;
    /// Whether the cell lies inside the shape; false negatives allowed.
    fn contains_cell(&self, lo: Vec2, hi: Vec2) -> bool;
    fn contains_point(&self, p: Vec2) -> bool;
}

impl Coverable for ConvexPolygon {
    fn bbox(&self) -> (Vec2, Vec2) {
        ConvexPolygon::bbox(self)
    }

    fn touches_cell(&self, lo: Vec2, hi: Vec2) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let (plo, phi) = self.bbox();
        let tol = EPS_GEOM * (phi - plo).norm().max(hi.x - lo.x) + f64::EPSILON;
        if plo.x > hi.x + tol || phi.x < lo.x - tol || plo.y > hi.y + tol || phi.y < lo.y - tol {
            return false;
        }
        let cell = [lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)];
        (0..n).all(|k| {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            let d = b - a;
            let len = d.norm();
            // the edge normal separates the cell when every corner lies right of it
            cell.iter().any(|&c| d.cross(c - a) >= -tol * len)
        })
    }

    fn contains_cell(&self, lo: Vec2, hi: Vec2) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let tol = EPS_GEOM * (hi.x - lo.x);
        let cell = [lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)];
        (0..n).all(|k| {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            let d = b - a;
            let len = d.norm();
            cell.iter().all(|&c| d.cross(c - a) >= tol * len)
        })
    }

    fn contains_point(&self, p: Vec2) -> bool {
        ConvexPolygon::contains_point(self, p)
    }
}

impl Coverable for OrientedRect {
    fn bbox(&self) -> (Vec2, Vec2) {
        OrientedRect::bbox(self)
    }

    fn touches_cell(&self, lo: Vec2, hi: Vec2) -> bool {
        self.polygon().touches_cell(lo, hi)
    }

    fn contains_cell(&self, lo: Vec2, hi: Vec2) -> bool {
        self.polygon().contains_cell(lo, hi)
    }

    fn contains_point(&self, p: Vec2) -> bool {
        self.polygon().contains_point(p)
    }
}

/// Closed disc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
}

impl Coverable for Disc {
    fn bbox(&self) -> (Vec2, Vec2) {
        let r = Vec2::new(self.radius, self.radius);
        (self.center - r, self.center + r)
    }

    fn touches_cell(&self, lo: Vec2, hi: Vec2) -> bool {
        let nearest = Vec2::new(
            self.center.x.clamp(lo.x, hi.x),
            self.center.y.clamp(lo.y, hi.y),
        );
        (nearest - self.center).norm() <= self.radius * (1.0 + EPS_GEOM)
    }

    fn contains_cell(&self, lo: Vec2, hi: Vec2) -> bool {
        let fx = (self.center.x - lo.x)
            .abs()
            .max((self.center.x - hi.x).abs());
        let fy = (self.center.y - lo.y)
            .abs()
            .max((self.center.y - hi.y).abs());
        fx.hypot(fy) <= self.radius * (1.0 - EPS_GEOM)
    }

    fn contains_point(&self, p: Vec2) -> bool {
        (p - self.center).norm() <= self.radius
    }
}

#[derive(Clone, Copy, Debug)]
struct Grid {
    cell: f64,
    ix0: i64,
    iy0: i64,
    nx: usize,
    ny: usize,
}

impl Grid {
    fn covering(lo: Vec2, hi: Vec2, cell: f64, cap: u64) -> Result<Self> {
        if !(lo.x.is_finite() && lo.y.is_finite() && hi.x.is_finite() && hi.y.is_finite()) {
            return Err(Error::Degenerate("unbounded raster domain".into()));
        }
        let ix0 = (lo.x / cell).floor() as i64 - 1;
        let iy0 = (lo.y / cell).floor() as i64 - 1;
        let ix1 = (hi.x / cell).ceil() as i64 + 1;
        let iy1 = (hi.y / cell).ceil() as i64 + 1;
        let nx = (ix1 - ix0) as usize;
        let ny = (iy1 - iy0) as usize;
        let requested = nx as u128 * ny as u128;
        if requested > cap as u128 {
            return Err(Error::RasterCap { requested, cap });
        }
        Ok(Self {
            cell,
            ix0,
            iy0,
            nx,
            ny,
        })
    }

    fn cells(&self) -> u64 {
        (self.nx * self.ny) as u64
    }

    /// Cell flags for one family, painted band by band.
    fn paint<S: Coverable>(&self, shapes: &[S]) -> Vec<u8> {
        let Grid {
            cell,
            ix0,
            iy0,
            nx,
            ny,
        } = *self;
        let n_bands = ny.div_ceil(ROWS_PER_BAND);
        let mut band_shapes: Vec<Vec<usize>> = vec![Vec::new(); n_bands];
        for (k, s) in shapes.iter().enumerate() {
            let (a, b) = s.bbox();
            let r0 = (a.y / cell).floor() as i64 - 1 - iy0;
            let r1 = (b.y / cell).ceil() as i64 + 1 - iy0;
            if r1 < 0 || r0 >= ny as i64 {
                continue;
            }
            let (r0, r1) = (r0.max(0) as usize, (r1 as usize).min(ny - 1));
            for band in r0 / ROWS_PER_BAND..=r1 / ROWS_PER_BAND {
                band_shapes[band].push(k);
            }
        }

        let mut flags = vec![0u8; nx * ny];
        flags
            .par_chunks_mut(nx * ROWS_PER_BAND)
            .enumerate()
            .for_each(|(band, rows)| {
                let row0 = band * ROWS_PER_BAND;
                let band_rows = rows.len() / nx;
                for &k in &band_shapes[band] {
                    let s = &shapes[k];
                    let (a, b) = s.bbox();
                    let cx0 = (a.x / cell).floor() as i64 - 1 - ix0;
                    let cx1 = (b.x / cell).ceil() as i64 + 1 - ix0;
                    let cy0 = ((a.y / cell).floor() as i64 - 1 - iy0).max(row0 as i64);
                    let cy1 =
                        ((b.y / cell).ceil() as i64 + 1 - iy0).min((row0 + band_rows - 1) as i64);
                    if cx1 < 0 || cx0 >= nx as i64 || cy1 < cy0 {
                        continue;
                    }
                    let (cx0, cx1) = (cx0.max(0) as usize, (cx1 as usize).min(nx - 1));
                    for gy in cy0 as usize..=cy1 as usize {
                        let y = (iy0 + gy as i64) as f64 * cell;
                        for gx in cx0..=cx1 {
                            let f = &mut rows[(gy - row0) * nx + gx];
                            if *f & INSIDE != 0 {
                                continue;
                            }
                            let x = (ix0 + gx as i64) as f64 * cell;
                            let clo = Vec2::new(x, y);
                            let chi = Vec2::new(x + cell, y + cell);
                            if !s.touches_cell(clo, chi) {
                                continue;
                            }
                            *f |= TOUCHED;
                            if s.contains_point(Vec2::new(x + 0.5 * cell, y + 0.5 * cell)) {
                                *f |= CENTER;
                            }
                            if s.contains_cell(clo, chi) {
                                *f |= INSIDE | CENTER;
                            }
                        }
                    }
                }
            });
        flags
    }

    fn bracket(&self, flags: impl Iterator<Item = u8>) -> RasterBracket {
        let mut c = [0u64; 3];
        for f in flags {
            c[0] += (f & INSIDE != 0) as u64;
            c[1] += (f & CENTER != 0) as u64;
            c[2] += (f & TOUCHED != 0) as u64;
        }
        let a = self.cell * self.cell;
        RasterBracket {
            inner: c[0] as f64 * a,
            center: c[1] as f64 * a,
            outer: c[2] as f64 * a,
            cell: self.cell,
            cells: self.cells(),
        }
    }
}

fn family_bbox<S: Coverable>(shapes: &[S]) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for s in shapes {
        let (a, b) = s.bbox();
        lo = Vec2::new(lo.x.min(a.x), lo.y.min(a.y));
        hi = Vec2::new(hi.x.max(b.x), hi.y.max(b.y));
    }
    (lo, hi)
}

fn check_cell(cell: f64) -> Result<()> {
    if cell > 0.0 && cell.is_finite() {
        Ok(())
    } else {
        Err(Error::Degenerate(format!(
            "raster cell {cell} must be positive"
        )))
    }
}

/// Raster bracket of the union of `shapes` at cell size `cell`.
///
/// Work is split into bands of rows; every band owns its rows of the
/// bitmap, so the result does not depend on scheduling.
pub fn raster_union<S: Coverable>(shapes: &[S], cell: f64, cap: u64) -> Result<RasterBracket> {
    check_cell(cell)?;
    if shapes.is_empty() {
        return Ok(RasterBracket::empty(cell));
    }
    let (lo, hi) = family_bbox(shapes);
    let grid = Grid::covering(lo, hi, cell, cap)?;
    let flags = grid.paint(shapes);
    Ok(grid.bracket(flags.into_iter()))
}

/// Raster bracket of `(∪ a) ∩ (∪ b)`.
///
/// A cell counts as inner when it lies inside a shape of each family, and
/// as outer when it meets a shape of each family.
pub fn raster_intersection<S: Coverable, T: Coverable>(
    a: &[S],
    b: &[T],
    cell: f64,
    cap: u64,
) -> Result<RasterBracket> {
    check_cell(cell)?;
    if a.is_empty() || b.is_empty() {
        return Ok(RasterBracket::empty(cell));
    }
    let (alo, ahi) = family_bbox(a);
    let (blo, bhi) = family_bbox(b);
    let lo = Vec2::new(alo.x.max(blo.x), alo.y.max(blo.y));
    let hi = Vec2::new(ahi.x.min(bhi.x), ahi.y.min(bhi.y));
    if lo.x > hi.x || lo.y > hi.y {
        return Ok(RasterBracket::empty(cell));
    }
    let grid = Grid::covering(lo, hi, cell, cap)?;
    let fa = grid.paint(a);
    let fb = grid.paint(b);
    Ok(grid.bracket(fa.into_iter().zip(fb).map(|(x, y)| x & y)))
}

/// Raster bracket of a union of oriented rectangles, default cell cap.
pub fn union_area_raster(rects: &[OrientedRect], cell: f64) -> Result<RasterBracket> {
    union_area_raster_capped(rects, cell, DEFAULT_RASTER_CAP)
}

pub fn union_area_raster_capped(
    rects: &[OrientedRect],
    cell: f64,
    cap: u64,
) -> Result<RasterBracket> {
    let polys: Vec<ConvexPolygon> = rects.iter().map(|r| r.polygon()).collect();
    raster_union(&polys, cell, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::{DigitSystem, Level};
    use crate::geometry::rotate_family;

    #[test]
    fn unit_square() {
        let sq = OrientedRect::axis_aligned(0.0, 0.0, 1.0, 1.0);
        let br = union_area_raster(&[sq], 1.0 / 64.0).unwrap();
        assert!(br.contains(1.0));
        assert!((br.center - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_disjoint_squares() {
        let a = OrientedRect::axis_aligned(0.0, 0.0, 1.0, 1.0);
        let b = OrientedRect::axis_aligned(3.0, 0.5, 4.0, 1.5);
        let br = union_area_raster(&[a, b], 1.0 / 64.0).unwrap();
        assert!(br.contains(2.0));
    }

    #[test]
    fn staircase_level_one_union() {
        let lv = Level::build(&DigitSystem::standard_staircase(3, 2).unwrap(), 1).unwrap();
        let fam = rotate_family(&lv.rects(), 0.0, Vec2::ZERO);
        let br = union_area_raster(&fam, 1.0 / 128.0).unwrap();
        assert!(br.contains(8.0 / 3.0), "{br:?}");
    }

    #[test]
    fn rotated_square_bracket() {
        let (s, c) = 0.3f64.sin_cos();
        let r = OrientedRect::transformed(0.0, 0.0, 1.0, 2.0, s, c, 0.3, Vec2::new(0.1, 0.2));
        let br = union_area_raster(&[r], 1.0 / 200.0).unwrap();
        assert!(br.contains(2.0), "{br:?}");
        assert!(br.width() < 0.1);
    }

    #[test]
    fn disc_bracket() {
        let d = Disc {
            center: Vec2::new(0.3, -0.2),
            radius: 0.5,
        };
        let br = raster_union(&[d], 1.0 / 256.0, DEFAULT_RASTER_CAP).unwrap();
        assert!(br.contains(std::f64::consts::PI * 0.25), "{br:?}");
    }

    #[test]
    fn cap_is_enforced() {
        let sq = OrientedRect::axis_aligned(0.0, 0.0, 1.0, 1.0);
        assert!(matches!(
            union_area_raster_capped(&[sq], 1e-3, 1000),
            Err(Error::RasterCap { .. })
        ));
        assert!(union_area_raster(&[sq], 0.0).is_err());
    }

    #[test]
    fn intersection_of_overlapping_squares() {
        let a = OrientedRect::axis_aligned(0.0, 0.0, 1.0, 1.0);
        let b = OrientedRect::axis_aligned(0.5, 0.25, 1.5, 1.25);
        let br = raster_intersection(&[a], &[b], 1.0 / 128.0, DEFAULT_RASTER_CAP).unwrap();
        assert!(br.contains(0.375), "{br:?}");
        let far = OrientedRect::axis_aligned(5.0, 5.0, 6.0, 6.0);
        let br = raster_intersection(&[a], &[far], 1.0 / 128.0, DEFAULT_RASTER_CAP).unwrap();
        assert_eq!(br.outer, 0.0);
    }
}
