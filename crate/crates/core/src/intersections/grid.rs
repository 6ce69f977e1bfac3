use std::collections::HashMap;

use crate::geometry::{OrientedRect, Vec2};

/// Uniform bucket grid over axis-aligned bounding boxes.
///
/// Every rectangle is listed in each bucket its bounding box meets.
#[derive(Clone, Debug)]
pub struct GridIndex {
    cell: f64,
    pad: f64,
    buckets: HashMap<(i64, i64), Vec<u32>>,
}

impl GridIndex {
    pub fn build(rects: &[OrientedRect], cell: f64) -> Self {
        assert!(cell > 0.0, "grid cell must be positive");
        let pad = cell * 1e-9;
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (k, r) in rects.iter().enumerate() {
            let (lo, hi) = r.bbox();
            let (x0, y0, x1, y1) = Self::span(cell, pad, lo, hi);
            for gx in x0..=x1 {
                for gy in y0..=y1 {
                    buckets.entry((gx, gy)).or_default().push(k as u32);
                }
            }
        }
        Self { cell, pad, buckets }
    }

    fn span(cell: f64, pad: f64, lo: Vec2, hi: Vec2) -> (i64, i64, i64, i64) {
        (
            ((lo.x - pad) / cell).floor() as i64,
            ((lo.y - pad) / cell).floor() as i64,
            ((hi.x + pad) / cell).floor() as i64,
            ((hi.y + pad) / cell).floor() as i64,
        )
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn bucket(&self, gx: i64, gy: i64) -> &[u32] {
        self.buckets.get(&(gx, gy)).map_or(&[], Vec::as_slice)
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    /// Indices whose bounding boxes may meet `[lo, hi]`, ascending, no repeats.
    pub fn query(&self, lo: Vec2, hi: Vec2) -> Vec<u32> {
        let (x0, y0, x1, y1) = Self::span(self.cell, self.pad, lo, hi);
        let mut out = Vec::new();
        for gx in x0..=x1 {
            for gy in y0..=y1 {
                out.extend_from_slice(self.bucket(gx, gy));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_rect_in_every_bucket_it_meets() {
        let rects: Vec<OrientedRect> = (0..20)
            .map(|k| {
                let t = k as f64 * 0.37;
                let (s, c) = t.sin_cos();
                OrientedRect::transformed(
                    0.0,
                    0.0,
                    0.3,
                    1.1,
                    s,
                    c,
                    t,
                    Vec2::new(k as f64 * 0.1, 0.0),
                )
            })
            .collect();
        let idx = GridIndex::build(&rects, 0.25);
        for (k, r) in rects.iter().enumerate() {
            let (lo, hi) = r.bbox();
            let mut gx = (lo.x / 0.25).floor() as i64;
            while gx as f64 * 0.25 <= hi.x {
                let mut gy = (lo.y / 0.25).floor() as i64;
                while gy as f64 * 0.25 <= hi.y {
                    assert!(idx.bucket(gx, gy).contains(&(k as u32)));
                    gy += 1;
                }
                gx += 1;
            }
        }
        let q = idx.query(Vec2::new(-10.0, -10.0), Vec2::new(10.0, 10.0));
        assert_eq!(q, (0..20).collect::<Vec<u32>>());
    }
}
