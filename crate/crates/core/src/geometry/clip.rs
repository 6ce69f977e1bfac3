//! Sutherland–Hodgman clipping of convex polygons.

use super::{OrientedRect, Vec2};

/// A convex polygon with counterclockwise vertices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvexPolygon {
    pub vertices: Vec<Vec2>,
}

impl ConvexPolygon {
    pub fn new(vertices: Vec<Vec2>) -> Self {
        Self { vertices }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Shoelace area, taken about the first vertex.
    pub fn area(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let o = self.vertices[0];
        let twice: f64 = self
            .vertices
            .windows(2)
            .map(|w| (w[0] - o).cross(w[1] - o))
            .sum();
        0.5 * twice.abs()
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo, hi)
    }

    /// Keep the part left of the directed line `a → b`.
    fn clip_halfplane(&self, a: Vec2, b: Vec2) -> ConvexPolygon {
        let n = self.vertices.len();
        let mut out = Vec::with_capacity(n + 1);
        let dir = b - a;
        for k in 0..n {
            let s = self.vertices[k];
            let e = self.vertices[(k + 1) % n];
            let sd = dir.cross(s - a);
            let ed = dir.cross(e - a);
            match (sd >= 0.0, ed >= 0.0) {
                (true, true) => out.push(e),
                (true, false) => out.push(s + (e - s) * (sd / (sd - ed))),
                (false, true) => {
                    out.push(s + (e - s) * (sd / (sd - ed)));
                    out.push(e);
                }
                (false, false) => {}
            }
        }
        ConvexPolygon::new(out)
    }

    /// `self ∩ clip` for a convex counterclockwise `clip`.
    pub fn clip(&self, clip: &ConvexPolygon) -> ConvexPolygon {
        let m = clip.vertices.len();
        let mut cur = self.clone();
        for k in 0..m {
            if cur.is_empty() {
                return ConvexPolygon::default();
            }
            cur = cur.clip_halfplane(clip.vertices[k], clip.vertices[(k + 1) % m]);
        }
        if cur.is_empty() {
            ConvexPolygon::default()
        } else {
            cur
        }
    }

    pub fn translate(&self, by: Vec2) -> ConvexPolygon {
        ConvexPolygon::new(self.vertices.iter().map(|&v| v + by).collect())
    }

    /// Closed containment of a point (zero tolerance).
    pub fn contains_point(&self, p: Vec2) -> bool {
        let n = self.vertices.len();
        n >= 3
            && (0..n).all(|k| {
                let a = self.vertices[k];
                let b = self.vertices[(k + 1) % n];
                (b - a).cross(p - a) >= 0.0
            })
    }
}

/// Area of `A ∩ B`, computed in coordinates centred at `A`'s first corner.
pub fn intersection_area(a: &OrientedRect, b: &OrientedRect) -> f64 {
    let origin = a.corners[0];
    let pa = a.polygon().translate(-origin);
    let pb = b.polygon().translate(-origin);
    pa.clip(&pb).area().min(a.area()).min(b.area())
}
