//! Rotated-rectangle kinematics: the rigid motions `z ↦ e^{iθ}z + ω`,
//! robust intersection tests, convex clipping and raster measures.

mod clip;
mod raster;
mod sat;

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

pub use clip::{intersection_area, ConvexPolygon};
pub use raster::{
    raster_intersection, raster_union, union_area_raster, union_area_raster_capped, Coverable,
    Disc, RasterBracket, DEFAULT_RASTER_CAP,
};
pub use sat::{
    prepare_all, prepared_intersect, rects_intersect, IntersectResult, PreparedRect, Verdict,
    Witness,
};

use crate::cantor::{GridRect, LatticeBox};

/// Relative tolerance for marginal separating-axis verdicts, measured
/// against the larger rectangle diagonal.
pub const EPS_GEOM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Multiplication by `e^{iθ}` given `(sin θ, cos θ)`.
    pub fn rotate_sc(self, sin: f64, cos: f64) -> Vec2 {
        Vec2::new(cos * self.x - sin * self.y, sin * self.x + cos * self.y)
    }

    pub fn rotate(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        self.rotate_sc(s, c)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// A rotated, translated rectangle. Corners are counterclockwise starting
/// from the image of the bottom-left corner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrientedRect {
    pub corners: [Vec2; 4],
    pub theta: f64,
    pub omega: Vec2,
    /// `(level, index)` of the lattice rectangle this is the image of.
    pub source: (u32, u64),
}

impl OrientedRect {
    pub fn axis_aligned(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            corners: [
                Vec2::new(x0, y0),
                Vec2::new(x1, y0),
                Vec2::new(x1, y1),
                Vec2::new(x0, y1),
            ],
            theta: 0.0,
            omega: Vec2::ZERO,
            source: (0, 0),
        }
    }

    /// Image of `[x0,x1]×[y0,y1]` under `z ↦ e^{iθ}z + ω`.
    pub fn transformed(
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        sin: f64,
        cos: f64,
        theta: f64,
        omega: Vec2,
    ) -> Self {
        let map = |x: f64, y: f64| Vec2::new(x, y).rotate_sc(sin, cos) + omega;
        Self {
            corners: [map(x0, y0), map(x1, y0), map(x1, y1), map(x0, y1)],
            theta,
            omega,
            source: (0, 0),
        }
    }

    pub fn bottom_left(&self) -> Vec2 {
        self.corners[0]
    }

    pub fn side_lengths(&self) -> (f64, f64) {
        (
            (self.corners[1] - self.corners[0]).norm(),
            (self.corners[3] - self.corners[0]).norm(),
        )
    }

    pub fn area(&self) -> f64 {
        let (w, h) = self.side_lengths();
        w * h
    }

    pub fn diagonal(&self) -> f64 {
        (self.corners[2] - self.corners[0]).norm()
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut lo = self.corners[0];
        let mut hi = self.corners[0];
        for c in &self.corners[1..] {
            lo = Vec2::new(lo.x.min(c.x), lo.y.min(c.y));
            hi = Vec2::new(hi.x.max(c.x), hi.y.max(c.y));
        }
        (lo, hi)
    }

    pub fn polygon(&self) -> ConvexPolygon {
        ConvexPolygon::new(self.corners.to_vec())
    }

    /// Corner list as CSV rows `x,y`, for debug dumps.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y\n");
        for c in &self.corners {
            out.push_str(&format!("{},{}\n", c.x, c.y));
        }
        out
    }
}

/// `τ_θ(r)`: rotation about the origin followed by translation by `ω`.
pub fn rotate_rect(r: &GridRect, theta: f64, omega: Vec2) -> OrientedRect {
    let (s, c) = theta.sin_cos();
    rotate_rect_sc(r, s, c, theta, omega)
}

fn rotate_rect_sc(r: &GridRect, sin: f64, cos: f64, theta: f64, omega: Vec2) -> OrientedRect {
    let mut out = OrientedRect::transformed(
        r.x_min(),
        r.y_min(),
        r.x_max(),
        r.y_max(),
        sin,
        cos,
        theta,
        omega,
    );
    out.source = (r.n, r.i);
    out
}

/// `τ_θ` applied to a whole family; at `θ = 0, ω = 0` the corners are the
/// exact lattice values rounded once.
pub fn rotate_family(rects: &[GridRect], theta: f64, omega: Vec2) -> Vec<OrientedRect> {
    let (s, c) = if theta == 0.0 {
        (0.0, 1.0)
    } else {
        theta.sin_cos()
    };
    rects
        .iter()
        .map(|r| rotate_rect_sc(r, s, c, theta, omega))
        .collect()
}

/// Image of a lattice box of level `(a_pow, b_pow)`.
pub fn rotate_box(
    b: &LatticeBox,
    a_pow: i64,
    b_pow: i64,
    sin: f64,
    cos: f64,
    theta: f64,
    omega: Vec2,
) -> OrientedRect {
    let (ap, bp) = (a_pow as f64, b_pow as f64);
    OrientedRect::transformed(
        b.x0 as f64 / ap,
        b.y0 as f64 / bp,
        b.x1 as f64 / ap,
        b.y1 as f64 / bp,
        sin,
        cos,
        theta,
        omega,
    )
}

/// Folded angle `min(θ, π - θ)`.
pub fn theta_eff(theta: f64) -> f64 {
    theta.min(PI - theta)
}

/// Area of two crossing infinite strips of width `δ` at angle `θ`,
/// `δ² / sin θ_eff`. Returns `+∞` when the strips are parallel.
pub fn strip_area_cap(delta: f64, theta: f64) -> f64 {
    let t = theta_eff(theta);
    if t <= 0.0 {
        return f64::INFINITY;
    }
    delta * delta / t.sin()
}

/// Truth values of the three rotation estimates
/// `|Δx| ≤ |θz|`, `|Δy| ≤ |θz|` and `||Δx| - |θ y|| ≤ 2θ²|z|`, where
/// `Δ = e^{iθ}z - z`, each with slack `EPS_GEOM·|z|`.
pub fn projection_inequalities(z: Vec2, theta: f64) -> [bool; 3] {
    let r = z.norm();
    let slack = EPS_GEOM * r;
    let w = z.rotate(theta);
    let dx = (w.x - z.x).abs();
    let dy = (w.y - z.y).abs();
    let t = theta.abs();
    [
        dx <= t * r + slack,
        dy <= t * r + slack,
        (dx - (t * z.y).abs()).abs() <= 2.0 * t * t * r + slack,
    ]
}
