//! Separating-axis test for closed oriented rectangles.

use serde::Serialize;

use super::{OrientedRect, Vec2, EPS_GEOM};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Disjoint,
    Intersecting,
    /// Some axis gap lies within the marginal tolerance. Counted as
    /// intersecting everywhere downstream.
    Marginal,
}

impl Verdict {
    /// Conservative reading: anything but a clear separation counts.
    pub fn counts(self) -> bool {
        !matches!(self, Verdict::Disjoint)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Witness {
    /// Unit axis along which the projections are separated by `gap`.
    SeparatingAxis { axis: Vec2, gap: f64 },
    /// Axis of least penetration and that penetration depth.
    Overlap { axis: Vec2, depth: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntersectResult {
    pub verdict: Verdict,
    pub witness: Witness,
}

fn project(r: &OrientedRect, axis: Vec2) -> (f64, f64) {
    let mut lo = r.corners[0].dot(axis);
    let mut hi = lo;
    for c in &r.corners[1..] {
        let p = c.dot(axis);
        lo = lo.min(p);
        hi = hi.max(p);
    }
    (lo, hi)
}

fn unit_axes(r: &OrientedRect) -> Result<[Vec2; 2]> {
    let e0 = r.corners[1] - r.corners[0];
    let e1 = r.corners[3] - r.corners[0];
    let (l0, l1) = (e0.norm(), e1.norm());
    if !(l0 > 0.0 && l1 > 0.0) {
        return Err(Error::Degenerate(format!(
            "rectangle {:?} has side lengths {l0} and {l1}",
            r.source
        )));
    }
    Ok([e0 * (1.0 / l0), e1 * (1.0 / l1)])
}

/// A rectangle with its unit axes and diagonal computed once, for repeated
/// tests against many others.
#[derive(Clone, Copy, Debug)]
pub struct PreparedRect<'a> {
    rect: &'a OrientedRect,
    axes: [Vec2; 2],
    own: [(f64, f64); 2],
    diag: f64,
}

impl<'a> PreparedRect<'a> {
    pub fn new(rect: &'a OrientedRect) -> Result<Self> {
        let axes = unit_axes(rect)?;
        Ok(Self {
            rect,
            axes,
            own: [project(rect, axes[0]), project(rect, axes[1])],
            diag: rect.diagonal(),
        })
    }

    pub fn rect(&self) -> &'a OrientedRect {
        self.rect
    }
}

pub fn prepare_all(rects: &[OrientedRect]) -> Result<Vec<PreparedRect<'_>>> {
    rects.iter().map(PreparedRect::new).collect()
}

/// Same test as [`rects_intersect`] on prepared rectangles.
pub fn prepared_intersect(a: &PreparedRect, b: &PreparedRect) -> IntersectResult {
    let tol = EPS_GEOM * a.diag.max(b.diag);
    let mut least = (Vec2::ZERO, f64::NEG_INFINITY);
    for k in 0..4 {
        let ((alo, ahi), (blo, bhi), axis) = if k < 2 {
            (a.own[k], project(b.rect, a.axes[k]), a.axes[k])
        } else {
            (project(a.rect, b.axes[k - 2]), b.own[k - 2], b.axes[k - 2])
        };
        let gap = (blo - ahi).max(alo - bhi);
        if gap > tol {
            return IntersectResult {
                verdict: Verdict::Disjoint,
                witness: Witness::SeparatingAxis { axis, gap },
            };
        }
        if gap > least.1 {
            least = (axis, gap);
        }
    }
    let verdict = if least.1 >= -tol {
        Verdict::Marginal
    } else {
        Verdict::Intersecting
    };
    IntersectResult {
        verdict,
        witness: Witness::Overlap {
            axis: least.0,
            depth: -least.1,
        },
    }
}

/// Closed-set intersection test over the four candidate axes.
///
/// Touching boundaries are reported as `Marginal` (or `Intersecting`),
/// never `Disjoint`.
pub fn rects_intersect(a: &OrientedRect, b: &OrientedRect) -> Result<IntersectResult> {
    Ok(prepared_intersect(
        &PreparedRect::new(a)?,
        &PreparedRect::new(b)?,
    ))
}
