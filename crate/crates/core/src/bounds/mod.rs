//! Angle regimes, the scale ladder, the counting bounds, and checks of the
//! lemma-level facts against computed pair data.

mod lemmas;

use std::collections::BTreeMap;

use serde::Serialize;

pub use lemmas::{
    corner_pairs, verify_claim_mtheta, verify_count_bounds, verify_instance, verify_lemma_int,
    verify_lemma_lip, verify_lemma_simple1, verify_lemma_simple2, verify_lemma_simple3, CornerPair,
    Fault, InstanceCheck, INT_SLACK,
};

use crate::cantor::scale_index;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RegimeTag {
    /// `|θ| < δ`: below the angular resolution, outside both regimes.
    BelowScale,
    Small,
    Large,
    VeryLarge,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Regime {
    pub tag: RegimeTag,
    /// `β = min(δ^s, δ^{1-s})`.
    pub beta: f64,
    /// `γ = max(δ^s, δ^{1-s})`.
    pub gamma: f64,
}

impl Regime {
    pub fn is_small(&self) -> bool {
        self.tag == RegimeTag::Small
    }

    /// Very large angles are large too.
    pub fn is_large(&self) -> bool {
        matches!(self.tag, RegimeTag::Large | RegimeTag::VeryLarge)
    }
}

/// Ties go to the larger regime: `|θ| = β` is large, `|θ| = γ` very large.
pub fn classify_angle(delta: f64, s: f64, theta: f64) -> Regime {
    let ds = delta.powf(s);
    let d1s = delta.powf(1.0 - s);
    let beta = ds.min(d1s);
    let gamma = ds.max(d1s);
    let t = theta.abs();
    let tag = if t < delta {
        RegimeTag::BelowScale
    } else if t >= gamma {
        RegimeTag::VeryLarge
    } else if t >= beta {
        RegimeTag::Large
    } else {
        RegimeTag::Small
    };
    Regime { tag, beta, gamma }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScaleLadder {
    pub delta: f64,
    pub theta: f64,
    pub s: f64,
    /// `|θ| ∈ (a^{-(m+1)}, a^{-m}]`.
    pub m: u32,
    /// `max(|θ|^{1/s}, |θ|^{1/(1-s)})`.
    pub r0: f64,
    pub t: u32,
    pub r: f64,
    /// `|θ| δ^s`.
    pub rho0: f64,
    pub k: u32,
    pub rho: f64,
    /// `δ ≤ ρ₀ ≤ r₀`, checked only when `|θ| ≥ δ^{1-s}` (otherwise `None`).
    pub rho_ordered: Option<bool>,
    /// `|θ| ≤ min(r^s, r^{1-s})`.
    pub beta_r_ok: bool,
}

fn nonneg_index(a: u32, x: f64) -> u32 {
    scale_index(a, x).max(0) as u32
}

pub fn scale_ladder(a: u32, delta: f64, s: f64, theta: f64) -> Result<ScaleLadder> {
    let th = theta.abs();
    if !(th > 0.0 && th <= 1.0) {
        return Err(Error::AngleRange {
            theta,
            range: "(0, 1]",
        });
    }
    let af = a as f64;
    let m = nonneg_index(a, th);
    let r0 = th.powf(1.0 / s).max(th.powf(1.0 / (1.0 - s)));
    let t = nonneg_index(a, r0);
    let r = af.powi(-(t as i32));
    let rho0 = th * delta.powf(s);
    let k = nonneg_index(a, rho0);
    let rho = af.powi(-(k as i32));
    // relative slack for the float powers compared against each other
    let tol = 1e-12;
    let rho_ordered = (th >= delta.powf(1.0 - s) * (1.0 - tol))
        .then(|| delta <= rho0 * (1.0 + tol) && rho0 <= r0 * (1.0 + tol));
    let beta_r_ok = th <= r.powf(s).min(r.powf(1.0 - s)) * (1.0 + tol);
    Ok(ScaleLadder {
        delta,
        theta,
        s,
        m,
        r0,
        t,
        r,
        rho0,
        k,
        rho,
        rho_ordered,
        beta_r_ok,
    })
}

/// `δ^{-s} max(δ/|θ|, |θ|^s)`.
pub fn bound_small(delta: f64, s: f64, theta: f64) -> Result<f64> {
    let reg = classify_angle(delta, s, theta);
    if !reg.is_small() {
        return Err(Error::Regime(format!(
            "θ = {theta} is {:?}, not Small",
            reg.tag
        )));
    }
    let t = theta.abs();
    Ok(delta.powf(-s) * (delta / t).max(t.powf(s)))
}

/// First bound `δ^{-s} max(r₀/|θ|, |θ|^s)`; second bound
/// `|θ|^{-s} δ^{-s²} max(r₀/|θ|, |θ|^s)` only when `|θ| ≥ δ^{1-s}`.
pub fn bound_large(delta: f64, s: f64, theta: f64) -> Result<(f64, Option<f64>)> {
    let reg = classify_angle(delta, s, theta);
    if !reg.is_large() {
        return Err(Error::Regime(format!(
            "θ = {theta} is {:?}, not Large",
            reg.tag
        )));
    }
    let t = theta.abs();
    if t > 1.0 {
        return Err(Error::AngleRange {
            theta,
            range: "(0, 1]",
        });
    }
    let r0 = t.powf(1.0 / s).max(t.powf(1.0 / (1.0 - s)));
    let tail = (r0 / t).max(t.powf(s));
    let first = delta.powf(-s) * tail;
    let second = (t >= delta.powf(1.0 - s)).then(|| t.powf(-s) * delta.powf(-s * s) * tail);
    Ok((first, second))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Stated with an explicit numeral; checked exactly, drives exit codes.
    Exact,
    /// Stated up to an unnamed constant; the constant is fitted.
    Fitted,
    /// Reported for comparison only.
    Diagnostic,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub lemma: String,
    pub kind: BoundKind,
    pub instances: u64,
    pub measured_max: f64,
    pub bound: f64,
    /// `max(measured / bound)` over instances.
    pub constant: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub constants_by_n: BTreeMap<u32, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn new(lemma: &str, kind: BoundKind, bound: f64) -> Self {
        Self {
            lemma: lemma.to_string(),
            kind,
            instances: 0,
            measured_max: 0.0,
            bound,
            constant: 0.0,
            pass: true,
            constants_by_n: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// Record one instance against a fixed exact threshold.
    pub fn observe_exact(&mut self, measured: f64) {
        self.instances += 1;
        self.measured_max = self.measured_max.max(measured);
        self.constant = self.measured_max / self.bound;
        self.pass &= measured <= self.bound;
    }

    /// Record one instance of a fitted bound at level `n`.
    pub fn observe_fitted(&mut self, n: u32, measured: f64, bound: f64) {
        self.instances += 1;
        let c = if bound > 0.0 {
            measured / bound
        } else if measured == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if c >= self.constant || self.instances == 1 {
            self.bound = bound;
        }
        self.measured_max = self.measured_max.max(measured);
        self.constant = self.constant.max(c);
        let e = self.constants_by_n.entry(n).or_insert(0.0);
        *e = e.max(c);
    }

    /// Ratio between the largest and smallest positive per-level constant.
    pub fn spread(&self) -> f64 {
        let pos: Vec<f64> = self
            .constants_by_n
            .values()
            .copied()
            .filter(|c| *c > 0.0)
            .collect();
        if pos.is_empty() {
            return 1.0;
        }
        let hi = pos.iter().copied().fold(0.0, f64::max);
        let lo = pos.iter().copied().fold(f64::INFINITY, f64::min);
        hi / lo
    }

    /// Fitted lemmas pass when the constant is finite and stable within a
    /// factor of 5 across levels.
    pub fn finish_fitted(&mut self) {
        self.pass = self.constant.is_finite() && self.spread() < 5.0;
    }

    /// Fold another report for the same lemma into this one.
    pub fn merge(&mut self, other: &BoundReport) {
        debug_assert_eq!(self.lemma, other.lemma);
        if other.instances == 0 {
            return;
        }
        if self.instances == 0 || other.constant > self.constant {
            self.bound = other.bound;
        }
        self.instances += other.instances;
        self.measured_max = self.measured_max.max(other.measured_max);
        self.constant = self.constant.max(other.constant);
        self.pass &= other.pass;
        for (&n, &c) in &other.constants_by_n {
            let e = self.constants_by_n.entry(n).or_insert(0.0);
            *e = e.max(c);
        }
        for note in &other.notes {
            if !self.notes.contains(note) {
                self.notes.push(note.clone());
            }
        }
    }
}

/// Merge reports by lemma name, keeping first-seen order.
pub fn merge_reports(reports: impl IntoIterator<Item = BoundReport>) -> Vec<BoundReport> {
    let mut out: Vec<BoundReport> = Vec::new();
    for r in reports {
        match out.iter_mut().find(|o| o.lemma == r.lemma) {
            Some(o) => o.merge(&r),
            None => out.push(r),
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute deviation from the fitted line.
    pub residual: f64,
}

/// Ordinary least squares through `(x, y)` points.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<Fit> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all fit abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).abs())
        .fold(0.0, f64::max);
    Ok(Fit {
        slope,
        intercept,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s32() -> f64 {
        2f64.ln() / 3f64.ln()
    }

    #[test]
    fn classify_examples() {
        let d = 1.0 / 81.0;
        let r = classify_angle(d, s32(), 0.03);
        assert_eq!(r.tag, RegimeTag::Small);
        assert!((r.beta - 1.0 / 16.0).abs() < 1e-12);
        let r = classify_angle(d, s32(), 0.2);
        assert_eq!(r.tag, RegimeTag::VeryLarge);
        assert!((r.gamma - 16.0 / 81.0).abs() < 1e-12);
        assert_eq!(classify_angle(d, s32(), r.beta).tag, RegimeTag::Large);
        assert_eq!(classify_angle(d, s32(), r.gamma).tag, RegimeTag::VeryLarge);
        assert_eq!(classify_angle(d, s32(), 0.0).tag, RegimeTag::BelowScale);
    }

    #[test]
    fn ladder_examples() {
        let l = scale_ladder(3, 1.0 / 81.0, s32(), 0.1).unwrap();
        assert!((l.r0 - 0.1f64.powf(1.0 / s32())).abs() < 1e-15);
        assert_eq!(l.t, 3);
        assert!((l.r - 1.0 / 27.0).abs() < 1e-15);
        assert!(l.beta_r_ok);

        let l = scale_ladder(3, 1.0 / 81.0, s32(), 0.25).unwrap();
        assert!((l.rho0 - 1.0 / 64.0).abs() < 1e-12);
        assert_eq!(l.k, 3);
        assert_eq!(l.rho_ordered, Some(true));

        // upper endpoint belongs to the interval
        assert_eq!(scale_ladder(3, 1.0 / 81.0, s32(), 1.0 / 9.0).unwrap().m, 2);
        assert_eq!(scale_ladder(3, 1.0 / 81.0, s32(), 1.0).unwrap().m, 0);

        assert!(scale_ladder(3, 0.01, s32(), 0.0).is_err());
        assert!(scale_ladder(3, 0.01, s32(), 1.5).is_err());
    }

    #[test]
    fn small_bound_examples() {
        let d = 1.0 / 81.0;
        let s = s32();
        assert!((bound_small(d, s, d).unwrap() - d.powf(-s)).abs() < 1e-9);
        let got = bound_small(d, s, 0.03).unwrap();
        assert!((got - 16.0 * (d / 0.03)).abs() < 1e-9, "{got}");
        let d: f64 = 1.0 / 4096.0;
        let x: f64 = d.powf(1.0 / 1.5);
        let b = bound_small(d, 0.5, x).unwrap();
        assert!((b - d.powf(0.5 / 1.5) * d.powf(-0.5)).abs() < 1e-9 * b);
        assert!(bound_small(1.0 / 81.0, s, 0.5).is_err());
    }

    #[test]
    fn large_bound_examples() {
        let d = 1.0 / 81.0;
        let s = s32();
        let (_, second) = bound_large(d, s, 0.25).unwrap();
        let want =
            0.25f64.powf(-s) * 81f64.powf(s * s) * 0.25f64.powf(1.0 / s - 1.0).max(0.25f64.powf(s));
        assert!((second.unwrap() - want).abs() < 1e-9 * want);
        let (first, second) = bound_large(d, s, 1.0).unwrap();
        assert!((first - d.powf(-s)).abs() < 1e-9 * first);
        assert!((second.unwrap() - d.powf(-s * s)).abs() < 1e-9);
        assert!(bound_large(d, s, 0.02).is_err());
        assert!(bound_large(d, s, 2.0).is_err());
    }

    #[test]
    fn fit_examples() {
        let pts: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 2.0 * k as f64)).collect();
        let f = fit_exponent(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && f.residual < 1e-12);
        let pts: Vec<(f64, f64)> = (0..4).map(|k| (k as f64, k as f64 + 3.0)).collect();
        assert!((fit_exponent(&pts).unwrap().slope - 1.0).abs() < 1e-12);
        assert!(matches!(
            fit_exponent(&pts[..2]),
            Err(Error::TooFewPoints(2))
        ));
    }

    #[test]
    fn fitted_report_tracks_spread() {
        let mut r = BoundReport::new("x", BoundKind::Fitted, 0.0);
        r.observe_fitted(3, 2.0, 1.0);
        r.observe_fitted(4, 3.0, 1.0);
        r.observe_fitted(5, 0.0, 0.0);
        r.finish_fitted();
        assert_eq!(r.constant, 3.0);
        assert!((r.spread() - 1.5).abs() < 1e-15);
        assert!(r.pass);
        r.observe_fitted(6, 1.0, 0.0);
        r.finish_fitted();
        assert!(!r.pass);
    }
}
