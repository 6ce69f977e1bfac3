use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{bound_large, bound_small, classify_angle, scale_ladder, BoundKind, BoundReport};
use crate::cantor::{DigitSystem, Level};
use crate::error::{Error, Result};
use crate::geometry::{
    intersection_area, projection_inequalities, rects_intersect, rotate_family, theta_eff, Vec2,
};
use crate::intersections::{split_level, Adjacency, RotatedPair};

/// Relative slack on the area comparisons.
pub const INT_SLACK: f64 = 1e-9;

/// Test hook: corrupt counting output before the checks see it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    #[default]
    None,
    /// Give the first rectangle eleven extra partners.
    InflateFirstRow,
}

impl Fault {
    pub fn apply(self, adj: &mut Adjacency) {
        if let (Fault::InflateFirstRow, Some(row)) = (self, adj.rows.first_mut()) {
            row.extend(std::iter::repeat_n(0, 11));
        }
    }
}

/// Bottom-left corners of an intersecting pair: `x` of `T_i`, `y_θ` of
/// `T_{j,θ}` (1-based indices).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CornerPair {
    pub i: u64,
    pub j: u64,
    pub x: Vec2,
    pub y_theta: Vec2,
}

pub fn corner_pairs(pair: &RotatedPair, adj: &Adjacency) -> Vec<CornerPair> {
    adj.pairs()
        .map(|(i, j)| CornerPair {
            i: i as u64 + 1,
            j: j as u64 + 1,
            x: pair.base[i].bottom_left(),
            y_theta: pair.rotated[j].bottom_left(),
        })
        .collect()
}

/// At most 10 partners per rectangle.
pub fn verify_lemma_simple1(adj: &Adjacency) -> BoundReport {
    let mut rep = BoundReport::new("simple1", BoundKind::Exact, 10.0);
    for row in &adj.rows {
        rep.observe_exact(row.len() as f64);
    }
    rep
}

/// `|pr_y(x - y_θ)| ≤ 10δ^s`, and `|pr_x(x - y_θ)| ≤ 10δ` when
/// `|θ| ≤ δ^{1-s}`. Measured in units of `δ^s` and `δ` respectively.
pub fn verify_lemma_simple2(
    pairs: &[CornerPair],
    theta: f64,
    delta: f64,
    s: f64,
) -> Result<BoundReport> {
    let ds = delta.powf(s);
    let check_x = theta.abs() <= delta.powf(1.0 - s);
    let mut rep = BoundReport::new("simple2", BoundKind::Exact, 10.0);
    for p in pairs {
        if ![p.x.x, p.x.y, p.y_theta.x, p.y_theta.y]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::MissingCorners(format!("pair ({}, {})", p.i, p.j)));
        }
        let d = p.x - p.y_theta;
        rep.observe_exact(d.y.abs() / ds);
        if check_x {
            rep.observe_exact(d.x.abs() / delta);
        }
    }
    Ok(rep)
}

/// The three rotation estimates on `samples` random `(z, θ)`, `|z| ≤ 2`,
/// `θ ∈ [0, 1]`. Measured value is the number of failures.
pub fn verify_lemma_simple3(samples: u64, seed: u64) -> BoundReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = BoundReport::new("simple3", BoundKind::Exact, 0.0);
    let mut failures = 0u64;
    for _ in 0..samples {
        let r = 2.0 * rng.gen::<f64>().sqrt();
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let z = Vec2::new(r * phi.cos(), r * phi.sin());
        let theta = rng.gen_range(0.0..=1.0);
        if !projection_inequalities(z, theta).iter().all(|&b| b) {
            failures += 1;
        }
    }
    rep.instances = samples;
    rep.measured_max = failures as f64;
    rep.pass = failures == 0;
    rep
}

/// Clipped areas of intersecting pairs against the rectangle area
/// `9δ^{1+s}` and against strip caps. Values are normalised so that each
/// bound reads `1 + INT_SLACK`.
///
/// `int_strip` compares with `δ²/sin θ_eff`; `int_strip_3delta` with the
/// cap for strips as wide as the rectangles' short side, `9δ²/sin θ_eff`;
/// `int_literal` with `δ²/|θ|`.
pub fn verify_lemma_int(
    pair: &RotatedPair,
    adj: &Adjacency,
    delta: f64,
    delta_s: f64,
) -> Vec<BoundReport> {
    let lim = 1.0 + INT_SLACK;
    let mut rect = BoundReport::new("int_rect", BoundKind::Diagnostic, lim);
    let mut strip = BoundReport::new("int_strip", BoundKind::Diagnostic, lim);
    let mut strip9 = BoundReport::new("int_strip_3delta", BoundKind::Diagnostic, lim);
    let mut literal = BoundReport::new("int_literal", BoundKind::Diagnostic, lim);
    let sin_eff = theta_eff(pair.theta).sin();
    let th = pair.theta.abs();
    let cell = 9.0 * delta * delta_s;
    let areas: Vec<f64> = adj
        .rows
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, row)| {
            row.iter()
                .map(move |&j| intersection_area(&pair.base[i], &pair.rotated[j as usize]))
        })
        .collect();
    for area in areas {
        rect.observe_exact(area / cell);
        if sin_eff > 0.0 {
            strip.observe_exact(area * sin_eff / (delta * delta));
            strip9.observe_exact(area * sin_eff / (9.0 * delta * delta));
        }
        if th > 0.0 {
            literal.observe_exact(area * th / (delta * delta));
        }
    }
    vec![rect, strip, strip9, literal]
}

/// Claim checks at a small angle: distinct `y_sma` per `ξ` (≤ 25), distinct
/// coarse x-differences per `(ξ, z)` (≤ 51), and the fitted bound
/// `M̂_θ ≲ max(δ/|θ|^{1+s}, 1)`.
pub fn verify_claim_mtheta(
    level: &Level,
    theta: f64,
    omega: Vec2,
    pair_cap: u64,
) -> Result<Vec<BoundReport>> {
    let pair = RotatedPair::new(level, theta, omega);
    let adj = pair.adjacency(pair_cap)?;
    mtheta_reports(level, &adj, theta)
}

pub(crate) fn mtheta_reports(
    level: &Level,
    adj: &Adjacency,
    theta: f64,
) -> Result<Vec<BoundReport>> {
    let (delta, s) = (level.delta(), level.s());
    let reg = classify_angle(delta, s, theta);
    if !reg.is_small() {
        return Err(Error::Regime(format!(
            "θ = {theta} is {:?}, not Small",
            reg.tag
        )));
    }
    let m = split_level(level.a(), level.n(), theta);
    // ξ ↦ (pair count, z ↦ set of coarse x-differences)
    let mut by_xi: BTreeMap<(i64, i64), (u64, BTreeMap<(i64, i64), BTreeSet<i64>>)> =
        BTreeMap::new();
    for rank in 0..level.len() {
        by_xi
            .entry(level.decompose_rank(rank, m).fine_key())
            .or_default();
    }
    for (i, j) in adj.pairs() {
        let dx = level.decompose_rank(i, m);
        let dy = level.decompose_rank(j, m);
        let entry = by_xi
            .get_mut(&dx.fine_key())
            .expect("every fine part was seeded");
        entry.0 += 1;
        entry
            .1
            .entry(dy.fine_key())
            .or_default()
            .insert(dx.lar_x - dy.lar_x);
    }

    let mut r25 = BoundReport::new("mtheta_25", BoundKind::Exact, 25.0);
    let mut r51 = BoundReport::new("mtheta_51", BoundKind::Exact, 51.0);
    let mut main = BoundReport::new("mtheta", BoundKind::Fitted, 0.0);
    let mut m_hat = 0u64;
    for (count, zs) in by_xi.values() {
        m_hat = m_hat.max(*count);
        r25.observe_exact(zs.len() as f64);
        for diffs in zs.values() {
            let v: Vec<i64> = diffs.iter().copied().collect();
            let mut dd = BTreeSet::new();
            for &p in &v {
                for &q in &v {
                    dd.insert(p - q);
                }
            }
            r51.observe_exact(dd.len() as f64);
        }
    }
    let bound = (delta / theta.abs().powf(1.0 + s)).max(1.0);
    main.observe_fitted(level.n(), m_hat as f64, bound);
    Ok(vec![r25, r51, main])
}

/// Child-pair counts inside each intersecting parent pair at the ladder
/// level `k`: at most `220a` per parent pair (`lip1`), and for any two
/// child pairs `|i - i'| ≤ 10a` or `|j - j'| ≤ 10a` (`lip2`). The `lip2`
/// measurement is `max min(|Δi|, |Δj|)`.
pub fn verify_lemma_lip(
    sys: &DigitSystem,
    n: u32,
    theta: f64,
    omega: Vec2,
    pair_cap: u64,
) -> Result<Vec<BoundReport>> {
    let level = Level::build(sys, n)?;
    let adj = RotatedPair::new(&level, theta, omega).adjacency(pair_cap)?;
    lip_reports(sys, &level, &adj, theta, omega, pair_cap)
}

pub(crate) fn lip_reports(
    sys: &DigitSystem,
    level: &Level,
    adj: &Adjacency,
    theta: f64,
    omega: Vec2,
    pair_cap: u64,
) -> Result<Vec<BoundReport>> {
    let (delta, s, a) = (level.delta(), level.s(), level.a());
    let th = theta.abs();
    if th < delta.powf(1.0 - s) {
        return Err(Error::Regime(format!("θ = {theta} is below δ^(1-s)")));
    }
    let ladder = scale_ladder(a, delta, s, theta)?;
    let k = ladder.k.min(level.n());
    let parents = Level::build(sys, k)?;
    let pbase = rotate_family(&parents.rects(), 0.0, Vec2::ZERO);
    let prot = rotate_family(&parents.rects(), theta, omega);

    let n = level.n();
    let ax = (a as i64).pow(n - k);
    let by = (level.b() as i64).pow(n - k);
    let pcount = parents.len() as i64;
    let px = parents.anchor_x_by_rank();
    let cx = level.anchor_x_by_rank();
    // level-k ranks whose enlarged rectangle contains the child of rank r
    let containers = |r: usize| -> Vec<usize> {
        let (x, y) = (cx[r], r as i64);
        let lo = (y + 2 + by - 1).div_euclid(by) - 2;
        let hi = (y - 1).div_euclid(by) + 1;
        (lo.max(0)..=hi.min(pcount - 1))
            .filter(|&q| {
                let qx = px[q as usize];
                (q - 1) * by <= y - 1
                    && y + 2 <= (q + 2) * by
                    && (qx - 1) * ax <= x - 1
                    && x + 2 <= (qx + 2) * ax
            })
            .map(|q| q as usize)
            .collect()
    };
    let cont: Vec<Vec<usize>> = (0..level.len()).map(containers).collect();

    let mut tests = 0u64;
    let mut parent_hit: BTreeMap<(usize, usize), bool> = BTreeMap::new();
    let mut groups: BTreeMap<(usize, usize), Vec<(i64, i64)>> = BTreeMap::new();
    for (i, j) in adj.pairs() {
        for &p in &cont[i] {
            for &q in &cont[j] {
                let hit = match parent_hit.get(&(p, q)) {
                    Some(&h) => h,
                    None => {
                        tests += 1;
                        if tests > pair_cap {
                            return Err(Error::PairBudget {
                                requested: tests as u128,
                                cap: pair_cap,
                            });
                        }
                        let h = rects_intersect(&pbase[p], &prot[q])?.verdict.counts();
                        parent_hit.insert((p, q), h);
                        h
                    }
                };
                if hit {
                    groups.entry((p, q)).or_default().push((i as i64, j as i64));
                }
            }
        }
    }

    let mut lip1 = BoundReport::new("lip1", BoundKind::Exact, 220.0 * a as f64);
    let mut lip2 = BoundReport::new("lip2", BoundKind::Exact, 10.0 * a as f64);
    for children in groups.values() {
        lip1.observe_exact(children.len() as f64);
        let mut worst = 0i64;
        for (x, &(i, j)) in children.iter().enumerate() {
            for &(i2, j2) in &children[x + 1..] {
                worst = worst.max((i - i2).abs().min((j - j2).abs()));
            }
        }
        lip2.observe_exact(worst as f64);
    }
    if groups.is_empty() {
        lip1.notes.push("no intersecting parent pairs".into());
    }
    Ok(vec![lip1, lip2])
}

/// All exact and diagnostic checks on one `(level, θ, ω)` instance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstanceCheck {
    pub theta: f64,
    pub omega: Vec2,
    pub l: u64,
    pub max_per_i: u32,
    /// `mtheta` checks ran (small regime).
    pub small: bool,
    /// `lip` checks ran (`θ ∈ [δ^{1-s}, 1]`).
    pub lip: bool,
    /// `θ > 1`: ladder checks skipped.
    pub above_one: bool,
    pub reports: Vec<BoundReport>,
}

pub fn verify_instance(
    sys: &DigitSystem,
    level: &Level,
    theta: f64,
    omega: Vec2,
    pair_cap: u64,
    fault: Fault,
) -> Result<InstanceCheck> {
    let (delta, s) = (level.delta(), level.s());
    let pair = RotatedPair::new(level, theta, omega);
    let mut adj = pair.adjacency(pair_cap)?;
    fault.apply(&mut adj);

    let mut reports = vec![verify_lemma_simple1(&adj)];
    reports.push(verify_lemma_simple2(
        &corner_pairs(&pair, &adj),
        theta,
        delta,
        s,
    )?);
    reports.extend(verify_lemma_int(&pair, &adj, delta, level.delta_s()));

    let th = theta.abs();
    let above_one = th > 1.0;
    let small = !above_one && classify_angle(delta, s, theta).is_small();
    if small {
        reports.extend(mtheta_reports(level, &adj, theta)?);
    }
    let lip = !above_one && th >= delta.powf(1.0 - s);
    if lip {
        reports.extend(lip_reports(sys, level, &adj, theta, omega, pair_cap)?);
    }
    Ok(InstanceCheck {
        theta,
        omega,
        l: adj.total(),
        max_per_i: adj.max_row(),
        small,
        lip,
        above_one,
        reports,
    })
}

/// Measured `L(δ, θ)` against the regime bounds, with fitted constants per
/// level:
///
/// - `sangle`: small angles, `δ^{-s} max(δ/|θ|, |θ|^s)`;
/// - `langle_1`, `langle_2`: the two large-angle bounds;
/// - `cl1`: `r^s/(|θ|δ^s)^s · L(r, θ)` for `|θ| ≥ δ^{1-s}`.
///
/// Angles below `δ` are outside both regimes and skipped; angles above 1
/// are outside the ladder and only noted.
pub fn verify_count_bounds(
    sys: &DigitSystem,
    n_range: std::ops::RangeInclusive<u32>,
    theta_grid: &[f64],
    omega_set: &[Vec2],
    pair_cap: u64,
) -> Result<Vec<BoundReport>> {
    let mut sangle = BoundReport::new("sangle", BoundKind::Fitted, 0.0);
    let mut langle1 = BoundReport::new("langle_1", BoundKind::Fitted, 0.0);
    let mut langle2 = BoundReport::new("langle_2", BoundKind::Fitted, 0.0);
    let mut cl1 = BoundReport::new("cl1", BoundKind::Fitted, 0.0);
    let mut above_one = 0u64;
    let s = sys.s();
    for n in n_range {
        let level = Level::build(sys, n)?;
        let delta = level.delta();
        let cells: Vec<(f64, Vec2)> = theta_grid
            .iter()
            .flat_map(|&t| omega_set.iter().map(move |&w| (t, w)))
            .collect();
        let results = cells
            .iter()
            .map(
                |&(theta, omega)| -> Result<Option<(f64, u64, Option<u64>)>> {
                    let reg = classify_angle(delta, s, theta);
                    if reg.tag == super::RegimeTag::BelowScale {
                        return Ok(None);
                    }
                    let l = RotatedPair::new(&level, theta, omega)
                        .adjacency(pair_cap)?
                        .total();
                    let coarse = if theta.abs() <= 1.0 && theta.abs() >= delta.powf(1.0 - s) {
                        let t = scale_ladder(sys.a(), delta, s, theta)?.t.min(n);
                        let coarse_level = Level::build(sys, t)?;
                        Some(
                            RotatedPair::new(&coarse_level, theta, omega)
                                .adjacency(pair_cap)?
                                .total(),
                        )
                    } else {
                        None
                    };
                    Ok(Some((theta, l, coarse)))
                },
            )
            .collect::<Result<Vec<_>>>()?;
        for (theta, l, coarse) in results.into_iter().flatten() {
            let lf = l as f64;
            if let Ok(b) = bound_small(delta, s, theta) {
                sangle.observe_fitted(n, lf, b);
                continue;
            }
            if theta.abs() > 1.0 {
                above_one += 1;
                continue;
            }
            let (b1, b2) = bound_large(delta, s, theta)?;
            langle1.observe_fitted(n, lf, b1);
            if let Some(b2) = b2 {
                langle2.observe_fitted(n, lf, b2);
            }
            if let Some(lr) = coarse {
                let lad = scale_ladder(sys.a(), delta, s, theta)?;
                let bound = lad.r.powf(s) / (theta.abs() * delta.powf(s)).powf(s) * lr as f64;
                cl1.observe_fitted(n, lf, bound);
            }
        }
    }
    let mut out = vec![sangle, langle1, langle2, cl1];
    for r in &mut out {
        r.finish_fitted();
        if above_one > 0 && r.lemma != "sangle" {
            r.notes.push(format!(
                "{above_one} instances with θ > 1 skipped (outside the ladder)"
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intersections::DEFAULT_PAIR_CAP;

    fn stair() -> DigitSystem {
        DigitSystem::standard_staircase(3, 2).unwrap()
    }

    fn adjacency(level: &Level, theta: f64, omega: Vec2) -> (RotatedPair, Adjacency) {
        let p = RotatedPair::new(level, theta, omega);
        let adj = p.adjacency(DEFAULT_PAIR_CAP).unwrap();
        (p, adj)
    }

    #[test]
    fn simple2_level_one_pair() {
        let lv = Level::build(&stair(), 1).unwrap();
        let (p, adj) = adjacency(&lv, 0.0, Vec2::ZERO);
        let pairs = corner_pairs(&p, &adj);
        let p12 = pairs.iter().find(|c| (c.i, c.j) == (1, 2)).unwrap();
        assert!(((p12.x - p12.y_theta).y.abs() - 0.5).abs() < 1e-15);
        let rep = verify_lemma_simple2(&pairs, 0.0, lv.delta(), lv.s()).unwrap();
        assert!(rep.pass);
        // x-offsets of 2δ dominate the y-offsets of δ^s
        assert!((rep.measured_max - 2.0).abs() < 1e-12);
    }

    #[test]
    fn simple2_rejects_missing_corners() {
        let bad = CornerPair {
            i: 1,
            j: 1,
            x: Vec2::new(f64::NAN, 0.0),
            y_theta: Vec2::ZERO,
        };
        assert!(matches!(
            verify_lemma_simple2(&[bad], 0.1, 0.01, 0.5),
            Err(Error::MissingCorners(_))
        ));
    }

    #[test]
    fn simple1_and_fault() {
        let lv = Level::build(&stair(), 4).unwrap();
        let (_, mut adj) = adjacency(&lv, 0.7, Vec2::ZERO);
        assert!(verify_lemma_simple1(&adj).pass);
        Fault::InflateFirstRow.apply(&mut adj);
        assert!(!verify_lemma_simple1(&adj).pass);
    }

    #[test]
    fn simple3_samples() {
        let rep = verify_lemma_simple3(10_000, 7);
        assert!(rep.pass);
        assert_eq!(rep.instances, 10_000);
    }

    #[test]
    fn int_rect_bound_holds() {
        let lv = Level::build(&stair(), 4).unwrap();
        for theta in [0.0, 0.3, 1.5, 3.0] {
            let (p, adj) = adjacency(&lv, theta, Vec2::ZERO);
            let reps = verify_lemma_int(&p, &adj, lv.delta(), lv.delta_s());
            assert_eq!(reps[0].lemma, "int_rect");
            assert!(reps[0].pass);
            assert!(reps[2].pass, "{theta}: {:?}", reps[2]);
        }
    }

    #[test]
    fn mtheta_staircase_n5() {
        let lv = Level::build(&stair(), 5).unwrap();
        let reps = verify_claim_mtheta(&lv, 1.0 / 81.0, Vec2::ZERO, DEFAULT_PAIR_CAP).unwrap();
        assert!(reps[0].pass && reps[1].pass);
        assert!(reps[2].constant.is_finite());
        assert!(verify_claim_mtheta(&lv, 0.5, Vec2::ZERO, DEFAULT_PAIR_CAP).is_err());
    }

    #[test]
    fn mtheta_degenerate_level_one() {
        // θ = δ at n = 1 is small only when δ < β; use a = 4, b = 2
        let sys = DigitSystem::standard_staircase(4, 2).unwrap();
        let lv = Level::build(&sys, 2).unwrap();
        let reps = verify_claim_mtheta(&lv, 1.0 / 16.0, Vec2::ZERO, DEFAULT_PAIR_CAP).unwrap();
        assert!(reps[0].measured_max <= 25.0 && reps[1].measured_max <= 51.0);
    }

    #[test]
    fn lip_staircase_n6() {
        let reps = verify_lemma_lip(&stair(), 6, 0.5, Vec2::ZERO, DEFAULT_PAIR_CAP).unwrap();
        assert!(reps.iter().all(|r| r.pass), "{reps:?}");
        assert!(reps[0].instances > 0);
        assert!(verify_lemma_lip(&stair(), 6, 0.01, Vec2::ZERO, DEFAULT_PAIR_CAP).is_err());
    }

    #[test]
    fn lip_at_full_depth_has_single_children() {
        // ρ₀ = θ δ^s ≤ δ forces k = n
        let sys = stair();
        let lv = Level::build(&sys, 2).unwrap();
        let theta = lv.delta().powf(1.0 - lv.s());
        let ladder = scale_ladder(3, lv.delta(), lv.s(), theta).unwrap();
        if ladder.k == 2 {
            let (_, adj) = adjacency(&lv, theta, Vec2::ZERO);
            let reps = lip_reports(&sys, &lv, &adj, theta, Vec2::ZERO, DEFAULT_PAIR_CAP).unwrap();
            assert!(reps[0].measured_max <= 1.0);
        }
    }

    #[test]
    fn count_bounds_run() {
        let reps = verify_count_bounds(
            &stair(),
            3..=5,
            &[0.0, 0.05, 0.2, 0.5, 2.0],
            &[Vec2::ZERO],
            DEFAULT_PAIR_CAP,
        )
        .unwrap();
        let names: Vec<&str> = reps.iter().map(|r| r.lemma.as_str()).collect();
        assert_eq!(names, ["sangle", "langle_1", "langle_2", "cl1"]);
        assert!(reps.iter().all(|r| r.constant.is_finite()));
        assert!(reps[1].notes.iter().any(|n| n.contains("θ > 1")));
    }
}
