use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use super::output::{num, write_atomic, write_json, Csv};
use super::RunConfig;
use crate::bounds::{
    fit_exponent, merge_reports, verify_count_bounds, verify_instance, verify_lemma_simple3,
    BoundKind, BoundReport, Fault, InstanceCheck,
};
use crate::cantor::{DigitSystem, Level};
use crate::ensemble::{
    double_sum, easy_bound_check, minkowski_chain, pair_overlap_profile, theorem_floor,
    ChainOptions, ChainReport, EnsembleConfig, ProfileOptions, S0,
};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::intersections::{adjacency_bruteforce, adjacency_fast, Adjacency, RotatedPair};

/// Canonical lemma order in reports and summaries.
pub const LEMMA_ORDER: [&str; 16] = [
    "simple1",
    "simple2",
    "simple3",
    "int_rect",
    "int_strip",
    "int_strip_3delta",
    "int_literal",
    "mtheta_25",
    "mtheta_51",
    "mtheta",
    "lip1",
    "lip2",
    "sangle",
    "langle_1",
    "langle_2",
    "cl1",
];

fn ensemble(cfg: &RunConfig, sys: &DigitSystem, n: u32) -> EnsembleConfig {
    let mut ec = EnsembleConfig::new(sys.clone(), n).with_policy(cfg.policy());
    ec.raster_cap = cfg.budget.raster_cap;
    ec
}

fn seed_field(cfg: &RunConfig) -> String {
    cfg.system.seed.map(|s| s.to_string()).unwrap_or_default()
}

/// Intervals, anchors and rectangles for every level of the sweep, plus the
/// system document.
pub fn cmd_gen(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let sys = cfg.validate()?;
    let deadline = cfg.deadline();
    let dir = &cfg.output.dir;
    let mut intervals = Csv::new(cfg, &["n", "i", "num", "den", "lo", "hi"])?;
    let mut anchors = Csv::new(cfg, &["n", "i", "x", "y", "a_pow", "b_pow"])?;
    let mut rects = Csv::new(cfg, &["n", "i", "px", "py", "a_pow", "b_pow"])?;
    for n in cfg.levels() {
        deadline.check()?;
        let level = Level::build(&sys, n)?;
        for (k, iv) in level.intervals().iter().enumerate() {
            intervals.row(&[
                n.to_string(),
                (k + 1).to_string(),
                iv.num.to_string(),
                iv.den.to_string(),
                num(iv.lo()),
                num(iv.hi()),
            ]);
        }
        for (k, p) in level.anchors().iter().enumerate() {
            anchors.row(&[
                n.to_string(),
                (k + 1).to_string(),
                p.x.to_string(),
                p.y.to_string(),
                p.a_pow.to_string(),
                p.b_pow.to_string(),
            ]);
        }
        for r in level.rects() {
            rects.row(&[
                n.to_string(),
                r.i.to_string(),
                r.px.to_string(),
                r.py.to_string(),
                r.a_pow.to_string(),
                r.b_pow.to_string(),
            ]);
        }
    }
    let mut out = Vec::new();
    if cfg.output.wants("csv") {
        out.push(intervals.write(&dir.join("intervals.csv"))?);
        out.push(anchors.write(&dir.join("anchors.csv"))?);
        out.push(rects.write(&dir.join("rects.csv"))?);
    }
    if cfg.output.wants("json") {
        #[derive(Serialize)]
        struct Doc<'a> {
            system: &'a DigitSystem,
            s: f64,
        }
        let doc = Doc {
            system: &sys,
            s: sys.s(),
        };
        out.push(write_json(cfg, &doc, &dir.join("system.json"))?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CountFlags {
    /// Cross-check every cell against brute force.
    pub oracle: bool,
    /// Fill `elapsed_ms`; off by default so that outputs are reproducible.
    pub timing: bool,
}

fn sorted_rows(adj: &Adjacency) -> Vec<Vec<u32>> {
    adj.rows
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.sort_unstable();
            r
        })
        .collect()
}

pub fn cmd_count(cfg: &RunConfig, flags: CountFlags) -> Result<PathBuf> {
    let sys = cfg.validate()?;
    let deadline = cfg.deadline();
    let policy = cfg.policy();
    let cap = cfg.budget.pair_cap;
    let mut csv = Csv::new(
        cfg,
        &[
            "a",
            "b",
            "mode",
            "seed",
            "n",
            "delta",
            "theta",
            "omega_x",
            "omega_y",
            "L",
            "max_per_i",
            "method",
            "elapsed_ms",
        ],
    )?;
    for n in cfg.levels() {
        let level = Level::build(&sys, n)?;
        let delta = level.delta();
        let thetas = cfg.sweep.theta_grid.angles(delta);
        let rows = thetas
            .par_iter()
            .map(|&theta| -> Result<Vec<String>> {
                deadline.check()?;
                let omega = policy.omega(theta);
                let pair = RotatedPair::new(&level, theta, omega);
                let start = Instant::now();
                let adj = adjacency_fast(&pair.base, &pair.rotated, cap)?;
                let elapsed = start.elapsed();
                let mut method = "fast";
                if flags.oracle {
                    let brute = adjacency_bruteforce(&pair.base, &pair.rotated, cap)?;
                    if sorted_rows(&brute) != sorted_rows(&adj) {
                        return Err(Error::OracleMismatch(format!(
                            "n = {n}, θ = {theta}, ω = ({}, {}): fast L = {}, brute force L = {}",
                            omega.x,
                            omega.y,
                            adj.total(),
                            brute.total()
                        )));
                    }
                    method = "fast+oracle";
                }
                let elapsed_ms = if flags.timing {
                    num(elapsed.as_secs_f64() * 1e3)
                } else {
                    String::new()
                };
                Ok(vec![
                    sys.a().to_string(),
                    sys.b().to_string(),
                    cfg.system.mode.clone(),
                    seed_field(cfg),
                    n.to_string(),
                    num(delta),
                    num(theta),
                    num(omega.x),
                    num(omega.y),
                    adj.total().to_string(),
                    adj.max_row().to_string(),
                    method.to_string(),
                    elapsed_ms,
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        for r in &rows {
            csv.row(r);
        }
    }
    csv.write(&cfg.output.dir.join("counts.csv"))
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifySummary {
    /// All exact-constant checks passed.
    pub exit_ok: bool,
    pub instances: u64,
    pub lemmas: Vec<BoundReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn lemma_rank(name: &str) -> usize {
    LEMMA_ORDER
        .iter()
        .position(|l| *l == name)
        .unwrap_or(LEMMA_ORDER.len())
}

/// Runs the exact and fitted checks over the sweep. Writes `report.json`.
pub fn cmd_verify(cfg: &RunConfig, fault: Fault) -> Result<(VerifySummary, Option<PathBuf>)> {
    let sys = cfg.validate()?;
    let deadline = cfg.deadline();
    let policy = cfg.policy();
    let cap = cfg.budget.pair_cap;
    let mut reports = Vec::new();
    let mut instances = 0u64;
    let mut above_one = 0u64;
    for n in cfg.levels() {
        let level = Level::build(&sys, n)?;
        let thetas = cfg.sweep.theta_grid.angles(level.delta());
        let checks = thetas
            .par_iter()
            .map(|&t| -> Result<InstanceCheck> {
                deadline.check()?;
                verify_instance(&sys, &level, t, policy.omega(t), cap, fault)
            })
            .collect::<Result<Vec<_>>>()?;
        for c in checks {
            instances += 1;
            above_one += c.above_one as u64;
            reports.extend(c.reports);
        }
        deadline.check()?;
        reports.extend(verify_count_bounds(
            &sys,
            n..=n,
            &thetas,
            &[Vec2::ZERO],
            cap,
        )?);
    }
    reports.push(verify_lemma_simple3(cfg.sweep.simple3_samples, cfg.seed()));

    let mut lemmas = merge_reports(reports);
    lemmas.retain(|r| r.instances > 0);
    for r in &mut lemmas {
        if r.kind == BoundKind::Fitted {
            r.finish_fitted();
        }
    }
    lemmas.sort_by_key(|r| lemma_rank(&r.lemma));
    let mut notes = Vec::new();
    if above_one > 0 {
        notes.push(format!(
            "{above_one} instances with θ > 1: ladder checks (mtheta, lip, langle, cl1) skipped"
        ));
    }
    let summary = VerifySummary {
        exit_ok: lemmas
            .iter()
            .filter(|r| r.kind == BoundKind::Exact)
            .all(|r| r.pass),
        instances,
        lemmas,
        notes,
    };
    let path = if cfg.output.wants("json") {
        Some(write_json(
            cfg,
            &summary,
            &cfg.output.dir.join("report.json"),
        )?)
    } else {
        None
    };
    Ok((summary, path))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeRow {
    pub quantity: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Least-squares slope of `log value` against `log(1/δ)`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub residual: Option<f64>,
    /// Exponent `e` of the predicted bound, read as `value ≲ δ^{-e}` for
    /// counts and `value ≲ δ^{e}` for areas.
    pub predicted_exponent: f64,
    /// The same prediction as a slope against `log(1/δ)`.
    pub predicted_slope: f64,
    /// `(log(1/δ), log value)`.
    pub points: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AreaLevel {
    pub n: u32,
    pub delta: f64,
    pub fixed_inner: f64,
    pub fixed_outer: f64,
    /// `fixed_outer / (δ^e log(1/δ))` with the predicted area exponent `e`.
    pub normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanSummary {
    pub s: f64,
    pub theorem_floor: f64,
    pub predicted_area_exponent: f64,
    pub rows: Vec<SlopeRow>,
    pub area_levels: Vec<AreaLevel>,
    /// Largest over smallest normalized area sum.
    pub area_spread: f64,
}

fn slope_row(
    quantity: &str,
    theta: Option<f64>,
    pts: Vec<[f64; 2]>,
    exp: f64,
    slope: f64,
) -> SlopeRow {
    let fit = fit_exponent(&pts.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>()).ok();
    SlopeRow {
        quantity: quantity.into(),
        theta,
        slope: fit.map(|f| f.slope),
        intercept: fit.map(|f| f.intercept),
        residual: fit.map(|f| f.residual),
        predicted_exponent: exp,
        predicted_slope: slope,
        points: pts,
    }
}

/// Area exponent of the overlap sum: `1/s - 1` above `s₀`, else `1 - s²`.
pub fn predicted_area_exponent(s: f64) -> f64 {
    if s > S0 {
        1.0 / s - 1.0
    } else {
        1.0 - s * s
    }
}

/// Level sweeps with fitted slopes. Writes `slopes.json`, `areas.csv` and
/// `chain.json`.
pub fn cmd_scan(cfg: &RunConfig) -> Result<(ScanSummary, Vec<PathBuf>)> {
    let sys = cfg.validate()?;
    let deadline = cfg.deadline();
    let levels: Vec<u32> = cfg.levels().collect();
    if levels.len() < 3 {
        return Err(Error::TooFewPoints(levels.len()));
    }
    let s = sys.s();
    let area_exp = predicted_area_exponent(s);
    let policy = cfg.policy();
    let cap = cfg.budget.pair_cap;

    // angle bits ↦ points; only angles present at every level are fitted
    let mut by_theta: BTreeMap<u64, Vec<[f64; 2]>> = BTreeMap::new();
    let mut theta_order: Vec<f64> = Vec::new();
    let mut area_pts = Vec::new();
    let mut easy_pts = Vec::new();
    let mut area_levels = Vec::new();
    let mut areas = Csv::new(
        cfg,
        &[
            "n",
            "delta",
            "phi",
            "pair_sum_upper",
            "union_inner",
            "union_outer",
            "resolution",
        ],
    )?;
    for &n in &levels {
        deadline.check()?;
        let level = Level::build(&sys, n)?;
        let delta = level.delta();
        let x = (1.0 / delta).ln();
        let thetas: Vec<f64> = cfg
            .sweep
            .theta_grid
            .angles(delta)
            .into_iter()
            .filter(|&t| t > 0.0)
            .collect();
        if n == levels[0] {
            theta_order = thetas.clone();
        }
        let ls = thetas
            .par_iter()
            .map(|&t| {
                Ok(RotatedPair::new(&level, t, policy.omega(t))
                    .adjacency(cap)?
                    .total())
            })
            .collect::<Result<Vec<u64>>>()?;
        for (&t, &l) in thetas.iter().zip(&ls) {
            let e = by_theta.entry(t.to_bits()).or_default();
            if l > 0 {
                e.push([x, (l as f64).ln()]);
            }
        }

        deadline.check()?;
        let ec = ensemble(cfg, &sys, n);
        let ds = double_sum(&ec)?;
        area_pts.push([x, ds.fixed[1].ln()]);
        area_levels.push(AreaLevel {
            n,
            delta,
            fixed_inner: ds.fixed[0],
            fixed_outer: ds.fixed[1],
            normalized: ds.fixed[1] / (delta.powf(area_exp) * x),
        });
        let easy = easy_bound_check(&ec, cap)?;
        easy_pts.push([x, easy.sum_eff.ln()]);

        let profile = pair_overlap_profile(
            &ec,
            &ProfileOptions {
                pair_sum: true,
                raster_cell: None,
                raster_cap: cfg.budget.raster_cap,
            },
        )?;
        for e in profile {
            areas.row(&[
                n.to_string(),
                num(delta),
                num(e.phi),
                e.pair_sum_upper.map(num).unwrap_or_default(),
                num(e.overlap.inner()),
                num(e.overlap.outer()),
                "0".into(),
            ]);
        }
    }

    let mut rows = Vec::new();
    for t in theta_order {
        let pts = by_theta.remove(&t.to_bits()).unwrap_or_default();
        rows.push(slope_row("count", Some(t), pts, s * s, s * s));
    }
    rows.push(slope_row("area_sum", None, area_pts, area_exp, -area_exp));
    rows.push(slope_row("easy_bound", None, easy_pts, 1.0 - s, -(1.0 - s)));
    let norms: Vec<f64> = area_levels.iter().map(|a| a.normalized).collect();
    let area_spread = norms.iter().copied().fold(0.0, f64::max)
        / norms.iter().copied().fold(f64::INFINITY, f64::min);
    let summary = ScanSummary {
        s,
        theorem_floor: theorem_floor(s),
        predicted_area_exponent: area_exp,
        rows,
        area_levels,
        area_spread,
    };

    let chain_top = cfg.sweep.n_max.min(cfg.sweep.chain_n_max);
    let mut chains: Vec<ChainReport> = Vec::new();
    for n in cfg.sweep.n_min..=chain_top {
        deadline.check()?;
        chains.push(minkowski_chain(
            &ensemble(cfg, &sys, n),
            &ChainOptions::default(),
        )?);
    }

    let dir = &cfg.output.dir;
    let mut out = Vec::new();
    if cfg.output.wants("json") {
        out.push(write_json(cfg, &summary, &dir.join("slopes.json"))?);
        #[derive(Serialize)]
        struct Chains<'a> {
            instances: &'a [ChainReport],
        }
        out.push(write_json(
            cfg,
            &Chains { instances: &chains },
            &dir.join("chain.json"),
        )?);
    }
    if cfg.output.wants("csv") {
        out.push(areas.write(&dir.join("areas.csv"))?);
    }
    Ok((summary, out))
}

const ARTIFACTS: [&str; 9] = [
    "report.json",
    "slopes.json",
    "chain.json",
    "counts.csv",
    "areas.csv",
    "intervals.csv",
    "anchors.csv",
    "rects.csv",
    "system.json",
];

fn read_json(path: &Path) -> Result<Value> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn cell(v: &Value) -> String {
    match v {
        Value::Number(x) => x.as_f64().map(num).unwrap_or_else(|| x.to_string()),
        Value::Bool(b) => b.to_string(),
        Value::String(s) => s.clone(),
        Value::Null => "null".into(),
        other => other.to_string(),
    }
}

fn data_rows(path: &Path) -> Result<usize> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .count()
        .saturating_sub(1))
}

/// Renders the artifacts in `dir` as markdown and writes `summary.md`.
pub fn cmd_report(dir: &Path) -> Result<String> {
    if !dir.is_dir() {
        return Err(Error::MissingInput(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    let present: Vec<&str> = ARTIFACTS
        .iter()
        .copied()
        .filter(|f| dir.join(f).is_file())
        .collect();
    if present.is_empty() {
        return Ok("no artifacts\n".into());
    }

    let mut md = String::from("# Summary\n\n| artifact | status |\n|---|---|\n");
    for f in ARTIFACTS {
        let status = if !present.contains(&f) {
            "absent".to_string()
        } else if f.ends_with(".csv") {
            format!("{} rows", data_rows(&dir.join(f))?)
        } else {
            "present".to_string()
        };
        let _ = writeln!(md, "| {f} | {status} |");
    }

    md.push_str("\n## Lemmas\n\n");
    let report = if present.contains(&"report.json") {
        Some(read_json(&dir.join("report.json"))?)
    } else {
        None
    };
    if let Some(r) = &report {
        let _ = writeln!(md, "exit_ok: {}\n", cell(&r["exit_ok"]));
    }
    md.push_str("| lemma | kind | instances | measured max | bound | constant | result |\n");
    md.push_str("|---|---|---|---|---|---|---|\n");
    let lemmas = report
        .as_ref()
        .and_then(|r| r["lemmas"].as_array().cloned())
        .unwrap_or_default();
    for name in LEMMA_ORDER {
        match lemmas.iter().find(|l| l["lemma"] == name) {
            Some(l) => {
                let result = if l["pass"] == true { "PASS" } else { "FAIL" };
                let _ = writeln!(
                    md,
                    "| {name} | {} | {} | {} | {} | {} | {result} |",
                    cell(&l["kind"]),
                    cell(&l["instances"]),
                    cell(&l["measured_max"]),
                    cell(&l["bound"]),
                    cell(&l["constant"])
                );
            }
            None => {
                let _ = writeln!(md, "| {name} | | | | | | absent |");
            }
        }
    }
    if let Some(notes) = report.as_ref().and_then(|r| r["notes"].as_array()) {
        for n in notes {
            let _ = writeln!(md, "\n- {}", cell(n));
        }
    }

    if present.contains(&"slopes.json") {
        let v = read_json(&dir.join("slopes.json"))?;
        md.push_str("\n## Slopes\n\n| quantity | θ | slope | predicted exponent | residual |\n");
        md.push_str("|---|---|---|---|---|\n");
        for r in v["rows"].as_array().into_iter().flatten() {
            let theta = if r["theta"].is_null() {
                String::new()
            } else {
                cell(&r["theta"])
            };
            let _ = writeln!(
                md,
                "| {} | {theta} | {} | {} | {} |",
                cell(&r["quantity"]),
                cell(&r["slope"]),
                cell(&r["predicted_exponent"]),
                cell(&r["residual"])
            );
        }
        let _ = writeln!(md, "\narea spread: {}", cell(&v["area_spread"]));
    }

    if present.contains(&"chain.json") {
        let v = read_json(&dir.join("chain.json"))?;
        md.push_str(
            "\n## Chain\n\n| n | lhs | mid outer | rhs outer | holds | implied dim stat |\n",
        );
        md.push_str("|---|---|---|---|---|---|\n");
        for c in v["instances"].as_array().into_iter().flatten() {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} |",
                cell(&c["n"]),
                cell(&c["lhs"]),
                cell(&c["mid_bracket"][1]),
                cell(&c["rhs_bracket"][1]),
                cell(&c["holds"]),
                cell(&c["implied_dim_stat"])
            );
        }
    }

    write_atomic(&dir.join("summary.md"), md.as_bytes())?;
    Ok(md)
}
