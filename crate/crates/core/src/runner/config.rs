use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cantor::DigitSystem;
use crate::ensemble::{angle_set, TranslationPolicy};
use crate::error::{Error, Result};
use crate::geometry::DEFAULT_RASTER_CAP;
use crate::intersections::DEFAULT_PAIR_CAP;

fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Angles to sweep at each level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ThetaGrid {
    /// `K` evenly spaced angles `kπ/(K-1)` covering `[0, π]`.
    Grid(u32),
    List(Vec<f64>),
    /// The angle set `{kδ}` of the level.
    Delta,
}

impl ThetaGrid {
    pub fn angles(&self, delta: f64) -> Vec<f64> {
        match self {
            ThetaGrid::Grid(0) => Vec::new(),
            ThetaGrid::Grid(1) => vec![0.0],
            ThetaGrid::Grid(k) => (0..*k)
                .map(|i| i as f64 * std::f64::consts::PI / (*k - 1) as f64)
                .collect(),
            ThetaGrid::List(v) => v.clone(),
            ThetaGrid::Delta => angle_set(delta).angles,
        }
    }
}

impl FromStr for ThetaGrid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s == "delta" {
            return Ok(ThetaGrid::Delta);
        }
        if let Some(k) = s.strip_prefix("grid:") {
            return k
                .trim()
                .parse()
                .map(ThetaGrid::Grid)
                .map_err(|_| format!("`{k}` is not a point count"));
        }
        if let Some(list) = s.strip_prefix("list:") {
            let mut out = Vec::new();
            for t in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                let v: f64 = t.parse().map_err(|_| format!("`{t}` is not a number"))?;
                if !(0.0..=std::f64::consts::PI).contains(&v) {
                    return Err(format!("angle {v} is outside [0, π]"));
                }
                out.push(v);
            }
            return Ok(ThetaGrid::List(out));
        }
        Err(format!(
            "expected `grid:K`, `list:θ1,θ2,…` or `delta`, got `{s}`"
        ))
    }
}

impl TryFrom<String> for ThetaGrid {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl fmt::Display for ThetaGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaGrid::Grid(k) => write!(f, "grid:{k}"),
            ThetaGrid::List(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "list:{}", parts.join(","))
            }
            ThetaGrid::Delta => f.write_str("delta"),
        }
    }
}

impl From<ThetaGrid> for String {
    fn from(g: ThetaGrid) -> String {
        g.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum OmegaSpec {
    Zero,
    /// One seeded translation per angle, uniform in the disc of this radius.
    Random(f64),
}

impl OmegaSpec {
    pub fn policy(&self, seed: u64) -> TranslationPolicy {
        match *self {
            OmegaSpec::Zero => TranslationPolicy::Zero,
            OmegaSpec::Random(radius) => TranslationPolicy::SeededRandom { seed, radius },
        }
    }
}

impl FromStr for OmegaSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s == "zero" {
            return Ok(OmegaSpec::Zero);
        }
        if let Some(r) = s.strip_prefix("random:") {
            let v: f64 = r
                .trim()
                .parse()
                .map_err(|_| format!("`{r}` is not a radius"))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("radius {v} must be finite and non-negative"));
            }
            return Ok(OmegaSpec::Random(v));
        }
        Err(format!("expected `zero` or `random:R`, got `{s}`"))
    }
}

impl TryFrom<String> for OmegaSpec {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<OmegaSpec> for String {
    fn from(o: OmegaSpec) -> String {
        match o {
            OmegaSpec::Zero => "zero".into(),
            OmegaSpec::Random(r) => format!("random:{r}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemBlock {
    pub a: u32,
    pub b: u32,
    /// `staircase`, `self_similar` or `seeded_random`.
    pub mode: String,
    /// The run seed: drives random digit systems and random translations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(rename = "J", skip_serializing_if = "Option::is_none")]
    pub digits: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<u32>>,
}

impl Default for SystemBlock {
    fn default() -> Self {
        Self {
            a: 3,
            b: 2,
            mode: "staircase".into(),
            seed: None,
            digits: None,
            sigma: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    pub n_min: u32,
    pub n_max: u32,
    pub theta_grid: ThetaGrid,
    pub omega: OmegaSpec,
    /// Random `(z, θ)` samples for the rotation estimates in `verify`.
    pub simple3_samples: u64,
    /// Largest level for the measure chain in `scan`.
    pub chain_n_max: u32,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            n_min: 1,
            n_max: 4,
            theta_grid: ThetaGrid::Grid(256),
            omega: OmegaSpec::Zero,
            simple3_samples: 10_000,
            chain_n_max: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
    /// Subset of `csv`, `json`.
    pub formats: Vec<String>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

impl OutputBlock {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetBlock {
    pub pair_cap: u64,
    pub raster_cap: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_secs: Option<f64>,
}

impl Default for BudgetBlock {
    fn default() -> Self {
        Self {
            pair_cap: DEFAULT_PAIR_CAP,
            raster_cap: DEFAULT_RASTER_CAP,
            wall_clock_secs: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemBlock,
    pub sweep: SweepBlock,
    pub output: OutputBlock,
    pub budget: BudgetBlock,
}

/// Command-line values that replace config fields when present.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub a: Option<u32>,
    pub b: Option<u32>,
    pub mode: Option<String>,
    pub seed: Option<u64>,
    pub n: Option<u32>,
    pub n_range: Option<(u32, u32)>,
    pub theta_grid: Option<ThetaGrid>,
    pub omega: Option<OmegaSpec>,
    pub out: Option<PathBuf>,
    pub pair_cap: Option<u64>,
    pub raster_cap: Option<u64>,
}

/// Parses `A..B` or `A..=B`, both inclusive.
pub fn parse_n_range(s: &str) -> std::result::Result<(u32, u32), String> {
    let (lo, hi) = s
        .split_once("..=")
        .or_else(|| s.split_once(".."))
        .ok_or_else(|| format!("expected `A..B`, got `{s}`"))?;
    let lo = lo
        .trim()
        .parse()
        .map_err(|_| format!("`{lo}` is not a level"))?;
    let hi = hi
        .trim()
        .parse()
        .map_err(|_| format!("`{hi}` is not a level"))?;
    Ok((lo, hi))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_err("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(a) = o.a {
            self.system.a = a;
        }
        if let Some(b) = o.b {
            self.system.b = b;
        }
        if let Some(m) = &o.mode {
            self.system.mode = m.clone();
        }
        if let Some(s) = o.seed {
            self.system.seed = Some(s);
        }
        if let Some((lo, hi)) = o.n_range {
            self.sweep.n_min = lo;
            self.sweep.n_max = hi;
        }
        if let Some(n) = o.n {
            self.sweep.n_min = n;
            self.sweep.n_max = n;
        }
        if let Some(g) = &o.theta_grid {
            self.sweep.theta_grid = g.clone();
        }
        if let Some(w) = o.omega {
            self.sweep.omega = w;
        }
        if let Some(d) = &o.out {
            self.output.dir = d.clone();
        }
        if let Some(c) = o.pair_cap {
            self.budget.pair_cap = c;
        }
        if let Some(c) = o.raster_cap {
            self.budget.raster_cap = c;
        }
    }

    pub fn seed(&self) -> u64 {
        self.system.seed.unwrap_or(0)
    }

    pub fn policy(&self) -> TranslationPolicy {
        self.sweep.omega.policy(self.seed())
    }

    pub fn levels(&self) -> std::ops::RangeInclusive<u32> {
        self.sweep.n_min..=self.sweep.n_max
    }

    /// Checks every block and builds the digit system.
    pub fn validate(&self) -> Result<DigitSystem> {
        let sys = &self.system;
        if sys.a < 3 {
            return Err(config_err(
                "system.a",
                format!("{} must be at least 3", sys.a),
            ));
        }
        if sys.b < 2 || sys.b >= sys.a {
            return Err(config_err(
                "system.b",
                format!("{} must satisfy 2 <= b < a = {}", sys.b, sys.a),
            ));
        }
        let mut doc = json!({ "a": sys.a, "b": sys.b, "mode": sys.mode });
        match sys.mode.as_str() {
            "staircase" | "self_similar" => {
                if sys.mode == "self_similar" && sys.digits.is_none() {
                    return Err(config_err(
                        "system.J",
                        "self_similar mode needs a digit set",
                    ));
                }
                if sys.mode == "staircase" && sys.sigma.is_some() {
                    return Err(config_err("system.sigma", "staircase mode fixes sigma"));
                }
                if let Some(d) = &sys.digits {
                    doc["J"] = json!(d);
                }
                if let Some(s) = &sys.sigma {
                    doc["sigma"] = json!(s);
                }
            }
            "seeded_random" => {
                let Some(seed) = sys.seed else {
                    return Err(config_err("system.seed", "seeded_random mode needs a seed"));
                };
                if sys.digits.is_some() || sys.sigma.is_some() {
                    return Err(config_err(
                        "system.J",
                        "seeded_random mode draws J and sigma from the seed",
                    ));
                }
                doc["seed"] = json!(seed);
            }
            other => {
                return Err(config_err(
                    "system.mode",
                    format!("unknown mode `{other}`; use staircase, self_similar or seeded_random"),
                ))
            }
        }
        let system: DigitSystem =
            serde_json::from_value(doc).map_err(|e| config_err("system", e.to_string()))?;

        let sw = &self.sweep;
        if sw.n_min > sw.n_max {
            return Err(config_err(
                "sweep.n_min",
                format!("{} exceeds n_max = {}", sw.n_min, sw.n_max),
            ));
        }
        if let ThetaGrid::List(v) = &sw.theta_grid {
            if let Some(t) = v
                .iter()
                .find(|t| !(0.0..=std::f64::consts::PI).contains(*t))
            {
                return Err(config_err(
                    "sweep.theta_grid",
                    format!("angle {t} is outside [0, π]"),
                ));
            }
        }
        if let OmegaSpec::Random(r) = sw.omega {
            if !(r.is_finite() && r >= 0.0) {
                return Err(config_err("sweep.omega", format!("radius {r} is invalid")));
            }
        }

        if self.output.dir.as_os_str().is_empty() {
            return Err(config_err("output.dir", "must not be empty"));
        }
        if let Some(f) = self
            .output
            .formats
            .iter()
            .find(|f| *f != "csv" && *f != "json")
        {
            return Err(config_err(
                "output.formats",
                format!("unknown format `{f}`"),
            ));
        }

        let b = &self.budget;
        if b.pair_cap == 0 {
            return Err(config_err("budget.pair_cap", "must be positive"));
        }
        if b.raster_cap == 0 {
            return Err(config_err("budget.raster_cap", "must be positive"));
        }
        if let Some(w) = b.wall_clock_secs {
            if !(w.is_finite() && w > 0.0) {
                return Err(config_err(
                    "budget.wall_clock_secs",
                    format!("{w} must be positive"),
                ));
            }
        }
        Ok(system)
    }

    pub fn deadline(&self) -> Deadline {
        Deadline {
            start: Instant::now(),
            secs: self.budget.wall_clock_secs,
        }
    }
}

/// Wall-clock budget, checked between tasks.
#[derive(Clone, Copy, Debug)]
pub struct Deadline {
    start: Instant,
    secs: Option<f64>,
}

impl Deadline {
    pub fn check(&self) -> Result<()> {
        match self.secs {
            Some(s) if self.start.elapsed().as_secs_f64() > s => Err(Error::WallClock(s)),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_parse_and_print() {
        for s in ["grid:256", "list:0.2,0.5", "list:", "delta"] {
            let g: ThetaGrid = s.parse().unwrap();
            assert_eq!(g.to_string(), s);
        }
        assert_eq!(ThetaGrid::Grid(3).angles(0.1)[2], std::f64::consts::PI);
        assert!(ThetaGrid::Grid(0).angles(0.1).is_empty());
        assert!("list:4".parse::<ThetaGrid>().is_err());
        assert!("cone:2".parse::<ThetaGrid>().is_err());
        assert_eq!(
            "random:0.5".parse::<OmegaSpec>().unwrap(),
            OmegaSpec::Random(0.5)
        );
        assert!("random:-1".parse::<OmegaSpec>().is_err());
    }

    #[test]
    fn defaults_validate() {
        let sys = RunConfig::default().validate().unwrap();
        assert_eq!((sys.a(), sys.b()), (3, 2));
    }

    #[test]
    fn field_level_errors() {
        let field = |cfg: RunConfig| match cfg.validate() {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected a config error, got {other:?}"),
        };
        let mut c = RunConfig::default();
        c.system.b = 3;
        assert_eq!(field(c), "system.b");
        let mut c = RunConfig::default();
        c.system.mode = "seeded_random".into();
        assert_eq!(field(c), "system.seed");
        let mut c = RunConfig::default();
        c.sweep.n_min = 5;
        assert_eq!(field(c), "sweep.n_min");
        let mut c = RunConfig::default();
        c.system.digits = Some(vec![0, 0]);
        assert_eq!(field(c), "system");
        let mut c = RunConfig::default();
        c.budget.pair_cap = 0;
        assert_eq!(field(c), "budget.pair_cap");
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let c =
            RunConfig::from_json(r#"{"system":{"a":5,"b":3},"sweep":{"theta_grid":"list:0.1"}}"#)
                .unwrap();
        assert_eq!(c.system.a, 5);
        assert_eq!(c.sweep.n_max, 4);
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(RunConfig::from_json(r#"{"sweep":{"nmax":3}}"#).is_err());
    }

    #[test]
    fn overrides_win() {
        let mut c = RunConfig::default();
        c.apply(&Overrides {
            a: Some(4),
            n: Some(2),
            omega: Some(OmegaSpec::Random(0.25)),
            ..Default::default()
        });
        assert_eq!((c.system.a, c.sweep.n_min, c.sweep.n_max), (4, 2, 2));
        assert_eq!(c.sweep.omega, OmegaSpec::Random(0.25));
        assert_eq!(parse_n_range("3..7").unwrap(), (3, 7));
        assert_eq!(parse_n_range("3..=7").unwrap(), (3, 7));
        assert!(parse_n_range("3").is_err());
    }
}
