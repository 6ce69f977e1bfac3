use thiserror::Error;

/// Errors produced by the construction, counting and verification layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid digit system: {0}")]
    InvalidSystem(String),

    #[error("enumeration cap exceeded: level {level} needs {requested} cells, cap is {cap}")]
    EnumerationCap {
        level: u32,
        requested: u128,
        cap: u64,
    },

    #[error("lattice overflow: {base}^{level} does not fit in 64-bit coordinates")]
    LatticeOverflow { base: u32, level: u32 },

    #[error("split level {m} out of range 0..={n}")]
    SplitLevel { m: u32, n: u32 },

    #[error("index {index} out of range 1..={count}")]
    IndexRange { index: u64, count: u64 },

    #[error("degenerate rectangle: {0}")]
    Degenerate(String),

    #[error("pair budget exceeded: {requested} pair tests requested, cap is {cap}")]
    PairBudget { requested: u128, cap: u64 },

    #[error("raster cap exceeded: {requested} cells requested, cap is {cap}")]
    RasterCap { requested: u128, cap: u64 },

    #[error("angle {theta} outside the admissible range {range}")]
    AngleRange { theta: f64, range: &'static str },

    #[error("regime mismatch: {0}")]
    Regime(String),

    #[error("fine part {0} is not realizable at this split level")]
    Unrealizable(String),

    #[error("missing corner data: {0}")]
    MissingCorners(String),

    #[error("fit needs ≥3 points, got {0}")]
    TooFewPoints(usize),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("wall-clock budget of {0} s exceeded")]
    WallClock(f64),

    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
