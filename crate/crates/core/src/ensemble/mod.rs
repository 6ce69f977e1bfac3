//! Angle families, rotated copies of the rectangle approximation, overlap
//! sums over pairs of angles, and the Cauchy–Schwarz measure chain.

mod chain;
mod overlap;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use chain::{
    easy_bound_check, gamma_discs, gamma_neighborhood_measure, minkowski_chain, ChainOptions,
    ChainReport, EasyBound, GammaMeasure, GAMMA_EXTRA_DEPTH,
};
pub use overlap::{
    double_sum, pair_overlap_profile, BoxFamily, DoubleSum, Overlap, ProfileEntry, ProfileOptions,
};

use crate::cantor::{splitmix64, DigitSystem};
use crate::geometry::{Vec2, DEFAULT_RASTER_CAP};

/// `(√5 - 1)/2`, where `2 - s² = 1/s`.
pub const S0: f64 = 0.618_033_988_749_894_9;

/// `min(2 - s², 1/s)`.
pub fn theorem_floor(s: f64) -> f64 {
    (2.0 - s * s).min(1.0 / s)
}

/// The grid `{kδ : 0 ≤ k ≤ ⌊π/δ⌋}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngleSet {
    pub delta: f64,
    pub angles: Vec<f64>,
}

impl AngleSet {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Largest index `K`.
    pub fn k_max(&self) -> u64 {
        self.angles.len() as u64 - 1
    }
}

pub fn angle_set(delta: f64) -> AngleSet {
    assert!(
        delta > 0.0 && delta < PI,
        "angle spacing must lie in (0, π), got {delta}"
    );
    let k_max = (PI / delta).floor() as u64;
    AngleSet {
        delta,
        angles: (0..=k_max).map(|k| k as f64 * delta).collect(),
    }
}

/// Choice of translations `ω_θ`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum TranslationPolicy {
    #[default]
    Zero,
    /// Uniform in the disc of radius `radius`, a pure function of
    /// `(seed, θ)`.
    SeededRandom { seed: u64, radius: f64 },
    /// Listed `(θ, ω)` pairs; angles not listed get `ω = 0`.
    Explicit { table: Vec<(f64, Vec2)> },
}

impl TranslationPolicy {
    pub fn is_zero(&self) -> bool {
        match self {
            TranslationPolicy::Zero => true,
            TranslationPolicy::SeededRandom { radius, .. } => *radius == 0.0,
            TranslationPolicy::Explicit { table } => table.iter().all(|(_, w)| *w == Vec2::ZERO),
        }
    }

    pub fn omega(&self, theta: f64) -> Vec2 {
        match self {
            TranslationPolicy::Zero => Vec2::ZERO,
            TranslationPolicy::SeededRandom { seed, radius } => {
                let h = splitmix64(splitmix64(*seed ^ 0x6f_6d65_6761) ^ theta.to_bits());
                let mut rng = ChaCha8Rng::seed_from_u64(h);
                let r = radius * rng.gen::<f64>().sqrt();
                let phi = rng.gen_range(0.0..std::f64::consts::TAU);
                Vec2::new(r * phi.cos(), r * phi.sin())
            }
            TranslationPolicy::Explicit { table } => table
                .iter()
                .find(|(t, _)| *t == theta)
                .map_or(Vec2::ZERO, |(_, w)| *w),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleConfig {
    pub sys: DigitSystem,
    pub n: u32,
    pub policy: TranslationPolicy,
    pub raster_cap: u64,
}

impl EnsembleConfig {
    pub fn new(sys: DigitSystem, n: u32) -> Self {
        Self {
            sys,
            n,
            policy: TranslationPolicy::Zero,
            raster_cap: DEFAULT_RASTER_CAP,
        }
    }

    pub fn with_policy(mut self, policy: TranslationPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// `δ = a^{-n}`.
    pub fn delta(&self) -> f64 {
        (self.sys.a() as f64).powi(-(self.n as i32))
    }

    pub fn angles(&self) -> AngleSet {
        angle_set(self.delta())
    }
}
