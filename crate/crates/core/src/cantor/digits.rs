//! Digit systems: the base `a`, branch count `b`, and the per-node digit sets
//! and vertical bijections that define a Cantor set and its Cantor graph.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAG_DIGITS: u64 = 0x4a5f_6469_6769_7473;
const TAG_SIGMA: u64 = 0x5f73_6967_6d61_5f5f;

/// How the digit sets `J_(w)` and bijections `σ_(w)` depend on the word `w`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    /// The same digit set and bijection at every node. `sigma[k]` is the
    /// vertical rank assigned to `digits[k]`.
    SelfSimilar { digits: Vec<u32>, sigma: Vec<u32> },
    /// Digit sets and bijections drawn per node from a shuffle keyed by
    /// `(seed, word)`.
    SeededRandom { seed: u64 },
}

/// The digit set of one node together with the vertical rank of each digit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Branch {
    /// Sorted ascending, exactly `b` entries.
    pub digits: Vec<u32>,
    /// `ranks[k] = σ(digits[k])`, a permutation of `0..b`.
    pub ranks: Vec<u32>,
}

impl Branch {
    pub fn rank_of(&self, digit: u32) -> Option<u32> {
        self.digits
            .iter()
            .position(|&d| d == digit)
            .map(|k| self.ranks[k])
    }
}

/// Parameters `(a, b, J, σ)` of a generalized Cantor set and Cantor graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SystemDoc", into = "SystemDoc")]
pub struct DigitSystem {
    a: u32,
    b: u32,
    mode: Mode,
}

impl DigitSystem {
    pub fn self_similar(a: u32, b: u32, digits: Vec<u32>, sigma: Vec<u32>) -> Result<Self> {
        check_bases(a, b)?;
        check_branch(a, b, &digits, &sigma)?;
        Ok(Self {
            a,
            b,
            mode: Mode::SelfSimilar { digits, sigma },
        })
    }

    /// Self-similar system with order-preserving bijections: the classical
    /// devil's staircase over the given digit set.
    pub fn staircase(a: u32, b: u32, digits: Vec<u32>) -> Result<Self> {
        Self::self_similar(a, b, digits, (0..b).collect())
    }

    /// Staircase over the evenly spread digit set `{⌊k(a-1)/(b-1)⌋}`; for
    /// `a = 3, b = 2` this is the middle-thirds Cantor function.
    pub fn standard_staircase(a: u32, b: u32) -> Result<Self> {
        check_bases(a, b)?;
        let digits = (0..b)
            .map(|k| (k as u64 * (a as u64 - 1) / (b as u64 - 1)) as u32)
            .collect();
        Self::staircase(a, b, digits)
    }

    pub fn seeded(a: u32, b: u32, seed: u64) -> Result<Self> {
        check_bases(a, b)?;
        Ok(Self {
            a,
            b,
            mode: Mode::SeededRandom { seed },
        })
    }

    pub fn a(&self) -> u32 {
        self.a
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    /// Similarity dimension `log b / log a`.
    pub fn s(&self) -> f64 {
        (self.b as f64).ln() / (self.a as f64).ln()
    }

    pub fn mode_name(&self) -> &'static str {
        match self.mode {
            Mode::SelfSimilar { .. } => "self_similar",
            Mode::SeededRandom { .. } => "seeded_random",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self.mode {
            Mode::SeededRandom { seed } => Some(seed),
            Mode::SelfSimilar { .. } => None,
        }
    }

    /// Digit set and bijection at the node reached by a word of length
    /// `depth` whose base-`a` value is `prefix`.
    ///
    /// `(depth, prefix)` is the canonical length-prefixed encoding of the
    /// word, so the oracle is a pure function of the word.
    pub fn branch(&self, depth: u32, prefix: u128) -> Branch {
        match &self.mode {
            Mode::SelfSimilar { digits, sigma } => {
                let mut pairs: Vec<(u32, u32)> =
                    digits.iter().copied().zip(sigma.iter().copied()).collect();
                pairs.sort_unstable();
                Branch {
                    digits: pairs.iter().map(|p| p.0).collect(),
                    ranks: pairs.iter().map(|p| p.1).collect(),
                }
            }
            Mode::SeededRandom { seed } => {
                let mut pool: Vec<u32> = (0..self.a).collect();
                pool.shuffle(&mut node_rng(*seed, TAG_DIGITS, depth, prefix));
                let mut digits = pool[..self.b as usize].to_vec();
                digits.sort_unstable();
                let mut ranks: Vec<u32> = (0..self.b).collect();
                ranks.shuffle(&mut node_rng(*seed, TAG_SIGMA, depth, prefix));
                Branch { digits, ranks }
            }
        }
    }

    /// Digit set `J_(w)` of an admissible word.
    pub fn digit_set(&self, word: &Word) -> Vec<u32> {
        self.branch(word.len() as u32, word.value(self.a)).digits
    }

    /// `σ_(w)(digit)`, or `None` when the digit is not in `J_(w)`.
    pub fn sigma(&self, word: &Word, digit: u32) -> Option<u32> {
        self.branch(word.len() as u32, word.value(self.a))
            .rank_of(digit)
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn node_rng(seed: u64, tag: u64, depth: u32, prefix: u128) -> ChaCha8Rng {
    let mut h = splitmix64(seed ^ tag);
    h = splitmix64(h ^ depth as u64);
    h = splitmix64(h ^ (prefix >> 64) as u64);
    h = splitmix64(h ^ prefix as u64);
    ChaCha8Rng::seed_from_u64(h)
}

fn check_bases(a: u32, b: u32) -> Result<()> {
    if a < 3 {
        return Err(Error::InvalidSystem(format!("a = {a} must be at least 3")));
    }
    if b < 2 || b >= a {
        return Err(Error::InvalidSystem(format!(
            "b = {b} must satisfy 2 <= b < a = {a}"
        )));
    }
    Ok(())
}

fn check_branch(a: u32, b: u32, digits: &[u32], sigma: &[u32]) -> Result<()> {
    if digits.len() != b as usize {
        return Err(Error::InvalidSystem(format!(
            "digit set has {} entries, expected b = {b}",
            digits.len()
        )));
    }
    if let Some(d) = digits.iter().find(|&&d| d >= a) {
        return Err(Error::InvalidSystem(format!(
            "digit {d} is not below a = {a}"
        )));
    }
    let mut sorted = digits.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != digits.len() {
        return Err(Error::InvalidSystem(
            "digit set has repeated entries".into(),
        ));
    }
    if sigma.len() != b as usize {
        return Err(Error::InvalidSystem(format!(
            "sigma has {} entries, expected b = {b}",
            sigma.len()
        )));
    }
    let mut seen = vec![false; b as usize];
    for &r in sigma {
        if r >= b || std::mem::replace(&mut seen[r as usize], true) {
            return Err(Error::InvalidSystem(format!(
                "sigma {sigma:?} is not a bijection onto 0..{b}"
            )));
        }
    }
    Ok(())
}

/// An admissible digit word `x₁…x_k` with `x_j ∈ J_(x₁…x_{j-1})`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word(Vec<u32>);

impl Word {
    pub fn new(sys: &DigitSystem, digits: Vec<u32>) -> Result<Self> {
        let mut prefix = 0u128;
        for (depth, &d) in digits.iter().enumerate() {
            let branch = sys.branch(depth as u32, prefix);
            if branch.rank_of(d).is_none() {
                return Err(Error::InvalidSystem(format!(
                    "digit {d} at position {} is not in J = {:?}",
                    depth + 1,
                    branch.digits
                )));
            }
            prefix = prefix * sys.a as u128 + d as u128;
        }
        Ok(Self(digits))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn digits(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Base-`a` value of the digit string.
    pub fn value(&self, a: u32) -> u128 {
        self.0
            .iter()
            .fold(0u128, |acc, &d| acc * a as u128 + d as u128)
    }
}

#[derive(Serialize, Deserialize)]
struct SystemDoc {
    a: u32,
    b: u32,
    mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, rename = "J", skip_serializing_if = "Option::is_none")]
    digits: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<Vec<u32>>,
}

impl TryFrom<SystemDoc> for DigitSystem {
    type Error = Error;

    fn try_from(doc: SystemDoc) -> Result<Self> {
        match doc.mode.as_str() {
            "self_similar" => {
                let digits = doc
                    .digits
                    .ok_or_else(|| Error::InvalidSystem("self_similar mode needs `J`".into()))?;
                let sigma = doc.sigma.unwrap_or_else(|| (0..doc.b).collect());
                DigitSystem::self_similar(doc.a, doc.b, digits, sigma)
            }
            "staircase" => match doc.digits {
                Some(digits) => DigitSystem::staircase(doc.a, doc.b, digits),
                None => DigitSystem::standard_staircase(doc.a, doc.b),
            },
            "seeded_random" => {
                let seed = doc.seed.ok_or_else(|| {
                    Error::InvalidSystem("seeded_random mode needs `seed`".into())
                })?;
                DigitSystem::seeded(doc.a, doc.b, seed)
            }
            other => Err(Error::InvalidSystem(format!("unknown mode `{other}`"))),
        }
    }
}

impl From<DigitSystem> for SystemDoc {
    fn from(sys: DigitSystem) -> Self {
        let mode = sys.mode_name().to_string();
        match sys.mode {
            Mode::SelfSimilar { digits, sigma } => SystemDoc {
                a: sys.a,
                b: sys.b,
                mode,
                seed: None,
                digits: Some(digits),
                sigma: Some(sigma),
            },
            Mode::SeededRandom { seed } => SystemDoc {
                a: sys.a,
                b: sys.b,
                mode,
                seed: Some(seed),
                digits: None,
                sigma: None,
            },
        }
    }
}
