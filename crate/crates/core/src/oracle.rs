//! Brute-force reference join and synthetic workload generation.
//!
//! The reference join applies no filter at all: it merges every pair and
//! compares the exact score against the threshold.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::collection::{Collection, RawRecord};
use crate::similarity::{Score, SimilarityPredicate};
use crate::{Error, Result};

/// Largest collection the quadratic scan accepts.
pub const ORACLE_LIMIT: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OraclePair {
    /// Larger set index.
    pub r: u32,
    pub s: u32,
    pub overlap: usize,
    pub score: Score,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OracleResult {
    /// Sorted by `(r, s)`.
    pub pairs: Vec<OraclePair>,
}

impl OracleResult {
    pub fn count(&self) -> u64 {
        self.pairs.len() as u64
    }

    /// Pairs in the engine's output form, sorted.
    pub fn output_pairs(&self, collection: &Collection) -> Vec<(u32, u32)> {
        let mut out: Vec<(u32, u32)> = self
            .pairs
            .iter()
            .map(|p| collection.output_pair(p.r as usize, p.s as usize))
            .collect();
        out.sort_unstable();
        out
    }
}

fn merge_overlap(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

pub fn brute_force_join(collection: &Collection, pred: &SimilarityPredicate) -> Result<OracleResult> {
    let n = collection.len();
    if n > ORACLE_LIMIT {
        return Err(Error::OracleGuard { len: n, limit: ORACLE_LIMIT });
    }
    let mut pairs = Vec::new();
    for r in 0..n {
        let rs = collection.set(r);
        for s in 0..r {
            if !collection.joinable(r, s) {
                continue;
            }
            let ss = collection.set(s);
            let overlap = merge_overlap(rs, ss);
            let score = pred.similarity_score(overlap, rs.len(), ss.len());
            if score.meets(&pred.threshold()) {
                pairs.push(OraclePair { r: r as u32, s: s as u32, overlap, score });
            }
        }
    }
    Ok(OracleResult { pairs })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SizeDistribution {
    Uniform { min: usize, max: usize },
    /// Sizes in `1..=max`, Zipf-distributed with the given exponent.
    Zipf { max: usize, exponent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TokenDistribution {
    Uniform,
    Zipf { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub sizes: SizeDistribution,
    pub universe: usize,
    pub tokens: TokenDistribution,
    /// Fraction of records that are exact copies of an earlier record.
    pub duplicate_rate: f64,
    /// Fraction of records that are an earlier record with a few tokens
    /// replaced.
    pub near_duplicate_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 1000,
            sizes: SizeDistribution::Uniform { min: 1, max: 50 },
            universe: 1000,
            tokens: TokenDistribution::Zipf { exponent: 1.0 },
            duplicate_rate: 0.0,
            near_duplicate_rate: 0.2,
        }
    }
}

impl SynthConfig {
    /// Many identical small sets.
    pub fn duplicate_heavy(n: usize) -> Self {
        SynthConfig {
            n,
            sizes: SizeDistribution::Zipf { max: 12, exponent: 1.5 },
            universe: 200,
            tokens: TokenDistribution::Zipf { exponent: 1.1 },
            duplicate_rate: 0.6,
            near_duplicate_rate: 0.1,
        }
    }
}

struct TokenSampler {
    zipf: Option<Zipf<f64>>,
    universe: usize,
}

impl TokenSampler {
    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        match &self.zipf {
            Some(z) => z.sample(rng) as usize - 1,
            None => rng.random_range(0..self.universe),
        }
    }
}

/// Deterministic record generation from `seed`. Tokens are named `t<k>`.
pub fn synth_collection(seed: u64, config: &SynthConfig) -> Vec<RawRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let universe = config.universe.max(1);
    let sampler = TokenSampler {
        zipf: match config.tokens {
            TokenDistribution::Uniform => None,
            TokenDistribution::Zipf { exponent } => Some(Zipf::new(universe as f64, exponent).expect("zipf")),
        },
        universe,
    };
    let size_zipf = match config.sizes {
        SizeDistribution::Zipf { max, exponent } => Some(Zipf::new(max.max(1) as f64, exponent).expect("zipf")),
        SizeDistribution::Uniform { .. } => None,
    };

    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let roll: f64 = rng.random();
        if !sets.is_empty() && roll < config.duplicate_rate {
            let source = rng.random_range(0..sets.len());
            sets.push(sets[source].clone());
            continue;
        }
        if !sets.is_empty() && roll < config.duplicate_rate + config.near_duplicate_rate {
            let source = rng.random_range(0..sets.len());
            let mut set = sets[source].clone();
            let edits = rng.random_range(1..=(set.len() / 5).max(1));
            for _ in 0..edits {
                if set.is_empty() {
                    break;
                }
                let victim = rng.random_range(0..set.len());
                set.swap_remove(victim);
                let replacement = sampler.sample(&mut rng);
                if !set.contains(&replacement) {
                    set.push(replacement);
                }
            }
            sets.push(set);
            continue;
        }
        let size = match (config.sizes, &size_zipf) {
            (SizeDistribution::Uniform { min, max }, _) => rng.random_range(min..=max.max(min)),
            (SizeDistribution::Zipf { .. }, Some(z)) => z.sample(&mut rng) as usize,
            _ => unreachable!(),
        }
        .min(universe);
        let mut set = Vec::with_capacity(size);
        let mut attempts = 0;
        while set.len() < size {
            attempts += 1;
            let tok = if attempts > 20 * size { rng.random_range(0..universe) } else { sampler.sample(&mut rng) };
            if !set.contains(&tok) {
                set.push(tok);
            }
        }
        sets.push(set);
    }
    sets.into_iter()
        .map(|set| RawRecord::new(set.into_iter().map(|t| format!("t{t}"))))
        .collect()
}
