//! Candidate generation by incremental inverted-index nested loop.
//!
//! Every generator walks the collection in order, probes the index with the
//! probe prefix of the current set, filters and deduplicates pre-candidates,
//! hands the surviving batch to a [`CandidateSink`] and only then indexes the
//! set. Emitted candidate indices are therefore always smaller than the probe.

mod allpairs;
mod groupjoin;
mod index;

use std::fmt;
use std::str::FromStr;

pub use allpairs::{allpairs_generate, ppjoin_generate};
pub use groupjoin::{groupjoin_generate, Group};
pub use index::{InvertedIndex, Posting};

use crate::collection::Collection;
use crate::similarity::SimilarityPredicate;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    AllPairs,
    PPJoin,
    GroupJoin,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::AllPairs, Algorithm::PPJoin, Algorithm::GroupJoin];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::AllPairs => "allpairs",
            Algorithm::PPJoin => "ppjoin",
            Algorithm::GroupJoin => "groupjoin",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "allpairs" | "all" => Ok(Algorithm::AllPairs),
            "ppjoin" | "ppj" => Ok(Algorithm::PPJoin),
            "groupjoin" | "grp" => Ok(Algorithm::GroupJoin),
            other => Err(Error::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Receives one deduplicated, filtered batch per probe set.
pub trait CandidateSink {
    fn push_batch(&mut self, probe: u32, candidates: &[u32]);
}

/// Collects batches in memory; mostly useful in tests.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct BatchCollector {
    pub batches: Vec<(u32, Vec<u32>)>,
}

impl CandidateSink for BatchCollector {
    fn push_batch(&mut self, probe: u32, candidates: &[u32]) {
        self.batches.push((probe, candidates.to_vec()));
    }
}

impl BatchCollector {
    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.batches
            .iter()
            .flat_map(|(probe, cands)| cands.iter().map(move |&c| (*probe, c)))
    }
}

/// Verifies, on the producing thread, the pairs GroupJoin materializes while
/// expanding groups.
pub trait HostVerifier {
    fn verify(&mut self, probe: u32, candidate: u32);
}

impl<F: FnMut(u32, u32)> HostVerifier for F {
    fn verify(&mut self, probe: u32, candidate: u32) {
        self(probe, candidate)
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct GenerationStats {
    /// Index hits that passed the length filter, before deduplication.
    pub pre_candidates: u64,
    /// Pairs emitted to the sink.
    pub candidates: u64,
    /// Pairs handed to the host verifier (GroupJoin expansion only).
    pub host_pairs: u64,
}

pub fn generate(
    algorithm: Algorithm,
    collection: &Collection,
    pred: &SimilarityPredicate,
    sink: &mut dyn CandidateSink,
    host: &mut dyn HostVerifier,
) -> GenerationStats {
    match algorithm {
        Algorithm::AllPairs => allpairs_generate(collection, pred, sink),
        Algorithm::PPJoin => ppjoin_generate(collection, pred, sink),
        Algorithm::GroupJoin => groupjoin_generate(collection, pred, sink, host),
    }
}
