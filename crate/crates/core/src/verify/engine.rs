use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::chunk::{CandidateChunk, ChunkEntry};
use super::intersect_path::{intersect_path_partitions_into, partition_count, Partition};
use crate::collection::Collection;
use crate::similarity::SimilarityPredicate;
use crate::{Error, Result};

/// Largest group size accepted by strategies B and C.
pub const MAX_GROUP_SIZE: usize = 1024;
/// Average probe size at or below which `Auto` picks strategy B.
pub const AUTO_SMALL_SET_LIMIT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Strategy {
    /// One work unit per probe, candidates checked in order.
    A,
    /// A group of lanes per probe, each taking a contiguous block of
    /// candidates.
    B,
    /// A group of lanes per probe that jointly intersects each pair.
    C,
    /// Picks B or C per chunk from the average probe size.
    Auto,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::A, Strategy::B, Strategy::C, Strategy::Auto];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::A => "A",
            Strategy::B => "B",
            Strategy::C => "C",
            Strategy::Auto => "auto",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Strategy::A),
            "b" => Ok(Strategy::B),
            "c" => Ok(Strategy::C),
            "auto" => Ok(Strategy::Auto),
            _ => Err(Error::InvalidConfig(format!("unknown strategy '{s}' (expected A, B, C or auto)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    Count,
    Pairs,
}

impl FromStr for OutputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "count" => Ok(OutputMode::Count),
            "pairs" => Ok(OutputMode::Pairs),
            _ => Err(Error::InvalidConfig(format!("unknown mode '{s}' (expected count or pairs)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerificationOutput {
    /// One flag per entry of `C`.
    Flags(Vec<bool>),
    Count(u64),
}

impl VerificationOutput {
    pub fn similar_count(&self) -> u64 {
        match self {
            VerificationOutput::Flags(f) => f.iter().filter(|&&x| x).count() as u64,
            VerificationOutput::Count(n) => *n,
        }
    }
}

/// Outcome of a single merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCheck {
    /// Shared elements seen before the merge stopped.
    pub overlap: usize,
    pub met: bool,
    pub comparisons: usize,
    /// Rejected while both cursors were still inside their sets.
    pub early_reject: bool,
}

/// Merge-intersects `r` and `s`, stopping once `required` is reached or can
/// no longer be reached. `overlap` is the exact intersection size only when
/// the merge ran to the end.
pub fn check_pair(r: &[u32], s: &[u32], required: usize) -> PairCheck {
    let (mut i, mut j, mut overlap, mut comparisons) = (0, 0, 0, 0);
    if required == 0 {
        return PairCheck { overlap, met: true, comparisons, early_reject: false };
    }
    while i < r.len() && j < s.len() {
        if overlap + (r.len() - i).min(s.len() - j) < required {
            return PairCheck { overlap, met: false, comparisons, early_reject: true };
        }
        comparisons += 1;
        match r[i].cmp(&s[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                overlap += 1;
                i += 1;
                j += 1;
                if overlap >= required {
                    return PairCheck { overlap, met: true, comparisons, early_reject: false };
                }
            }
        }
    }
    PairCheck { overlap, met: false, comparisons, early_reject: false }
}

pub fn verify_pair_count(r: &[u32], s: &[u32], required: usize) -> (usize, bool) {
    let check = check_pair(r, s, required);
    (check.overlap, check.met)
}

/// Group-level sum of per-lane counts. Pairwise tree order, so the result does
/// not depend on how lanes were scheduled.
pub fn reduce_counts(counts: &[u64]) -> u64 {
    match counts.len() {
        0 => 0,
        1 => counts[0],
        n => {
            let (a, b) = counts.split_at(n / 2);
            reduce_counts(a) + reduce_counts(b)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifyStats {
    pub pairs: u64,
    pub similar: u64,
    pub early_rejections: u64,
    pub comparisons: u64,
    /// Merges that used more than `|r| + |s|` comparisons.
    pub comparison_overruns: u64,
}

impl VerifyStats {
    fn absorb(&mut self, other: &VerifyStats) {
        self.pairs += other.pairs;
        self.similar += other.similar;
        self.early_rejections += other.early_rejections;
        self.comparisons += other.comparisons;
        self.comparison_overruns += other.comparison_overruns;
    }

    fn record(&mut self, check: &PairCheck, merge_len: usize) {
        self.pairs += 1;
        self.similar += u64::from(check.met);
        self.early_rejections += u64::from(check.early_reject);
        self.comparisons += check.comparisons as u64;
        self.comparison_overruns += u64::from(check.comparisons > merge_len);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verified {
    pub output: VerificationOutput,
    pub stats: VerifyStats,
    /// The strategy that actually ran (differs from the request for `Auto`).
    pub strategy: Strategy,
    pub group_size: usize,
}

fn check_group_size(group_size: usize) -> Result<()> {
    if group_size == 0 || !group_size.is_power_of_two() || group_size > MAX_GROUP_SIZE {
        return Err(Error::InvalidConfig(format!(
            "group size must be a power of two in 1..={MAX_GROUP_SIZE}, got {group_size}"
        )));
    }
    Ok(())
}

fn validate_chunk(chunk: &CandidateChunk, collection: &Collection) -> Result<()> {
    let n = collection.len();
    let bad = chunk
        .entries()
        .map(|e| e.probe)
        .chain(chunk.candidates().iter().copied())
        .find(|&id| id as usize >= n);
    match bad {
        Some(id) => Err(Error::Verification(format!("set id {id} out of range for {n} sets"))),
        None => Ok(()),
    }
}

struct UnitResult {
    count: u64,
    stats: VerifyStats,
}

/// Runs `unit` once per chunk entry, each with its own slice of the flag
/// array in pairs mode. Entries run in parallel when called from inside a
/// rayon pool and sequentially otherwise.
fn run_units<F>(chunk: &CandidateChunk, mode: OutputMode, unit: F) -> (VerificationOutput, VerifyStats)
where
    F: Fn(&ChunkEntry, Option<&mut [bool]>) -> UnitResult + Sync,
{
    let parallel = rayon::current_thread_index().is_some();
    let entries: Vec<ChunkEntry> = chunk.entries().collect();
    let results: Vec<UnitResult> = match mode {
        OutputMode::Pairs => {
            let mut flags = vec![false; chunk.candidate_count()];
            let mut slices = Vec::with_capacity(entries.len());
            let mut rest: &mut [bool] = &mut flags;
            for e in &entries {
                let (head, tail) = rest.split_at_mut(e.range.len());
                slices.push(head);
                rest = tail;
            }
            let results: Vec<UnitResult> = if parallel {
                entries.par_iter().zip(slices.into_par_iter()).map(|(e, out)| unit(e, Some(out))).collect()
            } else {
                entries.iter().zip(slices).map(|(e, out)| unit(e, Some(out))).collect()
            };
            debug_assert_eq!(flags.len() * std::mem::size_of::<bool>(), chunk.candidate_bytes() / 4);
            let mut stats = VerifyStats::default();
            results.iter().for_each(|r| stats.absorb(&r.stats));
            return (VerificationOutput::Flags(flags), stats);
        }
        OutputMode::Count if parallel => entries.par_iter().map(|e| unit(e, None)).collect(),
        OutputMode::Count => entries.iter().map(|e| unit(e, None)).collect(),
    };
    let counts: Vec<u64> = results.iter().map(|r| r.count).collect();
    let mut stats = VerifyStats::default();
    results.iter().for_each(|r| stats.absorb(&r.stats));
    (VerificationOutput::Count(reduce_counts(&counts)), stats)
}

fn required_overlap(pred: &SimilarityPredicate, r: &[u32], s: &[u32]) -> usize {
    pred.equivalent_overlap(r.len(), s.len())
}

/// One unit per probe; its candidates are checked sequentially.
pub fn strategy_a(
    chunk: &CandidateChunk,
    collection: &Collection,
    pred: &SimilarityPredicate,
    mode: OutputMode,
) -> Result<Verified> {
    validate_chunk(chunk, collection)?;
    let cands = chunk.candidates();
    let (output, stats) = run_units(chunk, mode, |e, mut out| {
        let r = collection.set(e.probe as usize);
        let mut stats = VerifyStats::default();
        for (k, &cand) in cands[e.range.clone()].iter().enumerate() {
            let s = collection.set(cand as usize);
            let check = check_pair(r, s, required_overlap(pred, r, s));
            stats.record(&check, r.len() + s.len());
            if let Some(flags) = out.as_deref_mut() {
                flags[k] = check.met;
            }
        }
        UnitResult { count: stats.similar, stats }
    });
    Ok(Verified { output, stats, strategy: Strategy::A, group_size: 1 })
}

/// `lanes` lanes per probe, lane `w` taking the `w`-th contiguous block of
/// `ceil(n / lanes)` candidates; lane counts are reduced per group.
pub fn strategy_b(
    chunk: &CandidateChunk,
    collection: &Collection,
    pred: &SimilarityPredicate,
    mode: OutputMode,
    lanes: usize,
) -> Result<Verified> {
    check_group_size(lanes)?;
    validate_chunk(chunk, collection)?;
    let cands = chunk.candidates();
    let (output, stats) = run_units(chunk, mode, |e, mut out| {
        let r = collection.set(e.probe as usize);
        let block = &cands[e.range.clone()];
        let per_lane = block.len().div_ceil(lanes).max(1);
        let mut lane_counts = vec![0u64; lanes];
        let mut stats = VerifyStats::default();
        for (w, lane_count) in lane_counts.iter_mut().enumerate() {
            let start = (w * per_lane).min(block.len());
            let end = (start + per_lane).min(block.len());
            for k in start..end {
                let s = collection.set(block[k] as usize);
                let check = check_pair(r, s, required_overlap(pred, r, s));
                stats.record(&check, r.len() + s.len());
                *lane_count += u64::from(check.met);
                if let Some(flags) = out.as_deref_mut() {
                    flags[k] = check.met;
                }
            }
        }
        UnitResult { count: reduce_counts(&lane_counts), stats }
    });
    Ok(Verified { output, stats, strategy: Strategy::B, group_size: lanes })
}

/// `lanes` lanes per probe cooperate on every pair: the merge path is cut into
/// `lanes` partitions, each lane counts matches in its partition, and the
/// group reduces the partial counts before lane 0 records the result.
pub fn strategy_c(
    chunk: &CandidateChunk,
    collection: &Collection,
    pred: &SimilarityPredicate,
    mode: OutputMode,
    lanes: usize,
) -> Result<Verified> {
    check_group_size(lanes)?;
    validate_chunk(chunk, collection)?;
    let cands = chunk.candidates();
    let (output, stats) = run_units(chunk, mode, |e, mut out| {
        let r = collection.set(e.probe as usize);
        let mut parts: Vec<Partition> = Vec::with_capacity(lanes);
        let mut lane_counts = vec![0u64; lanes];
        let mut stats = VerifyStats::default();
        for (k, &cand) in cands[e.range.clone()].iter().enumerate() {
            let s = collection.set(cand as usize);
            intersect_path_partitions_into(r, s, lanes, &mut parts);
            for (count, part) in lane_counts.iter_mut().zip(&parts) {
                *count = partition_count(r, s, part) as u64;
            }
            let overlap = reduce_counts(&lane_counts) as usize;
            let met = overlap >= required_overlap(pred, r, s);
            stats.pairs += 1;
            stats.similar += u64::from(met);
            stats.comparisons += (r.len() + s.len()) as u64;
            if let Some(flags) = out.as_deref_mut() {
                flags[k] = met;
            }
        }
        UnitResult { count: stats.similar, stats }
    });
    Ok(Verified { output, stats, strategy: Strategy::C, group_size: lanes })
}

/// Mean probe-set size over the chunk's entries.
pub fn average_probe_size(chunk: &CandidateChunk, collection: &Collection) -> f64 {
    let entries = chunk.entry_count();
    if entries == 0 {
        return 0.0;
    }
    let total: usize = chunk.entries().map(|e| collection.set_len(e.probe as usize)).sum();
    total as f64 / entries as f64
}

/// Strategy and group size `Auto` resolves to for a chunk whose average probe
/// size is `avg`.
pub fn auto_choice(avg: f64, group_size: usize) -> (Strategy, usize) {
    if avg <= AUTO_SMALL_SET_LIMIT {
        (Strategy::B, group_size)
    } else {
        let wanted = (avg.ceil() as usize).next_power_of_two().min(256);
        (Strategy::C, wanted.max(group_size))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub strategy: Strategy,
    /// Lanes per group for strategies B and C.
    pub group_size: usize,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { strategy: Strategy::Auto, group_size: 32, workers: 0 }
    }
}

/// Verifies chunks against a collection. With more than one worker, groups
/// run on a dedicated pool; a single worker runs them on the calling thread.
pub struct VerificationEngine<'a> {
    collection: &'a Collection,
    pred: SimilarityPredicate,
    config: EngineConfig,
    pool: Option<rayon::ThreadPool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkReport {
    pub verified: Verified,
    pub elapsed: Duration,
}

impl<'a> VerificationEngine<'a> {
    pub fn new(collection: &'a Collection, pred: SimilarityPredicate, config: EngineConfig) -> Result<Self> {
        check_group_size(config.group_size)?;
        let workers = match config.workers {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            n => n,
        };
        let pool = if workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .thread_name(|i| format!("ssjoin-verify-{i}"))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
            Some(pool)
        } else {
            None
        };
        Ok(VerificationEngine { collection, pred, config, pool })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn workers(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    pub fn verify(&self, chunk: &CandidateChunk, mode: OutputMode) -> Result<ChunkReport> {
        let started = Instant::now();
        let (collection, pred) = (self.collection, &self.pred);
        let run = || match self.config.strategy {
            Strategy::A => strategy_a(chunk, collection, pred, mode),
            Strategy::B => strategy_b(chunk, collection, pred, mode, self.config.group_size),
            Strategy::C => strategy_c(chunk, collection, pred, mode, self.config.group_size),
            Strategy::Auto => {
                let avg = average_probe_size(chunk, collection);
                match auto_choice(avg, self.config.group_size) {
                    (Strategy::C, lanes) => strategy_c(chunk, collection, pred, mode, lanes),
                    (_, lanes) => strategy_b(chunk, collection, pred, mode, lanes),
                }
            }
        };
        let verified = match &self.pool {
            Some(pool) => pool.install(run)?,
            None => run()?,
        };
        Ok(ChunkReport { verified, elapsed: started.elapsed() })
    }
}
