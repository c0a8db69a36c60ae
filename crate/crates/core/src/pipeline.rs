//! Concurrent join pipeline.
//!
//! The calling thread generates candidates and serializes them into chunks;
//! a verifier thread hands sealed chunks to the [`VerificationEngine`]; in
//! pairs mode a decoder thread turns flag arrays into result pairs. Two chunk
//! buffers circulate between the roles, so the producer fills one while the
//! other is being verified and blocks only when both are busy.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use crate::collection::Collection;
use crate::joiners::{generate, Algorithm, CandidateSink, GenerationStats};
use crate::similarity::SimilarityPredicate;
use crate::verify::{
    check_pair, CandidateChunk, ChunkBuilder, EngineConfig, OutputMode, Strategy, VerificationEngine,
    VerificationOutput, MIN_CHUNK_BUDGET,
};
use crate::{Error, Result};

/// Chunk budget meaning "no limit".
pub const UNBOUNDED_BUDGET: usize = usize::MAX;
const BUFFERS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineConfig {
    /// Byte budget for `C` plus `C_O` of one chunk.
    pub chunk_budget: usize,
    pub strategy: Strategy,
    pub group_size: usize,
    pub mode: OutputMode,
    /// Verification worker threads; 0 uses the available parallelism.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            chunk_budget: 64 << 20,
            strategy: Strategy::Auto,
            group_size: 32,
            mode: OutputMode::Count,
            workers: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chunk_budget < MIN_CHUNK_BUDGET {
            return Err(Error::InvalidConfig(format!(
                "chunk budget of {} bytes is below the minimum of {MIN_CHUNK_BUDGET}",
                self.chunk_budget
            )));
        }
        if !self.group_size.is_power_of_two() {
            return Err(Error::InvalidConfig(format!("group size {} is not a power of two", self.group_size)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JoinResult {
    Count(u64),
    /// Sorted pairs of original record ids.
    Pairs(Vec<(u32, u32)>),
}

impl JoinResult {
    pub fn count(&self) -> u64 {
        match self {
            JoinResult::Count(n) => *n,
            JoinResult::Pairs(p) => p.len() as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhaseTimings {
    /// Producer time minus serialization and buffer waits. Includes inline
    /// host verification.
    pub filtering: Duration,
    /// Appending batches to chunks and sealing them.
    pub serialization: Duration,
    /// Sum of engine busy time over all chunks.
    pub verification: Duration,
    /// Wall clock of the whole join.
    pub join: Duration,
    /// Producer time spent waiting for a free chunk buffer.
    pub producer_stall: Duration,
    /// Engine busy time of the last chunk.
    pub last_chunk_verification: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkTrace {
    pub entries: usize,
    pub candidates: usize,
    /// `||C|| + ||C_O||`
    pub bytes: usize,
    pub candidate_bytes: usize,
    /// Size of the flag array allocated for this chunk (pairs mode only).
    pub flag_bytes: usize,
    pub similar: u64,
    pub strategy: Strategy,
    pub group_size: usize,
    pub verification: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinReport {
    pub result: JoinResult,
    pub timings: PhaseTimings,
    pub chunk_count: usize,
    /// Candidates shipped to the engine.
    pub candidate_count: u64,
    pub generation: GenerationStats,
    pub host_similar: u64,
    pub early_rejections: u64,
    pub comparisons: u64,
    /// Pairs whose merge used more than `|r| + |s|` comparisons. Always 0.
    pub comparison_overruns: u64,
    pub chunks: Vec<ChunkTrace>,
}

/// Observes chunk buffers entering and leaving the pipeline.
pub trait MemoryHook: Sync {
    fn acquire(&self, bytes: usize);
    fn release(&self, bytes: usize);
}

/// Tracks live sealed-chunk bytes and their high-water mark.
#[derive(Debug, Default)]
pub struct MemoryMeter {
    live: AtomicUsize,
    peak: AtomicUsize,
}

impl MemoryMeter {
    pub fn live(&self) -> usize {
        self.live.load(Ordering::SeqCst)
    }

    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }
}

impl MemoryHook for MemoryMeter {
    fn acquire(&self, bytes: usize) {
        let now = self.live.fetch_add(bytes, Ordering::SeqCst) + bytes;
        self.peak.fetch_max(now, Ordering::SeqCst);
    }

    fn release(&self, bytes: usize) {
        self.live.fetch_sub(bytes, Ordering::SeqCst);
    }
}

struct NoHook;

impl MemoryHook for NoHook {
    fn acquire(&self, _: usize) {}
    fn release(&self, _: usize) {}
}

/// Pairs `(probe, candidate)` for every set flag, as original record ids.
pub fn decode_pairs(chunk: &CandidateChunk, flags: &[bool], collection: &Collection) -> Vec<(u32, u32)> {
    debug_assert_eq!(flags.len(), chunk.candidate_count());
    let cands = chunk.candidates();
    let mut out = Vec::new();
    for entry in chunk.entries() {
        for k in entry.range {
            if flags[k] {
                out.push(collection.output_pair(entry.probe as usize, cands[k] as usize));
            }
        }
    }
    out
}

pub fn run_join(
    collection: &Collection,
    pred: &SimilarityPredicate,
    algorithm: Algorithm,
    config: &PipelineConfig,
) -> Result<JoinReport> {
    run_join_with_hook(collection, pred, algorithm, config, &NoHook)
}

struct ProducerSink<'a> {
    builder: ChunkBuilder,
    sealed_tx: Option<mpsc::Sender<CandidateChunk>>,
    free_rx: &'a mpsc::Receiver<CandidateChunk>,
    hook: &'a dyn MemoryHook,
    serialization: Duration,
    stall: Duration,
    failed: bool,
}

impl ProducerSink<'_> {
    fn dispatch(&mut self, sealed: CandidateChunk) {
        let Some(tx) = &self.sealed_tx else { return };
        self.hook.acquire(sealed.byte_size());
        if tx.send(sealed).is_err() {
            self.failed = true;
        }
    }

    fn finish(&mut self) {
        let start = Instant::now();
        if let Some(last) = self.builder.seal() {
            self.dispatch(last);
        }
        self.serialization += start.elapsed();
        self.sealed_tx = None;
    }
}

impl CandidateSink for ProducerSink<'_> {
    fn push_batch(&mut self, probe: u32, candidates: &[u32]) {
        if self.failed || candidates.is_empty() {
            return;
        }
        let start = Instant::now();
        let mut stall = Duration::ZERO;
        let ProducerSink { builder, sealed_tx, free_rx, hook, failed, .. } = self;
        builder.push(probe, candidates, |sealed| {
            if let Some(tx) = sealed_tx.as_ref() {
                hook.acquire(sealed.byte_size());
                if tx.send(sealed).is_err() {
                    *failed = true;
                }
            }
            if *failed {
                return CandidateChunk::default();
            }
            let wait = Instant::now();
            let next = free_rx.recv().unwrap_or_else(|_| {
                *failed = true;
                CandidateChunk::default()
            });
            stall += wait.elapsed();
            next
        });
        self.stall += stall;
        self.serialization += start.elapsed() - stall;
    }
}

#[derive(Default)]
struct VerifierOutcome {
    count: u64,
    traces: Vec<ChunkTrace>,
    early_rejections: u64,
    comparisons: u64,
    overruns: u64,
    error: Option<Error>,
}

/// [`run_join`] reporting every chunk buffer to `hook`: `acquire` when a
/// chunk is sealed, `release` when its buffer is back in the free pool.
pub fn run_join_with_hook(
    collection: &Collection,
    pred: &SimilarityPredicate,
    algorithm: Algorithm,
    config: &PipelineConfig,
    hook: &dyn MemoryHook,
) -> Result<JoinReport> {
    config.validate()?;
    let started = Instant::now();
    let engine = VerificationEngine::new(
        collection,
        pred.clone(),
        EngineConfig { strategy: config.strategy, group_size: config.group_size, workers: config.workers },
    )?;
    let mode = config.mode;

    let (free_tx, free_rx) = mpsc::channel::<CandidateChunk>();
    for _ in 0..BUFFERS - 1 {
        free_tx.send(CandidateChunk::default()).expect("free pool");
    }
    let (sealed_tx, sealed_rx) = mpsc::channel::<CandidateChunk>();
    let (flags_tx, flags_rx) = mpsc::channel::<(CandidateChunk, Vec<bool>)>();

    let mut host_pairs: Vec<(u32, u32)> = Vec::new();
    let mut host_similar = 0u64;

    let (generation, producer_time, sink_serialization, sink_stall, verifier, decoded) =
        std::thread::scope(|scope| -> Result<_> {
            let engine = &engine;
            let decoder = (mode == OutputMode::Pairs).then(|| {
                let free_tx = free_tx.clone();
                std::thread::Builder::new()
                    .name("ssjoin-decode".into())
                    .spawn_scoped(scope, move || {
                        let mut pairs = Vec::new();
                        for (chunk, flags) in flags_rx {
                            pairs.extend(decode_pairs(&chunk, &flags, collection));
                            drop(flags);
                            hook.release(chunk.byte_size());
                            // the producer may already be gone
                            let _ = free_tx.send(chunk);
                        }
                        pairs
                    })
                    .expect("spawn decoder")
            });

            let verifier_free_tx = free_tx;
            let verifier = std::thread::Builder::new()
                .name("ssjoin-verify".into())
                .spawn_scoped(scope, move || {
                    let mut out = VerifierOutcome::default();
                    for chunk in sealed_rx {
                        let report = match engine.verify(&chunk, mode) {
                            Ok(r) => r,
                            Err(e) => {
                                out.error = Some(e);
                                hook.release(chunk.byte_size());
                                break;
                            }
                        };
                        let v = report.verified;
                        out.early_rejections += v.stats.early_rejections;
                        out.comparisons += v.stats.comparisons;
                        out.overruns += v.stats.comparison_overruns;
                        let flag_bytes = match &v.output {
                            VerificationOutput::Flags(f) => f.len() * std::mem::size_of::<bool>(),
                            VerificationOutput::Count(_) => 0,
                        };
                        out.traces.push(ChunkTrace {
                            entries: chunk.entry_count(),
                            candidates: chunk.candidate_count(),
                            bytes: chunk.byte_size(),
                            candidate_bytes: chunk.candidate_bytes(),
                            flag_bytes,
                            similar: v.output.similar_count(),
                            strategy: v.strategy,
                            group_size: v.group_size,
                            verification: report.elapsed,
                        });
                        match v.output {
                            VerificationOutput::Count(n) => {
                                out.count += n;
                                hook.release(chunk.byte_size());
                                let _ = verifier_free_tx.send(chunk);
                            }
                            VerificationOutput::Flags(flags) => {
                                out.count += flags.iter().filter(|&&f| f).count() as u64;
                                if let Err(mpsc::SendError((chunk, _))) = flags_tx.send((chunk, flags)) {
                                    hook.release(chunk.byte_size());
                                }
                            }
                        }
                    }
                    out
                })
                .expect("spawn verifier");

            let producer_start = Instant::now();
            let first = CandidateChunk::default();
            let mut sink = ProducerSink {
                builder: ChunkBuilder::with_buffer(config.chunk_budget, first)?,
                sealed_tx: Some(sealed_tx),
                free_rx: &free_rx,
                hook,
                serialization: Duration::ZERO,
                stall: Duration::ZERO,
                failed: false,
            };
            let mut host = |probe: u32, candidate: u32| {
                let (r, s) = (collection.set(probe as usize), collection.set(candidate as usize));
                if check_pair(r, s, pred.equivalent_overlap(r.len(), s.len())).met {
                    host_similar += 1;
                    if mode == OutputMode::Pairs {
                        host_pairs.push(collection.output_pair(probe as usize, candidate as usize));
                    }
                }
            };
            let generation = generate(algorithm, collection, pred, &mut sink, &mut host);
            sink.finish();
            let producer_time = producer_start.elapsed();

            let verifier = verifier.join().expect("verifier thread panicked");
            let decoded = decoder.map(|d| d.join().expect("decoder thread panicked")).unwrap_or_default();
            Ok((generation, producer_time, sink.serialization, sink.stall, verifier, decoded))
        })?;

    if let Some(e) = verifier.error {
        return Err(e);
    }
    let candidate_count: u64 = verifier.traces.iter().map(|t| t.candidates as u64).sum();
    debug_assert_eq!(candidate_count, generation.candidates);

    let result = match mode {
        OutputMode::Count => JoinResult::Count(verifier.count + host_similar),
        OutputMode::Pairs => {
            let mut pairs = decoded;
            pairs.extend(host_pairs);
            pairs.sort_unstable();
            JoinResult::Pairs(pairs)
        }
    };
    let verification = verifier.traces.iter().map(|t| t.verification).sum();
    let timings = PhaseTimings {
        filtering: producer_time.saturating_sub(sink_serialization + sink_stall),
        serialization: sink_serialization,
        verification,
        join: started.elapsed(),
        producer_stall: sink_stall,
        last_chunk_verification: verifier.traces.last().map_or(Duration::ZERO, |t| t.verification),
    };
    log::debug!(
        "{algorithm} {pred}: {} candidates in {} chunks, result {}",
        candidate_count,
        verifier.traces.len(),
        result.count()
    );
    Ok(JoinReport {
        result,
        timings,
        chunk_count: verifier.traces.len(),
        candidate_count,
        generation,
        host_similar,
        early_rejections: verifier.early_rejections,
        comparisons: verifier.comparisons,
        comparison_overruns: verifier.overruns,
        chunks: verifier.traces,
    })
}
