//! Acceptance criteria, one test per criterion. Each prints a PASS/FAIL line
//! straight to stderr so the verdicts show up even when output is captured.
//! Tests hold a shared lock because criterion 5 measures wall time.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Duration;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssjoin::cli::write_result;
use ssjoin::collection::{build_dictionary, preprocess, Collection};
use ssjoin::joiners::Algorithm;
use ssjoin::oracle::{brute_force_join, synth_collection, SizeDistribution, SynthConfig, TokenDistribution};
use ssjoin::pipeline::{run_join, JoinReport, JoinResult, PipelineConfig, UNBOUNDED_BUDGET};
use ssjoin::similarity::{SimilarityFunction, SimilarityPredicate, Threshold};
use ssjoin::verify::{
    check_pair, diagonal_spacing, intersect_path_partitions, partition_count, OutputMode, Strategy,
};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: &str, ok: bool, detail: &str) {
    let line = format!("{} criterion {id}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn collection_from(config: &SynthConfig, seed: u64) -> Collection {
    let records = synth_collection(seed, config);
    let d = build_dictionary(&records).unwrap();
    preprocess(&records, &d).unwrap()
}

fn thresholds() -> Vec<Threshold> {
    (10..=19).map(|k| Threshold::new(k, 20).unwrap()).collect()
}

// ---------------------------------------------------------------------------
// 1, 6, 7: oracle equivalence over the synthetic grid

fn grid_collection(seed: u64) -> Collection {
    let n = 100 + (seed as usize % 10) * 100;
    let config = match seed % 3 {
        0 => SynthConfig {
            n,
            sizes: SizeDistribution::Uniform { min: 1, max: 50 },
            universe: 400,
            tokens: TokenDistribution::Zipf { exponent: 0.9 },
            near_duplicate_rate: 0.3,
            ..SynthConfig::default()
        },
        1 => SynthConfig {
            n,
            sizes: SizeDistribution::Zipf { max: 50, exponent: 1.0 },
            universe: 300,
            tokens: TokenDistribution::Zipf { exponent: 1.0 },
            near_duplicate_rate: 0.3,
            ..SynthConfig::default()
        },
        _ => SynthConfig::duplicate_heavy(n),
    };
    collection_from(&config, 1000 + seed)
}

#[derive(Debug, Default)]
struct GridSummary {
    runs: usize,
    mismatches: Vec<String>,
    chunks_checked: usize,
    layout_violations: usize,
    early_rejections: u64,
    comparison_overruns: u64,
    similar_pairs: u64,
}

fn grid_summary() -> &'static GridSummary {
    static SUMMARY: OnceLock<GridSummary> = OnceLock::new();
    SUMMARY.get_or_init(run_grid)
}

fn run_grid() -> GridSummary {
    let mut summary = GridSummary::default();
    let budgets = [4 << 10, 64 << 10, UNBOUNDED_BUDGET];
    for seed in 0..100u64 {
        let c = grid_collection(seed);
        let budget = budgets[seed as usize % budgets.len()];
        for t in thresholds() {
            let pred = SimilarityPredicate::new(SimilarityFunction::Jaccard, t).unwrap();
            let oracle = brute_force_join(&c, &pred).unwrap();
            let expected = oracle.output_pairs(&c);
            summary.similar_pairs += expected.len() as u64;
            for algorithm in Algorithm::ALL {
                for strategy in [Strategy::A, Strategy::B, Strategy::C] {
                    for group_size in [1, 32, 128] {
                        let config = PipelineConfig {
                            chunk_budget: budget,
                            strategy,
                            group_size,
                            mode: OutputMode::Pairs,
                            workers: 1 + (seed as usize % 2),
                        };
                        let report = run_join(&c, &pred, algorithm, &config).unwrap();
                        summary.runs += 1;
                        absorb(&mut summary, &report);
                        if report.result != JoinResult::Pairs(expected.clone()) {
                            summary.mismatches.push(format!(
                                "seed {seed} t={t} {algorithm} {strategy} B={group_size}: {} vs {}",
                                report.result.count(),
                                expected.len()
                            ));
                        }
                    }
                    let count_config = PipelineConfig {
                        chunk_budget: budget,
                        strategy,
                        group_size: 32,
                        mode: OutputMode::Count,
                        workers: 1,
                    };
                    let report = run_join(&c, &pred, algorithm, &count_config).unwrap();
                    summary.runs += 1;
                    absorb(&mut summary, &report);
                    if report.result != JoinResult::Count(oracle.count()) {
                        summary.mismatches.push(format!("seed {seed} t={t} {algorithm} {strategy} count"));
                    }
                }
            }
        }
    }
    summary
}

fn absorb(summary: &mut GridSummary, report: &JoinReport) {
    summary.early_rejections += report.early_rejections;
    summary.comparison_overruns += report.comparison_overruns;
    for chunk in &report.chunks {
        if chunk.flag_bytes == 0 {
            continue;
        }
        summary.chunks_checked += 1;
        if chunk.flag_bytes != chunk.candidate_bytes / 4 || chunk.candidate_bytes % 4 != 0 {
            summary.layout_violations += 1;
        }
    }
}

#[test]
fn criterion_1_oracle_equivalence() {
    let _guard = serial();
    let s = grid_summary();
    let ok = s.mismatches.is_empty() && s.similar_pairs > 0;
    verdict(
        "1",
        ok,
        &format!("{} runs over 100 collections, {} mismatches ({} similar pairs in total)", s.runs, s.mismatches.len(), s.similar_pairs),
    );
    assert!(ok, "{:#?}", &s.mismatches[..s.mismatches.len().min(20)]);
}

#[test]
fn criterion_6_layout_accounting() {
    let _guard = serial();
    let s = grid_summary();
    let ok = s.layout_violations == 0 && s.chunks_checked > 0;
    verdict("6", ok, &format!("{} chunks, {} with flag bytes != candidate bytes / 4", s.chunks_checked, s.layout_violations));
    assert!(ok);
}

#[test]
fn criterion_7_early_termination() {
    let _guard = serial();
    let s = grid_summary();
    // direct check of the comparison bound as well
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut direct_overruns = 0;
    for _ in 0..20_000 {
        let r = random_set(&mut rng, 300, 0..80);
        let t = random_set(&mut rng, 300, 0..80);
        let required = rng.random_range(0..60);
        if check_pair(&r, &t, required).comparisons > r.len() + t.len() {
            direct_overruns += 1;
        }
    }
    let ok = s.comparison_overruns == 0 && direct_overruns == 0 && s.early_rejections > 0;
    verdict(
        "7",
        ok,
        &format!(
            "comparison overruns {} (grid) + {direct_overruns} (random); {} early rejections",
            s.comparison_overruns, s.early_rejections
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 2: equivalent overlap

#[test]
fn criterion_2_equivalent_overlap() {
    let _guard = serial();
    let worked = SimilarityPredicate::jaccard("0.8").unwrap().equivalent_overlap(10, 10);
    let mut failures = 0usize;
    let mut checks = 0usize;
    let mut preds = Vec::new();
    for f in [SimilarityFunction::Jaccard, SimilarityFunction::Cosine, SimilarityFunction::Dice] {
        for k in 1..=20 {
            preds.push(SimilarityPredicate::new(f, Threshold::new(k, 20).unwrap()).unwrap());
        }
    }
    for t in 1..=50 {
        preds.push(SimilarityPredicate::new(SimilarityFunction::Overlap, Threshold::integer(t)).unwrap());
    }
    for p in &preds {
        for a in 1..=50usize {
            for b in 1..=50usize {
                let eqo = p.equivalent_overlap(a, b);
                for o in 0..=a.min(b) {
                    checks += 1;
                    let by_score = p.similarity_score(o, a, b).meets(&p.threshold());
                    if by_score != (o >= eqo) {
                        failures += 1;
                    }
                }
            }
        }
    }
    let ok = worked == 9 && failures == 0;
    verdict("2", ok, &format!("jaccard 0.8 |r|=|s|=10 -> {worked}; {checks} exhaustive checks, {failures} failures"));
    assert!(ok);
}

// ---------------------------------------------------------------------------
// 3: Intersect Path

fn random_set(rng: &mut ChaCha8Rng, universe: usize, len: std::ops::Range<usize>) -> Vec<u32> {
    let k = rng.random_range(len).min(universe);
    let mut v: Vec<u32> = sample(rng, universe, k).into_iter().map(|x| x as u32).collect();
    v.sort_unstable();
    v
}

fn merge_count(r: &[u32], s: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < r.len() && j < s.len() {
        match r[i].cmp(&s[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Point reached after `hops` merge steps from `(i, j)`, taking `s` first on
/// ties.
fn walk(r: &[u32], s: &[u32], (mut i, mut j): (usize, usize), hops: usize) -> (usize, usize) {
    for _ in 0..hops {
        if j < s.len() && (i == r.len() || s[j] <= r[i]) {
            j += 1;
        } else {
            i += 1;
        }
    }
    (i, j)
}

#[test]
fn criterion_3_intersect_path() {
    let _guard = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let lanes = [1usize, 2, 4, 8, 32, 128];
    let mut failures = Vec::new();
    for case in 0..10_000 {
        let big = rng.random_range(0..=2000usize);
        let skew = rng.random_range(1..=100usize);
        let small = big / skew;
        let universe = (big * 2).max(16);
        let mut r = random_set(&mut rng, universe, big..big + 1);
        let mut s = random_set(&mut rng, universe, small..small + 1);
        if rng.random_bool(0.5) {
            std::mem::swap(&mut r, &mut s);
        }
        let expected = merge_count(&r, &s);
        for &b in &lanes {
            let parts = intersect_path_partitions(&r, &s, b);
            let spacing = diagonal_spacing(r.len() + s.len(), b);
            let mut at = (0, 0);
            let mut total = 0;
            let mut ok = parts.len() == b;
            for p in &parts {
                ok &= (p.start_r, p.start_s) == at && p.hops <= spacing;
                at = walk(&r, &s, at, p.hops);
                total += partition_count(&r, &s, p);
            }
            ok &= at == (r.len(), s.len()) && total == expected;
            if !ok {
                failures.push(format!("case {case} |r|={} |s|={} B={b}", r.len(), s.len()));
            }
        }
    }
    let ok = failures.is_empty();
    verdict("3", ok, &format!("60000 partitionings of 10000 pairs, {} failures", failures.len()));
    assert!(ok, "{:?}", &failures[..failures.len().min(10)]);
}

// ---------------------------------------------------------------------------
// 4: chunking and parallelism invariance

#[test]
fn criterion_4_chunking_invariance() {
    let _guard = serial();
    let config = SynthConfig {
        n: 5000,
        sizes: SizeDistribution::Zipf { max: 60, exponent: 0.8 },
        universe: 2000,
        tokens: TokenDistribution::Zipf { exponent: 1.0 },
        near_duplicate_rate: 0.3,
        ..SynthConfig::default()
    };
    let c = collection_from(&config, 4);
    let pred = SimilarityPredicate::jaccard("0.6").unwrap();
    let max_workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut outputs: BTreeMap<Vec<u8>, Vec<String>> = BTreeMap::new();
    let mut chunk_counts = Vec::new();
    for budget in [64 << 10, 1 << 20, UNBOUNDED_BUDGET] {
        for workers in [1, 4, max_workers] {
            let report = run_join(
                &c,
                &pred,
                Algorithm::PPJoin,
                &PipelineConfig { chunk_budget: budget, workers, mode: OutputMode::Pairs, ..PipelineConfig::default() },
            )
            .unwrap();
            chunk_counts.push(report.chunk_count);
            let mut bytes = Vec::new();
            write_result(&mut bytes, &report.result).unwrap();
            outputs.entry(bytes).or_default().push(format!("M_c={budget} workers={workers}"));
        }
    }
    let pairs = outputs.keys().next().map_or(0, |b| b.iter().filter(|&&x| x == b'\n').count());
    let ok = outputs.len() == 1 && pairs > 0 && chunk_counts.iter().any(|&n| n > 1);
    verdict(
        "4",
        ok,
        &format!("9 runs, {} distinct outputs, {pairs} pairs, chunk counts {chunk_counts:?}", outputs.len()),
    );
    assert!(ok, "{:?}", outputs.values().collect::<Vec<_>>());
}

// ---------------------------------------------------------------------------
// 5: overlap of generation and verification, strategy selection

fn median_report(c: &Collection, pred: &SimilarityPredicate, algorithm: Algorithm, config: &PipelineConfig) -> JoinReport {
    let mut reports: Vec<JoinReport> = (0..3).map(|_| run_join(c, pred, algorithm, config).unwrap()).collect();
    reports.sort_by_key(|r| r.timings.join);
    reports.swap_remove(1)
}

fn median_verification(c: &Collection, pred: &SimilarityPredicate, strategy: Strategy, group_size: usize) -> Duration {
    let config = PipelineConfig {
        chunk_budget: 1 << 20,
        strategy,
        group_size,
        mode: OutputMode::Count,
        workers: 1,
    };
    let mut times: Vec<Duration> =
        (0..3).map(|_| run_join(c, pred, Algorithm::PPJoin, &config).unwrap().timings.verification).collect();
    times.sort();
    times[1]
}

#[test]
fn criterion_5_execution_overlap() {
    let _guard = serial();
    let sc = SynthConfig {
        n: 50_000,
        sizes: SizeDistribution::Uniform { min: 1, max: 20 },
        universe: 2000,
        tokens: TokenDistribution::Zipf { exponent: 1.0 },
        duplicate_rate: 0.6,
        near_duplicate_rate: 0.1,
    };
    let c = collection_from(&sc, 5);
    let pred = SimilarityPredicate::jaccard("0.9").unwrap();
    let config = PipelineConfig {
        chunk_budget: 64 << 10,
        strategy: Strategy::B,
        mode: OutputMode::Count,
        workers: 1,
        ..PipelineConfig::default()
    };
    let r = median_report(&c, &pred, Algorithm::GroupJoin, &config);
    let t = r.timings;
    let chunks = r.chunk_count.max(1) as f64;
    let generation_per_chunk = (t.filtering + t.serialization).as_secs_f64() / chunks;
    let verification_per_chunk = t.verification.as_secs_f64() / chunks;
    let bound = (t.filtering + t.serialization + t.last_chunk_verification).mul_f64(1.10);
    let shaped = r.chunk_count >= 10 && verification_per_chunk < generation_per_chunk;
    let ok = shaped && t.join <= bound;
    verdict(
        "5a",
        ok,
        &format!(
            "{} chunks; join {:.1} ms <= 1.1 x (filtering {:.1} + serialization {:.1} + last chunk {:.2}) = {:.1} ms; \
             per chunk: generation {:.3} ms, verification {:.3} ms; stall {:.2} ms, total verification {:.1} ms",
            r.chunk_count,
            ms(t.join),
            ms(t.filtering),
            ms(t.serialization),
            ms(t.last_chunk_verification),
            ms(bound),
            generation_per_chunk * 1e3,
            verification_per_chunk * 1e3,
            ms(t.producer_stall),
            ms(t.verification),
        ),
    );
    assert!(ok);
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

#[test]
fn criterion_5_small_sets_favor_strategy_b() {
    let _guard = serial();
    let config = SynthConfig {
        n: 20_000,
        sizes: SizeDistribution::Uniform { min: 2, max: 10 },
        universe: 500,
        tokens: TokenDistribution::Zipf { exponent: 1.0 },
        near_duplicate_rate: 0.3,
        ..SynthConfig::default()
    };
    let c = collection_from(&config, 51);
    let pred = SimilarityPredicate::jaccard("0.6").unwrap();
    let b = median_verification(&c, &pred, Strategy::B, 32);
    let cc = median_verification(&c, &pred, Strategy::C, 32);
    let ok = b <= cc;
    verdict(
        "5b",
        ok,
        &format!("average size {:.1}: strategy B {:.1} ms <= strategy C {:.1} ms", c.average_set_size(), ms(b), ms(cc)),
    );
    assert!(ok);
}

#[test]
fn criterion_5_large_sets_favor_strategy_c() {
    let _guard = serial();
    let config = SynthConfig {
        n: 3000,
        sizes: SizeDistribution::Uniform { min: 100, max: 200 },
        universe: 5000,
        tokens: TokenDistribution::Zipf { exponent: 0.9 },
        near_duplicate_rate: 0.3,
        ..SynthConfig::default()
    };
    let c = collection_from(&config, 52);
    let pred = SimilarityPredicate::jaccard("0.6").unwrap();
    let b = median_verification(&c, &pred, Strategy::B, 128);
    let cc = median_verification(&c, &pred, Strategy::C, 128);
    let ok = c.average_set_size() >= 100.0 && cc <= b;
    verdict(
        "5c",
        ok,
        &format!("average size {:.1}: strategy C (B=128) {:.1} ms <= strategy B {:.1} ms", c.average_set_size(), ms(cc), ms(b)),
    );
    assert!(ok);
}
