//! Command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::collection::{build_dictionary, preprocess, preprocess_pair, read_coded_records, read_records, Collection};
use crate::joiners::Algorithm;
use crate::oracle::{synth_collection, SizeDistribution, SynthConfig, TokenDistribution};
use crate::pipeline::{run_join, JoinReport, JoinResult, PipelineConfig, UNBOUNDED_BUDGET};
use crate::similarity::{SimilarityFunction, SimilarityPredicate, Threshold};
use crate::verify::{OutputMode, Strategy};
use crate::{Error, Result};

pub const CSV_HEADER: &str =
    "threshold,algorithm,strategy,join_ms,filtering_ms,serialization_ms,verification_ms,candidates,chunks,result";
/// Extra columns appended by `bench`.
pub const BENCH_CSV_EXTRA: &str = "sets,candidate_bytes";

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ssjoin", version, about = "Exact set-similarity joins")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Join one collection with itself, or two collections with each other.
    Join(JoinArgs),
    /// Run a synthetic benchmark grid and write CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    #[arg(long, default_value = "jaccard")]
    pub similarity: SimilarityFunction,
    /// Verification strategy: a, b, c or auto.
    #[arg(long, default_value = "auto")]
    pub strategy: Strategy,
    /// Workers per group for strategies B and C (power of two).
    #[arg(long, default_value_t = 32, value_parser = parse_group_size)]
    pub group_size: usize,
    /// Byte budget per candidate chunk, e.g. 64K, 16M, 1G or inf.
    #[arg(long, default_value = "64M", value_parser = parse_budget)]
    pub chunk_budget: usize,
    /// Verification threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Args)]
pub struct JoinArgs {
    #[arg(long, default_value = "ppjoin")]
    pub algorithm: Algorithm,
    /// Decimal or fraction in (0, 1], or a positive integer for overlap.
    #[arg(long)]
    pub threshold: String,
    #[arg(long, default_value = "count")]
    pub mode: OutputMode,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub report: ReportFormat,
    /// Write results here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Inputs already hold integer token codes.
    #[arg(long)]
    pub pre_coded: bool,
    /// One file for a self-join, two for an R-S join.
    #[arg(required = true, num_args = 1..=2)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// All algorithms over growing collections.
    Scaling,
    /// Strategies A, B and C for one algorithm.
    Strategies,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Workload {
    Uniform,
    Zipf,
    Duplicates,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Suite::Scaling)]
    pub suite: Suite,
    /// Collection sizes, e.g. 1k,10k.
    #[arg(long, default_value = "1k", value_parser = parse_sizes)]
    pub sizes: SizeList,
    /// start:end:step, or a single threshold.
    #[arg(long, default_value = "0.5:0.95:0.05", value_parser = parse_threshold_range)]
    pub thresholds: ThresholdList,
    /// Restrict to one algorithm (scaling runs all by default, strategies uses ppjoin).
    #[arg(long)]
    pub algorithm: Option<Algorithm>,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, value_enum, default_value_t = Workload::Zipf)]
    pub workload: Workload,
    /// Largest synthetic set size.
    #[arg(long, default_value_t = 50)]
    pub max_set_size: usize,
    #[arg(long, default_value_t = 10_000)]
    pub universe: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Parsed `--sizes` list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeList(pub Vec<usize>);

/// Parsed `--thresholds` range, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdList(pub Vec<Threshold>);

fn parse_group_size(s: &str) -> std::result::Result<usize, String> {
    let n: usize = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if n == 0 || !n.is_power_of_two() {
        return Err(format!("group size must be a power of two, got {n}"));
    }
    Ok(n)
}

/// Bytes with optional K/M/G suffix (powers of 1024); `inf` for no limit.
pub fn parse_budget(s: &str) -> std::result::Result<usize, String> {
    let t = s.trim().to_ascii_lowercase();
    if matches!(t.as_str(), "inf" | "unbounded" | "none") {
        return Ok(UNBOUNDED_BUDGET);
    }
    let t = t.strip_suffix('b').unwrap_or(&t);
    let (digits, shift) = match t.chars().last() {
        Some('k') => (&t[..t.len() - 1], 10),
        Some('m') => (&t[..t.len() - 1], 20),
        Some('g') => (&t[..t.len() - 1], 30),
        _ => (t, 0),
    };
    let n: usize = digits.parse().map_err(|_| format!("invalid byte size '{s}'"))?;
    n.checked_mul(1usize << shift).ok_or_else(|| format!("byte size '{s}' overflows"))
}

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    let t = s.trim().to_ascii_lowercase();
    let (digits, mult) = match t.chars().last() {
        Some('k') => (&t[..t.len() - 1], 1_000),
        Some('m') => (&t[..t.len() - 1], 1_000_000),
        _ => (t.as_str(), 1),
    };
    digits.parse::<usize>().map(|n| n * mult).map_err(|_| format!("invalid size '{s}'"))
}

fn parse_sizes(s: &str) -> std::result::Result<SizeList, String> {
    let sizes = s.split(',').map(parse_count).collect::<std::result::Result<Vec<_>, _>>()?;
    if sizes.iter().any(|&n| n == 0) {
        return Err("sizes must be positive".into());
    }
    Ok(SizeList(sizes))
}

/// `start:end:step` stepped in exact rational arithmetic, end inclusive.
pub fn parse_threshold_range(s: &str) -> std::result::Result<ThresholdList, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let parse = |x: &str| Threshold::parse(x).map_err(|e| e.to_string());
    match parts.as_slice() {
        [single] => Ok(ThresholdList(vec![parse(single)?])),
        [start, end, step] => {
            let (start, end, step) = (parse(start)?, parse(end)?, parse(step)?);
            if step.numer() == 0 {
                return Err("step must be positive".into());
            }
            let mut out = Vec::new();
            for k in 0u64.. {
                // start + k * step = (a d + k c b) / (b d)
                let num = start.numer() * step.denom() + k * step.numer() * start.denom();
                let t = Threshold::new(num, start.denom() * step.denom()).map_err(|e| e.to_string())?;
                if (t.numer() as u128) * (end.denom() as u128) > (end.numer() as u128) * (t.denom() as u128) {
                    break;
                }
                out.push(t);
                if out.len() > 10_000 {
                    return Err("threshold range too long".into());
                }
            }
            Ok(ThresholdList(out))
        }
        _ => Err(format!("expected start:end:step, got '{s}'")),
    }
}

fn open_output<'a>(path: Option<&Path>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(stdout),
    })
}

fn ms(d: Duration) -> String {
    format!("{:.3}", d.as_secs_f64() * 1e3)
}

pub fn csv_row(threshold: &Threshold, algorithm: Algorithm, strategy: Strategy, report: &JoinReport) -> String {
    let t = &report.timings;
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        threshold.to_decimal_string(),
        algorithm.name(),
        strategy.name(),
        ms(t.join),
        ms(t.filtering),
        ms(t.serialization),
        ms(t.verification),
        report.candidate_count,
        report.chunk_count,
        report.result.count()
    )
}

fn load_collection(args: &JoinArgs) -> Result<Collection> {
    let open = |p: &PathBuf| -> Result<BufReader<File>> {
        File::open(p)
            .map(BufReader::new)
            .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", p.display()))))
    };
    if args.pre_coded {
        let mut coded = args.inputs.iter().map(|p| read_coded_records(open(p)?)).collect::<Result<Vec<_>>>()?;
        return Ok(match coded.len() {
            1 => Collection::from_coded(coded.pop().unwrap()),
            _ => {
                let s = coded.pop().unwrap();
                Collection::from_coded_pair(coded.pop().unwrap(), s)
            }
        });
    }
    let inputs = args.inputs.iter().map(|p| read_records(open(p)?)).collect::<Result<Vec<_>>>()?;
    let dictionary = build_dictionary(inputs.iter().flatten())?;
    match inputs.as_slice() {
        [r] => preprocess(r, &dictionary),
        [r, s] => preprocess_pair(r, s, &dictionary),
        _ => unreachable!("clap limits inputs to two"),
    }
}

/// The count on one line, or one `r<TAB>s` line per pair.
pub fn write_result(out: &mut dyn Write, result: &JoinResult) -> io::Result<()> {
    match result {
        JoinResult::Count(n) => writeln!(out, "{n}"),
        JoinResult::Pairs(pairs) => pairs.iter().try_for_each(|(r, s)| writeln!(out, "{r}\t{s}")),
    }
}

fn write_text_summary(out: &mut dyn Write, pred: &SimilarityPredicate, args: &JoinArgs, report: &JoinReport) -> io::Result<()> {
    let t = &report.timings;
    writeln!(
        out,
        "{} {} strategy={} mode={:?}: {} similar pairs",
        args.algorithm,
        pred,
        args.engine.strategy,
        args.mode,
        report.result.count()
    )?;
    writeln!(
        out,
        "candidates={} chunks={} host_verified={}",
        report.candidate_count, report.chunk_count, report.generation.host_pairs
    )?;
    writeln!(
        out,
        "join_ms={} filtering_ms={} serialization_ms={} verification_ms={}",
        ms(t.join),
        ms(t.filtering),
        ms(t.serialization),
        ms(t.verification)
    )
}

fn run_join_command(args: &JoinArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let pred = SimilarityPredicate::parse(args.engine.similarity, &args.threshold)?;
    let collection = load_collection(args)?;
    let config = PipelineConfig {
        chunk_budget: args.engine.chunk_budget,
        strategy: args.engine.strategy,
        group_size: args.engine.group_size,
        mode: args.mode,
        workers: args.engine.workers,
    };
    let report = run_join(&collection, &pred, args.algorithm, &config)?;
    let mut out = open_output(args.output.as_deref(), stdout)?;
    match args.report {
        ReportFormat::Text => {
            write_result(&mut out, &report.result)?;
            write_text_summary(stderr, &pred, args, &report)?;
        }
        ReportFormat::Json => {
            let t = &report.timings;
            let mut doc = json!({
                "schema": 1,
                "algorithm": args.algorithm.name(),
                "similarity": args.engine.similarity.name(),
                "threshold": pred.threshold().to_decimal_string(),
                "strategy": args.engine.strategy.name(),
                "group_size": args.engine.group_size,
                "mode": args.mode,
                "sets": collection.len(),
                "count": report.result.count(),
                "candidates": report.candidate_count,
                "chunks": report.chunk_count,
                "host_verified": report.generation.host_pairs,
                "timings_ms": {
                    "join": t.join.as_secs_f64() * 1e3,
                    "filtering": t.filtering.as_secs_f64() * 1e3,
                    "serialization": t.serialization.as_secs_f64() * 1e3,
                    "verification": t.verification.as_secs_f64() * 1e3,
                },
            });
            if let JoinResult::Pairs(pairs) = &report.result {
                doc["pairs"] = json!(pairs.iter().map(|&(r, s)| [r, s]).collect::<Vec<_>>());
            }
            writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("json"))?;
        }
        ReportFormat::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            writeln!(out, "{}", csv_row(&pred.threshold(), args.algorithm, args.engine.strategy, &report))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn bench_config(args: &BenchArgs, n: usize) -> SynthConfig {
    let max = args.max_set_size.max(1);
    match args.workload {
        Workload::Uniform => SynthConfig {
            n,
            sizes: SizeDistribution::Uniform { min: 1, max },
            universe: args.universe,
            tokens: TokenDistribution::Uniform,
            ..SynthConfig::default()
        },
        Workload::Zipf => SynthConfig {
            n,
            sizes: SizeDistribution::Zipf { max, exponent: 1.0 },
            universe: args.universe,
            tokens: TokenDistribution::Zipf { exponent: 1.0 },
            ..SynthConfig::default()
        },
        Workload::Duplicates => SynthConfig { universe: args.universe, ..SynthConfig::duplicate_heavy(n) },
    }
}

fn run_bench_command(args: &BenchArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut out = open_output(args.output.as_deref(), stdout)?;
    writeln!(out, "{CSV_HEADER},{BENCH_CSV_EXTRA}")?;
    let cells: Vec<(Algorithm, Strategy)> = match args.suite {
        Suite::Scaling => match args.algorithm {
            Some(a) => vec![(a, args.engine.strategy)],
            None => Algorithm::ALL.iter().map(|&a| (a, args.engine.strategy)).collect(),
        },
        Suite::Strategies => {
            let a = args.algorithm.unwrap_or(Algorithm::PPJoin);
            [Strategy::A, Strategy::B, Strategy::C].iter().map(|&s| (a, s)).collect()
        }
    };
    for &n in &args.sizes.0 {
        let records = synth_collection(args.seed, &bench_config(args, n));
        let dictionary = build_dictionary(&records)?;
        let collection = preprocess(&records, &dictionary)?;
        log::info!("bench: {} sets, average size {:.1}", collection.len(), collection.average_set_size());
        for threshold in &args.thresholds.0 {
            let pred = SimilarityPredicate::new(args.engine.similarity, *threshold)?;
            for &(algorithm, strategy) in &cells {
                let config = PipelineConfig {
                    chunk_budget: args.engine.chunk_budget,
                    strategy,
                    group_size: args.engine.group_size,
                    mode: OutputMode::Count,
                    workers: args.engine.workers,
                };
                let report = run_join(&collection, &pred, algorithm, &config)?;
                writeln!(
                    out,
                    "{},{},{}",
                    csv_row(threshold, algorithm, strategy, &report),
                    collection.len(),
                    report.candidate_count * 4
                )?;
                out.flush()?;
            }
        }
    }
    Ok(())
}

fn is_usage_error(e: &Error) -> bool {
    matches!(e, Error::InvalidThreshold(_) | Error::InvalidConfig(_))
}

/// Parses `argv` and runs the command, returning the process exit status.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render();
            let _ = if e.use_stderr() { write!(stderr, "{text}") } else { write!(stdout, "{text}") };
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Join(args) => run_join_command(args, stdout, stderr),
        Command::Bench(args) => run_bench_command(args, stdout),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if is_usage_error(&e) {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}
