//! Command-line front end: dataset generation, ground truth, index build,
//! search, benchmarking, window sweeps and pruning studies.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sparse_mips::approx::{
    build_approx, load_approx, search_approx, search_no_reorder, ApproxScratch, ApproxSearchParams,
    DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_GAMMA,
};
use sparse_mips::eval::{
    compute_ground_truth, fit_window_model, load_ground_truth, match_strategy, prune_study,
    run_bench, save_ground_truth, sweep_window, BenchConfig, StudyConfig,
};
use sparse_mips::pruning::{computation_reduction, PruneStrategy};
use sparse_mips::{dataset_stats, gen_random, load_csr, save_csr, DatasetF32, DEFAULT_LAMBDA};

/// Version of the CSV and JSON output schemas.
const FORMAT_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "sparse-mips", version, about = "Sparse maximum inner product search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a uniform random CSR dataset.
    Gen(GenArgs),
    /// Print dataset statistics as JSON.
    Stats(StatsArgs),
    /// Compute exact top-k answers for a query file.
    Groundtruth(GroundtruthArgs),
    /// Build an approximate index directory.
    Build(BuildArgs),
    /// Search an index and write per-query results as CSV.
    Search(SearchArgs),
    /// Measure throughput and recall of an index.
    Bench(BenchArgs),
    /// Time exact search across window sizes.
    Sweep(SweepArgs),
    /// Compare pruning strategies on recall, throughput and postings.
    PruneStudy(PruneStudyArgs),
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    nnz: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct StatsArgs {
    #[arg(long)]
    data: PathBuf,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct Threads {
    /// Worker threads; defaults to SPARSE_MIPS_THREADS, then the core count.
    #[arg(long, env = "SPARSE_MIPS_THREADS")]
    threads: Option<usize>,
}

impl Threads {
    fn get(&self) -> Result<usize> {
        match self.threads {
            Some(0) => Err(CliError::invalid("threads must be at least 1")),
            Some(t) => Ok(t),
            None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }
}

#[derive(Args, Serialize)]
struct GroundtruthArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    threads: Threads,
}

#[derive(Args, Serialize)]
struct BuildArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: usize,
    /// Mass ratio for the default `mrp` strategy.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Pruning strategy as kind:param (mrp:0.5, vnp:40, lp:500, top:0.3);
    /// overrides --alpha.
    #[arg(long)]
    strategy: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize, Clone, Copy)]
struct SearchParams {
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Return the coarse top-k without exact reordering.
    #[arg(long)]
    no_reorder: bool,
}

impl SearchParams {
    fn params(&self) -> Result<ApproxSearchParams> {
        Ok(ApproxSearchParams::new(self.beta, self.gamma, self.k)?)
    }
}

#[derive(Args, Serialize)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    search: SearchParams,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct BenchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Ground-truth file; enables the recall column.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    search: SearchParams,
    #[command(flatten)]
    #[serde(flatten)]
    threads: Threads,
    /// Write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the report as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write per-query results as CSV.
    #[arg(long)]
    results: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Comma-separated window sizes; `n` stands for the dataset size.
    #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000,n")]
    lambdas: Vec<String>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Fit the double power-law model to mean latency and append it.
    #[arg(long)]
    fit: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct PruneStudyArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Ground-truth file; computed when absent.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Comma-separated strategies, e.g. mrp:0.3,mrp:0.5,vnp:40,lp:500.
    #[arg(long, value_delimiter = ',', default_value = "mrp:0.3,mrp:0.4,mrp:0.5,mrp:0.6,mrp:0.7,mrp:0.8,mrp:0.9")]
    strategies: Vec<String>,
    /// Add vnp and lp rows matched to each mrp row's computation reduction.
    #[arg(long)]
    matched: bool,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: usize,
    #[command(flatten)]
    #[serde(flatten)]
    search: SearchParams,
    #[command(flatten)]
    #[serde(flatten)]
    threads: Threads,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Core(sparse_mips::Error),
    Invalid(String),
    Io(String),
    Internal(String),
}

impl CliError {
    fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(e) if e.is_io() => 3,
            CliError::Core(_) => 4,
            CliError::Invalid(_) => 2,
            CliError::Io(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Invalid(m) | CliError::Io(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<sparse_mips::Error> for CliError {
    fn from(e: sparse_mips::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(format!("csv: {e}"))
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// `# key=value` lines echoing the command and its flags.
fn header_lines(command: &str, args: &impl Serialize) -> Vec<String> {
    let mut lines = vec![format!("# sparse-mips {command} format_version={FORMAT_VERSION}")];
    if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(args) {
        for (k, v) in map {
            let v = match v {
                serde_json::Value::String(s) => s,
                serde_json::Value::Null => String::new(),
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|i| i.as_str().map_or_else(|| i.to_string(), str::to_string))
                    .collect::<Vec<_>>()
                    .join(","),
                other => other.to_string(),
            };
            lines.push(format!("# {k}={v}"));
        }
    }
    lines
}

/// Writes commented header lines followed by CSV records.
fn write_csv<R: Serialize>(path: &Path, header: &[String], rows: &[R]) -> Result<()> {
    let mut file = create(path)?;
    for line in header {
        writeln!(file, "{line}").map_err(io_err(path))?;
    }
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut file = create(path)?;
    serde_json::to_writer_pretty(&mut file, value).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    writeln!(file).map_err(io_err(path))?;
    file.flush().map_err(io_err(path))
}

fn print_json(value: &impl Serialize) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Io(format!("stdout: {e}")))?;
    writeln!(out).map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn load(path: &Path) -> Result<DatasetF32> {
    Ok(load_csr(path)?)
}

fn parse_strategy(s: &str) -> Result<PruneStrategy> {
    Ok(s.trim().parse::<PruneStrategy>()?)
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let ds: DatasetF32 = gen_random(a.n, a.d, a.nnz, a.seed)?;
    save_csr(&ds, &a.out)?;
    Ok(())
}

fn cmd_stats(a: &StatsArgs) -> Result<()> {
    let stats = dataset_stats(&load(&a.data)?);
    match &a.out {
        Some(p) => write_json(p, &stats),
        None => print_json(&stats),
    }
}

fn cmd_groundtruth(a: &GroundtruthArgs) -> Result<()> {
    let threads = a.threads.get()?;
    let ds = load(&a.data)?;
    let qs = load(&a.queries)?;
    let gt = compute_ground_truth(&ds, &qs, a.k, threads)?;
    save_ground_truth(&gt, &a.out)?;
    Ok(())
}

fn cmd_build(a: &BuildArgs) -> Result<()> {
    let strategy = match &a.strategy {
        Some(s) => parse_strategy(s)?,
        None => PruneStrategy::MassRatio(a.alpha),
    };
    strategy.validate()?;
    if a.lambda == 0 {
        return Err(CliError::invalid("lambda must be positive"));
    }
    let ds = load(&a.data)?;
    let aidx = build_approx(ds, a.lambda, strategy)?;
    sparse_mips::save_approx(&aidx, &a.out)?;
    Ok(())
}

#[derive(Serialize)]
struct ResultRow {
    query: usize,
    rank: usize,
    id: u32,
    score: f64,
}

fn result_rows(results: &[sparse_mips::TopKResult]) -> Vec<ResultRow> {
    results
        .iter()
        .enumerate()
        .flat_map(|(query, r)| {
            r.entries().iter().enumerate().map(move |(rank, h)| ResultRow {
                query,
                rank,
                id: h.id,
                score: h.score,
            })
        })
        .collect()
}

fn cmd_search(a: &SearchArgs) -> Result<()> {
    let params = a.search.params()?;
    let aidx = load_approx::<f32>(&a.index)?;
    let qs = load(&a.queries)?;
    let mut scratch = ApproxScratch::for_index(&aidx);
    let mut results = Vec::with_capacity(qs.n());
    for q in qs.rows() {
        results.push(if a.search.no_reorder {
            search_no_reorder(&aidx, q, params.beta, params.k, &mut scratch)?
        } else {
            search_approx(&aidx, q, &params, &mut scratch)?
        });
    }
    write_csv(&a.out, &header_lines("search", a), &result_rows(&results))
}

#[derive(Serialize)]
struct BenchJson<'a> {
    format_version: u32,
    command: &'a str,
    args: &'a BenchArgs,
    report: &'a sparse_mips::BenchReport,
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let params = a.search.params()?;
    let threads = a.threads.get()?;
    let aidx = load_approx::<f32>(&a.index)?;
    let qs = load(&a.queries)?;
    let truth = a.truth.as_ref().map(load_ground_truth).transpose()?;
    let mut cfg = BenchConfig::new(params, threads);
    cfg.reorder = !a.search.no_reorder;
    let run = run_bench(&aidx, &qs, &cfg, truth.as_ref())?;
    let header = header_lines("bench", a);
    let json = BenchJson {
        format_version: FORMAT_VERSION,
        command: "bench",
        args: a,
        report: &run.report,
    };
    if let Some(p) = &a.json {
        write_json(p, &json)?;
    }
    if let Some(p) = &a.csv {
        write_csv(p, &header, std::slice::from_ref(&run.report))?;
    }
    if let Some(p) = &a.results {
        write_csv(p, &header, &result_rows(&run.results))?;
    }
    print_json(&json)
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let qs = load(&a.queries)?;
    let lambdas = a
        .lambdas
        .iter()
        .map(|s| match s.trim() {
            "n" => Ok(ds.n()),
            t => t
                .parse::<usize>()
                .map_err(|_| CliError::invalid(format!("bad window size '{t}'"))),
        })
        .collect::<Result<Vec<usize>>>()?;
    let rep = sweep_window(&ds, &qs, &lambdas, a.k)?;
    let mut header = header_lines("sweep", a);
    header.push(format!("# results_invariant={}", rep.results_invariant));
    header.push(format!("# postings_invariant={}", rep.postings_invariant));
    if a.fit {
        let samples: Vec<(f64, f64)> = rep
            .rows
            .iter()
            .map(|r| (r.lambda as f64, r.mean_latency_us))
            .collect();
        let fit = fit_window_model(&samples)?;
        header.push(format!(
            "# fit a_coef={} a_exp={} b_coef={} b_exp={} c_base={} lambda_star={}",
            fit.a_coef,
            fit.a_exp,
            fit.b_coef,
            fit.b_exp,
            fit.c_base,
            fit.lambda_star.map_or(String::new(), |l| l.to_string())
        ));
    }
    write_csv(&a.out, &header, &rep.rows)?;
    if !(rep.results_invariant && rep.postings_invariant) {
        return Err(CliError::Internal("results differ across window sizes".into()));
    }
    Ok(())
}

fn cmd_prune_study(a: &PruneStudyArgs) -> Result<()> {
    let params = a.search.params()?;
    let threads = a.threads.get()?;
    let mut strategies = a
        .strategies
        .iter()
        .map(|s| parse_strategy(s))
        .collect::<Result<Vec<_>>>()?;
    if a.lambda == 0 {
        return Err(CliError::invalid("lambda must be positive"));
    }
    let ds = load(&a.data)?;
    let qs = load(&a.queries)?;
    let truth = match &a.truth {
        Some(p) => load_ground_truth(p)?,
        None => compute_ground_truth(&ds, &qs, params.k, threads)?,
    };
    if a.matched {
        let pq = PruneStrategy::MassRatio(params.beta).apply(&qs)?;
        let mut extra = Vec::new();
        for s in &strategies {
            if let PruneStrategy::MassRatio(_) = s {
                let target = computation_reduction(&ds, &s.apply(&ds)?, &qs, &pq)?;
                for kind in [PruneStrategy::VectorNumber(0), PruneStrategy::ListLength(0)] {
                    extra.push(match_strategy(&ds, &qs, kind, target, params.beta)?.0);
                }
            }
        }
        strategies.extend(extra);
    }
    let cfg = StudyConfig {
        params,
        lambda: a.lambda,
        threads,
        reorder: !a.search.no_reorder,
    };
    let rows = prune_study(&ds, &qs, &truth, &strategies, &cfg)?;
    write_csv(&a.out, &header_lines("prune-study", a), &rows)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Groundtruth(a) => cmd_groundtruth(a),
        Command::Build(a) => cmd_build(a),
        Command::Search(a) => cmd_search(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::PruneStudy(a) => cmd_prune_study(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
