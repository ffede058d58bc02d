use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use stix::bench::{
    self, emit_report, generate_workload, snapshot_load, snapshot_save, BenchConfig, DataSource, Distribution,
    KeywordCount, ReportFormat, SyntheticSpec, WorkloadQuery, WorkloadSpec,
};
use stix::{Dataset, IndexHandle, IndexParams, IndexVariant, Point};

#[derive(Parser)]
#[command(name = "stix", version, about = "Spatio-textual indexing and benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV (`id,x,y,kw1;kw2`).
    Gen(GenArgs),
    /// Build an index over a CSV dataset and write a snapshot.
    Build(BuildArgs),
    /// Run window or kNN queries against a snapshot.
    Query(QueryArgs),
    /// Draw a query workload from a dataset.
    Workload(WorkloadArgs),
    /// Sweep variants and query parameters and report metrics.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SeedArg {
    #[arg(long, env = "STIX_SEED", default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10_000)]
    count: usize,
    /// `uniform` or `gaussian`.
    #[arg(long, default_value = "uniform")]
    distribution: String,
    #[arg(long, default_value_t = 300)]
    vocab: usize,
    #[arg(long, default_value_t = 1.0)]
    zipf: f64,
    #[arg(long, default_value_t = 3.0)]
    mean_keywords: f64,
}

impl SynthArgs {
    fn spec(&self, seed: u64) -> Result<SyntheticSpec> {
        Ok(SyntheticSpec {
            count: self.count,
            distribution: self.distribution.parse::<Distribution>()?,
            vocabulary: self.vocab,
            zipf_exponent: self.zipf,
            mean_keywords: self.mean_keywords,
            seed,
        })
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    synth: SynthArgs,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long)]
    min_node: Option<usize>,
    #[arg(long)]
    max_node: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    partition_frac: f64,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    /// Mini-batch size for model training; 0 trains on the full batch.
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Widen inner-node routing by the models' error bounds.
    #[arg(long)]
    inner_error_margins: bool,
}

impl ParamArgs {
    fn params(&self, seed: u64) -> IndexParams {
        IndexParams {
            block_size: self.block_size,
            min_node: self.min_node,
            max_node: self.max_node,
            partition_frac: self.partition_frac,
            learning_rate: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            inner_error_margins: self.inner_error_margins,
        }
    }
}

#[derive(Args)]
struct BuildArgs {
    /// Index variant: rstar-if, ir2, rsmi-if, rsmi-bm, rsmi-bm-star, rsmi-bm-ir2.
    #[arg(long)]
    index: IndexVariant,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct QueryArgs {
    /// Snapshot written by `build`.
    #[arg(long)]
    index: PathBuf,
    /// Query location in the dataset's original coordinates, as `x,y`.
    #[arg(long, conflicts_with = "workload")]
    at: Option<String>,
    /// Comma-separated query keywords.
    #[arg(long, default_value = "", conflicts_with = "workload")]
    keywords: String,
    /// Workload file written by `workload`.
    #[arg(long)]
    workload: Option<PathBuf>,
    /// Window side as a fraction of the normalised space.
    #[arg(long, conflicts_with = "k")]
    window_frac: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `json-lines` or `csv`.
    #[arg(long, default_value = "json-lines")]
    format: String,
    #[arg(long)]
    inner_error_margins: bool,
}

#[derive(Args)]
struct WorkloadArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = bench::workload::DEFAULT_QUERIES)]
    queries: usize,
    /// Keywords per query: `N` or a range `A-B`.
    #[arg(long, default_value = "1-3")]
    keywords: KeywordCount,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct BenchArgs {
    /// CSV dataset; a synthetic one is generated when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthArgs,
    /// Comma-separated variants, or `all`.
    #[arg(long, default_value = "all")]
    index: String,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    window_frac: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    k: Vec<usize>,
    /// Comma-separated keyword counts, each `N` or `A-B`.
    #[arg(long, value_delimiter = ',', default_value = "1-3")]
    keywords: Vec<KeywordCount>,
    #[arg(long, default_value_t = bench::workload::DEFAULT_QUERIES)]
    queries: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `json-lines` or `csv`.
    #[arg(long, default_value = "json-lines")]
    format: String,
    #[arg(long)]
    parallel_queries: bool,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    seed: SeedArg,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Build(a) => build(a),
        Command::Query(a) => query(a),
        Command::Workload(a) => workload(a),
        Command::Bench(a) => bench_cmd(a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn gen(a: GenArgs) -> Result<()> {
    let data = bench::generate(&a.synth.spec(a.seed.seed)?)?;
    let mut out = output(Some(&a.out))?;
    bench::write_csv(&data, &mut out)?;
    out.flush()?;
    eprintln!("wrote {} objects to {}", data.len(), a.out.display());
    Ok(())
}

fn load_data(path: &Path) -> Result<Arc<Dataset>> {
    Ok(Arc::new(
        bench::ingest_csv(path).with_context(|| format!("reading {}", path.display()))?,
    ))
}

fn build(a: BuildArgs) -> Result<()> {
    let data = load_data(&a.data)?;
    let handle = IndexHandle::build(data, a.index, &a.params.params(a.seed.seed))?;
    snapshot_save(&handle, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!(
        "built {} over {} objects in {:.2}s ({} bytes) -> {}",
        a.index,
        handle.dataset().len(),
        handle.meta().build_seconds,
        handle.memory_bytes(),
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct QueryRecord<'a> {
    query: usize,
    ids: &'a [u64],
    #[serde(skip_serializing_if = "Option::is_none")]
    distances: Option<&'a [f64]>,
}

fn parse_point(s: &str) -> Result<Point> {
    let (x, y) = s.split_once(',').context("expected `x,y`")?;
    Ok(Point::new(x.trim().parse()?, y.trim().parse()?))
}

fn read_workload(path: &Path) -> Result<Vec<WorkloadQuery>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    BufReader::new(file)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, l)| {
            let l = l?;
            serde_json::from_str(&l).with_context(|| format!("{}:{}", path.display(), i + 1))
        })
        .collect()
}

fn query(a: QueryArgs) -> Result<()> {
    let format: ReportFormat = a.format.parse()?;
    let handle = snapshot_load(&a.index).with_context(|| format!("loading {}", a.index.display()))?;
    let data = handle.dataset();
    let queries = match (&a.workload, &a.at) {
        (Some(path), _) => read_workload(path)?,
        (None, Some(at)) => {
            let raw = parse_point(at)?;
            let point = data.normalization().map_or(raw, |n| n.apply(&raw));
            // Unknown words map to an id outside the vocabulary, which matches nothing.
            let keywords = a
                .keywords
                .split(',')
                .map(str::trim)
                .filter(|w| !w.is_empty())
                .map(|w| data.vocabulary().id(w).unwrap_or(u32::MAX))
                .collect();
            vec![WorkloadQuery { source: 0, point, keywords }]
        }
        (None, None) => bail!("give either --at or --workload"),
    };
    let mut opts = handle.options();
    opts.inner_error_margins |= a.inner_error_margins;
    let mut stats = stix::QueryStats::default();
    let mut results = Vec::with_capacity(queries.len());
    for q in &queries {
        let r = match (a.window_frac, a.k) {
            (Some(f), None) => handle.execute_bwq_with(&q.bwq(f), &opts, &mut stats),
            (None, Some(k)) => handle.execute_bkq_with(&q.bkq(k)?, &opts, &mut stats)?,
            _ => bail!("give exactly one of --window-frac or --k"),
        };
        results.push(r);
    }
    let mut out = output(a.out.as_deref())?;
    match format {
        ReportFormat::JsonLines => {
            for (i, r) in results.iter().enumerate() {
                let rec = QueryRecord {
                    query: i,
                    ids: r.ids(),
                    distances: r.distances(),
                };
                serde_json::to_writer(&mut out, &rec)?;
                writeln!(out)?;
            }
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["query", "rank", "id", "distance"])?;
            for (i, r) in results.iter().enumerate() {
                for (rank, id) in r.ids().iter().enumerate() {
                    let d = r.distances().map(|d| d[rank].to_string()).unwrap_or_default();
                    w.write_record([i.to_string(), rank.to_string(), id.to_string(), d])?;
                }
            }
            w.flush()?;
        }
    }
    out.flush()?;
    log::info!("{} queries, {stats:?}", queries.len());
    Ok(())
}

fn workload(a: WorkloadArgs) -> Result<()> {
    let data = load_data(&a.data)?;
    let spec = WorkloadSpec {
        queries: a.queries,
        keywords: a.keywords,
        seed: a.seed.seed,
    };
    let queries = generate_workload(&data, &spec)?;
    let mut out = output(Some(&a.out))?;
    for q in &queries {
        serde_json::to_writer(&mut out, q)?;
        writeln!(out)?;
    }
    out.flush()?;
    eprintln!("wrote {} queries to {}", queries.len(), a.out.display());
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    let format: ReportFormat = a.format.parse()?;
    let variants = if a.index.trim().eq_ignore_ascii_case("all") {
        IndexVariant::ALL.to_vec()
    } else {
        a.index
            .split(',')
            .map(|s| s.parse::<IndexVariant>())
            .collect::<stix::Result<Vec<_>>>()?
    };
    let seed = a.seed.seed;
    let source = match a.data {
        Some(p) => DataSource::Csv(p),
        None => DataSource::Synthetic(a.synth.spec(seed)?),
    };
    let config = BenchConfig {
        source,
        variants,
        params: a.params.params(seed),
        queries: a.queries,
        seed,
        window_fracs: a.window_frac,
        ks: a.k,
        keyword_counts: a.keywords,
        parallel_queries: a.parallel_queries,
    };
    let rows = bench::run_benchmark(&config)?;
    let mut out = output(a.out.as_deref())?;
    emit_report(&rows, format, &mut out)?;
    out.flush()?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} rows carry an error", rows.len());
    }
    Ok(())
}
