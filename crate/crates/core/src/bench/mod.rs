//! Benchmark harness: data sources, workloads, parameter sweeps and reports.

pub mod ingest;
pub mod snapshot;
pub mod synth;
pub mod workload;

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ingest::{ingest_csv, write_csv};
pub use snapshot::{snapshot_load, snapshot_save};
pub use synth::{generate, Distribution, SyntheticSpec};
pub use workload::{generate_workload, KeywordCount, WorkloadQuery, WorkloadSpec};

use crate::domain::{Dataset, ResultSet};
use crate::engine::{IndexHandle, IndexParams, IndexVariant};
use crate::error::{Result, StixError};
use crate::oracle::{knn_deviation, oracle_bkq, oracle_bwq, recall};
use crate::text::QueryStats;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    Csv(PathBuf),
    Synthetic(SyntheticSpec),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Csv(path) => ingest_csv(path),
            DataSource::Synthetic(spec) => generate(spec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub source: DataSource,
    pub variants: Vec<IndexVariant>,
    pub params: IndexParams,
    pub queries: usize,
    pub seed: u64,
    /// Window side lengths as fractions of the unit square side.
    pub window_fracs: Vec<f64>,
    pub ks: Vec<usize>,
    pub keyword_counts: Vec<KeywordCount>,
    pub parallel_queries: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic(SyntheticSpec::default()),
            variants: IndexVariant::ALL.to_vec(),
            params: IndexParams::default(),
            queries: workload::DEFAULT_QUERIES,
            seed: 42,
            window_fracs: vec![workload::DEFAULT_WINDOW_FRAC],
            ks: vec![workload::DEFAULT_K],
            keyword_counts: vec![KeywordCount::Range(1, 3)],
            parallel_queries: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Bwq,
    Bkq,
}

/// One report record per variant and parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub schema_version: u32,
    pub variant: IndexVariant,
    pub query_kind: QueryKind,
    pub window_frac: Option<f64>,
    pub k: Option<usize>,
    pub keywords: String,
    pub queries: usize,
    pub build_seconds: f64,
    pub index_bytes: usize,
    pub mean_latency_us: f64,
    pub median_latency_us: f64,
    pub mean_recall: f64,
    /// Mean kNN deviation in percent over the queries where it is defined.
    pub mean_deviation_pct: Option<f64>,
    pub deviation_count: usize,
    pub mean_nodes_visited: f64,
    pub mean_blocks_visited: f64,
    pub mean_objects_examined: f64,
    pub mean_windows_issued: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    JsonLines,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = StixError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" | "jsonl" | "json-lines" | "jsonlines" => Ok(ReportFormat::JsonLines),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(StixError::InvalidParameter(format!(
                "unknown report format {other:?}; expected json-lines or csv"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Probe {
    Window(f64),
    Knn(usize),
}

struct ParameterPoint {
    kind: Probe,
    keywords: KeywordCount,
    workload: Arc<Vec<WorkloadQuery>>,
    exact: Vec<ResultSet>,
}

struct QueryOutcome {
    latency_us: f64,
    recall: f64,
    deviation: Option<f64>,
    stats: QueryStats,
}

pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<ReportRow>> {
    let data = Arc::new(config.source.load()?);
    run_benchmark_on(data, config)
}

/// Sweeps every variant over every parameter point. Build and query failures
/// are recorded in the `error` column of the affected rows.
pub fn run_benchmark_on(data: Arc<Dataset>, config: &BenchConfig) -> Result<Vec<ReportRow>> {
    if config.window_fracs.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
        return Err(StixError::InvalidParameter("window fractions must be positive".into()));
    }
    if config.ks.contains(&0) {
        return Err(StixError::InvalidParameter("k must be at least 1".into()));
    }
    let points = parameter_points(&data, config)?;
    let mut rows = Vec::new();
    for &variant in &config.variants {
        log::info!("building {variant} over {} objects", data.len());
        match IndexHandle::build(Arc::clone(&data), variant, &config.params) {
            Ok(handle) => {
                for p in &points {
                    rows.push(measure(&handle, p, config.parallel_queries));
                }
            }
            Err(e) => {
                log::warn!("building {variant} failed: {e}");
                for p in &points {
                    let mut row = empty_row(variant, p);
                    row.error = Some(e.to_string());
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}

fn parameter_points(data: &Dataset, config: &BenchConfig) -> Result<Vec<ParameterPoint>> {
    let mut points = Vec::new();
    for &t in &config.keyword_counts {
        let workload = Arc::new(generate_workload(
            data,
            &WorkloadSpec {
                queries: config.queries,
                keywords: t,
                seed: config.seed,
            },
        )?);
        for &f in &config.window_fracs {
            let exact = workload.par_iter().map(|q| oracle_bwq(data, &q.bwq(f))).collect();
            points.push(ParameterPoint {
                kind: Probe::Window(f),
                keywords: t,
                workload: Arc::clone(&workload),
                exact,
            });
        }
        for &k in &config.ks {
            let exact = workload
                .par_iter()
                .map(|q| q.bkq(k).map(|q| oracle_bkq(data, &q)))
                .collect::<Result<_>>()?;
            points.push(ParameterPoint {
                kind: Probe::Knn(k),
                keywords: t,
                workload: Arc::clone(&workload),
                exact,
            });
        }
    }
    Ok(points)
}

fn empty_row(variant: IndexVariant, p: &ParameterPoint) -> ReportRow {
    let (query_kind, window_frac, k) = match p.kind {
        Probe::Window(f) => (QueryKind::Bwq, Some(f), None),
        Probe::Knn(k) => (QueryKind::Bkq, None, Some(k)),
    };
    ReportRow {
        schema_version: REPORT_SCHEMA_VERSION,
        variant,
        query_kind,
        window_frac,
        k,
        keywords: p.keywords.to_string(),
        queries: 0,
        build_seconds: 0.0,
        index_bytes: 0,
        mean_latency_us: 0.0,
        median_latency_us: 0.0,
        mean_recall: 0.0,
        mean_deviation_pct: None,
        deviation_count: 0,
        mean_nodes_visited: 0.0,
        mean_blocks_visited: 0.0,
        mean_objects_examined: 0.0,
        mean_windows_issued: 0.0,
        error: None,
    }
}

fn run_one(handle: &IndexHandle, p: &ParameterPoint, i: usize) -> Result<QueryOutcome> {
    let q = &p.workload[i];
    let opts = handle.options();
    let mut stats = QueryStats::default();
    let started = Instant::now();
    let result = match p.kind {
        Probe::Window(f) => handle.execute_bwq_with(&q.bwq(f), &opts, &mut stats),
        Probe::Knn(k) => handle.execute_bkq_with(&q.bkq(k)?, &opts, &mut stats)?,
    };
    let latency_us = started.elapsed().as_secs_f64() * 1e6;
    let exact = &p.exact[i];
    let deviation = match p.kind {
        Probe::Window(_) => None,
        Probe::Knn(_) => knn_deviation(&result, exact),
    };
    Ok(QueryOutcome {
        latency_us,
        recall: recall(&result, exact),
        deviation,
        stats,
    })
}

fn measure(handle: &IndexHandle, p: &ParameterPoint, parallel: bool) -> ReportRow {
    let mut row = empty_row(handle.variant(), p);
    row.build_seconds = handle.meta().build_seconds;
    row.index_bytes = handle.memory_bytes();
    let n = p.workload.len();
    let pass = || -> Result<Vec<QueryOutcome>> {
        if parallel {
            (0..n).into_par_iter().map(|i| run_one(handle, p, i)).collect()
        } else {
            (0..n).map(|i| run_one(handle, p, i)).collect()
        }
    };
    let outcomes = match pass().and_then(|_| pass()) {
        Ok(o) => o,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.queries = n;
    if n == 0 {
        row.mean_recall = 1.0;
        return row;
    }
    let nf = n as f64;
    let mut latencies: Vec<f64> = outcomes.iter().map(|o| o.latency_us).collect();
    latencies.sort_by(f64::total_cmp);
    row.mean_latency_us = latencies.iter().sum::<f64>() / nf;
    row.median_latency_us = if n % 2 == 1 {
        latencies[n / 2]
    } else {
        (latencies[n / 2 - 1] + latencies[n / 2]) / 2.0
    };
    row.mean_recall = outcomes.iter().map(|o| o.recall).sum::<f64>() / nf;
    let devs: Vec<f64> = outcomes.iter().filter_map(|o| o.deviation).collect();
    row.deviation_count = devs.len();
    row.mean_deviation_pct = (!devs.is_empty()).then(|| devs.iter().sum::<f64>() / devs.len() as f64);
    let mut total = QueryStats::default();
    for o in &outcomes {
        total.merge(&o.stats);
    }
    row.mean_nodes_visited = total.nodes_visited as f64 / nf;
    row.mean_blocks_visited = total.blocks_visited as f64 / nf;
    row.mean_objects_examined = total.objects_examined as f64 / nf;
    row.mean_windows_issued = total.windows_issued as f64 / nf;
    row
}

pub fn emit_report(rows: &[ReportRow], format: ReportFormat, out: impl Write) -> Result<()> {
    match format {
        ReportFormat::JsonLines => {
            let mut out = out;
            for row in rows {
                serde_json::to_writer(&mut out, row).map_err(|e| StixError::Format(e.to_string()))?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for row in rows {
                w.serialize(row).map_err(|e| StixError::Format(e.to_string()))?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
