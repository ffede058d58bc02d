//! A small parameter sweep over every variant, reported as CSV on stdout.

use stix::bench::{emit_report, run_benchmark, BenchConfig, DataSource, KeywordCount, ReportFormat, SyntheticSpec};
use stix::IndexParams;

pub fn run() -> stix::Result<()> {
    let config = BenchConfig {
        source: DataSource::Synthetic(SyntheticSpec {
            count: 10_000,
            vocabulary: 100,
            ..SyntheticSpec::default()
        }),
        params: IndexParams {
            epochs: 100,
            ..IndexParams::default()
        },
        queries: 100,
        window_fracs: vec![0.05, 0.1],
        ks: vec![10],
        keyword_counts: vec![KeywordCount::Fixed(1), KeywordCount::Fixed(2)],
        parallel_queries: true,
        ..BenchConfig::default()
    };
    let rows = run_benchmark(&config)?;
    emit_report(&rows, ReportFormat::Csv, std::io::stdout().lock())?;
    Ok(())
}

fn main() {
    run().unwrap();
}
