//! Build the four learned variants and measure what they miss.

use std::sync::Arc;

use stix::bench::{generate, generate_workload, SyntheticSpec, WorkloadSpec};
use stix::oracle::{oracle_bwq, recall};
use stix::{IndexHandle, IndexParams, IndexVariant, QueryOptions, QueryStats};

pub fn run() -> stix::Result<()> {
    let data = Arc::new(generate(&SyntheticSpec {
        count: 20_000,
        vocabulary: 200,
        ..SyntheticSpec::default()
    })?);
    let workload = generate_workload(
        &data,
        &WorkloadSpec {
            queries: 200,
            ..WorkloadSpec::default()
        },
    )?;
    let params = IndexParams {
        epochs: 150,
        ..IndexParams::default()
    };
    let exhaustive = QueryOptions {
        exhaustive_inner: true,
        ..QueryOptions::default()
    };

    for variant in IndexVariant::ALL.into_iter().filter(|v| v.is_learned()) {
        let index = IndexHandle::build(Arc::clone(&data), variant, &params)?;
        let mut predicted = 0.0;
        let mut complete = 0.0;
        let mut stats = QueryStats::default();
        for q in &workload {
            let q = q.bwq(0.1);
            let exact = oracle_bwq(&data, &q);
            predicted += recall(&index.execute_bwq_with(&q, &index.options(), &mut stats), &exact);
            complete += recall(&index.execute_bwq_with(&q, &exhaustive, &mut QueryStats::default()), &exact);
        }
        let n = workload.len() as f64;
        println!(
            "{variant:>13}: build {:.2}s, recall {:.4} (all inner children: {:.4}), {:.1} blocks per query",
            index.meta().build_seconds,
            predicted / n,
            complete / n,
            stats.blocks_visited as f64 / (2.0 * n)
        );
        assert_eq!(complete, n);
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
