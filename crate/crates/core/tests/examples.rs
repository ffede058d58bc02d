//! Every example must keep running.

macro_rules! example {
    ($name:ident, $path:literal) => {
        #[allow(dead_code)]
        #[path = $path]
        mod $name;
    };
}

example!(window_query, "../examples/window_query.rs");
example!(knn_query, "../examples/knn_query.rs");
example!(learned_index, "../examples/learned_index.rs");
example!(hamming_partitioning, "../examples/hamming_partitioning.rs");
example!(snapshot, "../examples/snapshot.rs");
example!(benchmark, "../examples/benchmark.rs");
example!(csv_ingest, "../examples/csv_ingest.rs");

#[test]
fn window_query_runs() {
    window_query::run().unwrap();
}

#[test]
fn knn_query_runs() {
    knn_query::run().unwrap();
}

#[test]
fn learned_index_runs() {
    learned_index::run().unwrap();
}

#[test]
fn hamming_partitioning_runs() {
    hamming_partitioning::run().unwrap();
}

#[test]
fn snapshot_runs() {
    snapshot::run().unwrap();
}

#[test]
fn benchmark_runs() {
    benchmark::run().unwrap();
}

#[test]
fn csv_ingest_runs() {
    csv_ingest::run().unwrap();
}
