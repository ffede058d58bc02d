//! Save an index to disk, load it back, and get the same answers.

use std::sync::Arc;

use stix::bench::{generate, generate_workload, snapshot_load, snapshot_save, SyntheticSpec, WorkloadSpec};
use stix::{IndexHandle, IndexParams, IndexVariant};

pub fn run() -> stix::Result<()> {
    let data = Arc::new(generate(&SyntheticSpec {
        count: 10_000,
        ..SyntheticSpec::default()
    })?);
    let params = IndexParams {
        epochs: 50,
        ..IndexParams::default()
    };
    let index = IndexHandle::build(Arc::clone(&data), IndexVariant::RsmiBm, &params)?;

    let path = std::env::temp_dir().join(format!("stix-example-{}.stix", std::process::id()));
    snapshot_save(&index, &path)?;
    let bytes = std::fs::metadata(&path)?.len();
    let restored = snapshot_load(&path)?;
    std::fs::remove_file(&path)?;

    let workload = generate_workload(&data, &WorkloadSpec::default())?;
    for q in &workload {
        let q = q.bwq(0.05);
        assert_eq!(index.execute_bwq(&q), restored.execute_bwq(&q));
    }
    println!("{} bytes on disk, {} queries answered identically", bytes, workload.len());
    Ok(())
}

fn main() {
    run().unwrap();
}
