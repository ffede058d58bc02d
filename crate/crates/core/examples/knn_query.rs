//! Boolean kNN: exact best-first search on the IR²-tree against expanding
//! windows on a learned index.

use std::sync::Arc;

use stix::bench::{generate, SyntheticSpec};
use stix::oracle::{knn_deviation, oracle_bkq, recall};
use stix::{BkqSpec, IndexHandle, IndexParams, IndexVariant, Point};

pub fn run() -> stix::Result<()> {
    let data = Arc::new(generate(&SyntheticSpec {
        count: 5_000,
        vocabulary: 100,
        ..SyntheticSpec::default()
    })?);
    let q = BkqSpec::new(Point::new(0.3, 0.6), vec![0], 5)?;
    let exact = oracle_bkq(&data, &q);

    let params = IndexParams {
        epochs: 100,
        ..IndexParams::default()
    };
    for variant in [IndexVariant::Ir2, IndexVariant::RsmiBmIr2] {
        let index = IndexHandle::build(Arc::clone(&data), variant, &params)?;
        let answer = index.execute_bkq(&q)?;
        println!(
            "{variant}: ids {:?}, recall {:.2}, deviation {:?}%",
            answer.ids(),
            recall(&answer, &exact),
            knn_deviation(&answer, &exact)
        );
    }

    let rstar = IndexHandle::build(Arc::clone(&data), IndexVariant::RStarIf, &params)?;
    assert!(rstar.execute_bkq(&q).is_err());
    Ok(())
}

fn main() {
    run().unwrap();
}
