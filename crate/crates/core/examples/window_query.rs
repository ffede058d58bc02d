//! Boolean window queries on the two exact indices, checked against a linear scan.

use std::sync::Arc;

use stix::oracle::oracle_bwq;
use stix::{BwqSpec, Dataset, IndexHandle, IndexParams, IndexVariant, Point};

pub fn run() -> stix::Result<()> {
    let data = Dataset::from_keyword_strings(vec![
        (1, Point::new(0.10, 0.80), vec!["pizza"]),
        (2, Point::new(0.45, 0.55), vec!["pizza", "bar"]),
        (3, Point::new(0.55, 0.45), vec!["bar"]),
        (4, Point::new(0.90, 0.90), vec!["pizza", "bar"]),
        (5, Point::new(0.20, 0.10), vec!["pizza", "bar", "cafe"]),
    ])?;
    let keywords = data.keyword_ids(&["pizza", "bar"]).expect("both words are in the data");
    let data = Arc::new(data);
    let q = BwqSpec::new(Point::new(0.35, 0.35), Point::new(0.65, 0.65), keywords)?;

    for variant in [IndexVariant::RStarIf, IndexVariant::Ir2] {
        let index = IndexHandle::build(Arc::clone(&data), variant, &IndexParams::default())?;
        let answer = index.execute_bwq(&q);
        println!("{variant}: {:?}", answer.ids());
        assert_eq!(answer, oracle_bwq(&data, &q));
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
