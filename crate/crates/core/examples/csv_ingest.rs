//! Read objects from `id,x,y,kw1;kw2` text; coordinates are normalised on the way in.

use std::path::Path;
use std::sync::Arc;

use stix::bench::ingest::ingest_reader;
use stix::{BwqSpec, IndexHandle, IndexParams, IndexVariant, Mbr};

const CSV: &str = "\
101,-73.99,40.73,pizza;bar
102,-73.98,40.75,coffee
103,-74.01,40.70,pizza
104,-73.95,40.78,bar;jazz
105,-73.97,40.76,
";

pub fn run() -> stix::Result<()> {
    let data = ingest_reader(CSV.as_bytes(), Path::new("inline.csv"))?;
    let norm = *data.normalization().expect("ingest normalises");
    for o in data.objects() {
        let original = norm.invert(&o.location);
        println!("{} at ({:.3}, {:.3}) <- ({}, {})", o.id, o.location.x, o.location.y, original.x, original.y);
    }

    let pizza = data.keyword_ids(&["pizza"]).expect("pizza occurs");
    let data = Arc::new(data);
    let index = IndexHandle::build(Arc::clone(&data), IndexVariant::Ir2, &IndexParams::default())?;
    let everywhere = BwqSpec::from_window(Mbr::unit(), pizza)?;
    println!("pizza anywhere: {:?}", index.execute_bwq(&everywhere).ids());

    match stix::bench::ingest::ingest_reader("1,0,0,a\n1,2,2,b\n".as_bytes(), Path::new("dup.csv")) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!("duplicate ids are rejected"),
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
