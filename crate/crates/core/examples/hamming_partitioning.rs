//! Keyword-aware partitioning picks the split axis whose halves differ most in
//! their keyword sets; the spatial strategy simply alternates axes.

use stix::rsmi::{choose_split_axis_hamming, partition, PartitionStrategy};
use stix::text::hamming;
use stix::{Dataset, Point};

pub fn run() -> stix::Result<()> {
    // Bottom row of quadrants talks about food, top row about drinks.
    let mut rows = Vec::new();
    let quadrants: [(f64, f64, &[&str]); 4] = [
        (0.0, 0.0, &["pizza", "pasta", "salad", "north"]),
        (0.5, 0.0, &["pizza", "pasta", "salad", "south"]),
        (0.0, 0.5, &["beer", "wine", "north"]),
        (0.5, 0.5, &["beer", "wine", "south"]),
    ];
    for (q, (x, y, words)) in quadrants.iter().enumerate() {
        for j in 0..4 {
            let p = Point::new(x + 0.1 + 0.2 * (j % 2) as f64, y + 0.1 + 0.2 * (j / 2) as f64);
            rows.push(((q * 4 + j) as u64, p, words.to_vec()));
        }
    }
    let data = Dataset::from_keyword_strings(rows)?;
    let all: Vec<u32> = (0..data.len() as u32).collect();

    let left: Vec<u32> = all.iter().copied().filter(|&p| data.location(p).x < 0.5).collect();
    let right: Vec<u32> = all.iter().copied().filter(|&p| data.location(p).x >= 0.5).collect();
    let bottom: Vec<u32> = all.iter().copied().filter(|&p| data.location(p).y < 0.5).collect();
    let top: Vec<u32> = all.iter().copied().filter(|&p| data.location(p).y >= 0.5).collect();
    let dx = hamming(&data.union_bitmap(left), &data.union_bitmap(right))?;
    let dy = hamming(&data.union_bitmap(bottom), &data.union_bitmap(top))?;
    let axis = choose_split_axis_hamming(&data, &all)?;
    println!("hamming distance between halves: x {dx}, y {dy}; chosen axis {axis:?}");

    for strategy in [PartitionStrategy::Spatial, PartitionStrategy::Hamming] {
        let root = partition(&data, &all, 4, strategy)?;
        println!("{strategy:?}: first split on {:?}, {} leaves", root.split_axis(), root.leaves().len());
    }
    Ok(())
}

fn main() {
    run().unwrap();
}
