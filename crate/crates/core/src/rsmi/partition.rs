//! Recursive equi-count partitioning in rank space.

use serde::{Deserialize, Serialize};

use crate::domain::Dataset;
use crate::error::{Result, StixError};
use crate::geometry::{rank_space_map, z_order_unchecked, Axis, Mbr, RankSpacePoint};
use crate::text::hamming;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartitionStrategy {
    /// Alternate x and y, starting with x at the root.
    Spatial,
    /// At every step split on the axis whose halves differ in more keywords.
    Hamming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankMbr {
    pub lo: RankSpacePoint,
    pub hi: RankSpacePoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionNode {
    pub mbr: Mbr,
    pub rank_mbr: RankMbr,
    pub kind: PartitionKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PartitionKind {
    /// Children in z-order of their rank-space centroids.
    Inner { axis: Axis, children: Vec<PartitionNode> },
    /// Dataset positions.
    Leaf(Vec<u32>),
}

impl PartitionNode {
    pub fn len(&self) -> usize {
        match &self.kind {
            PartitionKind::Leaf(v) => v.len(),
            PartitionKind::Inner { children, .. } => children.iter().map(PartitionNode::len).sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaves in order.
    pub fn leaves(&self) -> Vec<&[u32]> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a [u32]>) {
        match &self.kind {
            PartitionKind::Leaf(v) => out.push(v),
            PartitionKind::Inner { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    pub fn split_axis(&self) -> Option<Axis> {
        match self.kind {
            PartitionKind::Inner { axis, .. } => Some(axis),
            PartitionKind::Leaf(_) => None,
        }
    }
}

/// Per-position ranks of a set of dataset positions.
pub(crate) struct RankTable {
    /// Indexed by dataset position; only entries for indexed positions are meaningful.
    pub ranks: Vec<RankSpacePoint>,
}

impl RankTable {
    pub fn new(data: &Dataset, positions: &[u32]) -> Self {
        let pts: Vec<_> = positions
            .iter()
            .map(|&p| (data.object(p).id, *data.location(p)))
            .collect();
        let local = rank_space_map(&pts);
        let mut ranks = vec![RankSpacePoint::default(); data.len()];
        for (&p, r) in positions.iter().zip(local) {
            ranks[p as usize] = r;
        }
        Self { ranks }
    }

    pub fn z(&self, pos: u32) -> u64 {
        let r = self.ranks[pos as usize];
        z_order_unchecked(r.xr, r.yr)
    }

    fn rank(&self, pos: u32, axis: Axis) -> u32 {
        self.ranks[pos as usize].rank(axis)
    }
}

/// Partition `positions` of `data` until every leaf holds at most `max_leaf` objects.
pub fn partition(data: &Dataset, positions: &[u32], max_leaf: usize, strategy: PartitionStrategy) -> Result<PartitionNode> {
    let table = RankTable::new(data, positions);
    partition_with(data, &table, positions.to_vec(), max_leaf, strategy)
}

pub(crate) fn partition_with(
    data: &Dataset,
    table: &RankTable,
    positions: Vec<u32>,
    max_leaf: usize,
    strategy: PartitionStrategy,
) -> Result<PartitionNode> {
    if max_leaf == 0 {
        return Err(StixError::InvalidParameter("partition size bound S must be at least 1".into()));
    }
    Ok(split_rec(data, table, positions, max_leaf, strategy, Axis::X))
}

fn split_rec(
    data: &Dataset,
    table: &RankTable,
    mut positions: Vec<u32>,
    max_leaf: usize,
    strategy: PartitionStrategy,
    next_axis: Axis,
) -> PartitionNode {
    let mbr = Mbr::of_points(positions.iter().map(|&p| data.location(p)));
    let rank_mbr = rank_bounds(table, &positions);
    if positions.len() <= max_leaf {
        return PartitionNode {
            mbr,
            rank_mbr,
            kind: PartitionKind::Leaf(positions),
        };
    }
    let axis = match strategy {
        PartitionStrategy::Spatial => {
            positions.sort_unstable_by_key(|&p| table.rank(p, next_axis));
            next_axis
        }
        PartitionStrategy::Hamming => hamming_split_sort(data, table, &mut positions),
    };
    let upper = positions.split_off(positions.len().div_ceil(2));
    let lower = positions;
    let mut children = vec![
        split_rec(data, table, lower, max_leaf, strategy, axis.other()),
        split_rec(data, table, upper, max_leaf, strategy, axis.other()),
    ];
    let keys: Vec<u64> = children.iter().map(|c| centroid_z(table, c)).collect();
    if keys[1] < keys[0] {
        children.swap(0, 1);
    }
    PartitionNode {
        mbr,
        rank_mbr,
        kind: PartitionKind::Inner { axis, children },
    }
}

fn rank_bounds(table: &RankTable, positions: &[u32]) -> RankMbr {
    let mut lo = RankSpacePoint { xr: u32::MAX, yr: u32::MAX };
    let mut hi = RankSpacePoint { xr: 0, yr: 0 };
    for &p in positions {
        let r = table.ranks[p as usize];
        lo.xr = lo.xr.min(r.xr);
        lo.yr = lo.yr.min(r.yr);
        hi.xr = hi.xr.max(r.xr);
        hi.yr = hi.yr.max(r.yr);
    }
    RankMbr { lo, hi }
}

fn centroid_z(table: &RankTable, node: &PartitionNode) -> u64 {
    let mut sx = 0u64;
    let mut sy = 0u64;
    let mut n = 0u64;
    for leaf in node.leaves() {
        for &p in leaf {
            let r = table.ranks[p as usize];
            sx += r.xr as u64;
            sy += r.yr as u64;
            n += 1;
        }
    }
    if n == 0 {
        return 0;
    }
    let round = |s: u64| ((s + n / 2) / n) as u32;
    z_order_unchecked(round(sx), round(sy))
}

/// Sorts `positions` along the chosen axis and returns it.
fn hamming_split_sort(data: &Dataset, table: &RankTable, positions: &mut [u32]) -> Axis {
    let half = positions.len().div_ceil(2);
    let distance = |sorted: &[u32]| {
        let a = data.union_bitmap(sorted[..half].iter().copied());
        let b = data.union_bitmap(sorted[half..].iter().copied());
        hamming(&a, &b).expect("bitmaps share the vocabulary length")
    };
    let mut by_y = positions.to_vec();
    by_y.sort_unstable_by_key(|&p| table.rank(p, Axis::Y));
    positions.sort_unstable_by_key(|&p| table.rank(p, Axis::X));
    if distance(positions) >= distance(&by_y) {
        Axis::X
    } else {
        positions.copy_from_slice(&by_y);
        Axis::Y
    }
}

/// The axis whose median split separates the keyword sets more strongly, by
/// Hamming distance between the two halves' bitmaps. Ties go to x.
pub fn choose_split_axis_hamming(data: &Dataset, positions: &[u32]) -> Result<Axis> {
    if positions.len() < 2 {
        return Err(StixError::InvalidParameter(
            "a split needs at least two objects".into(),
        ));
    }
    let table = RankTable::new(data, positions);
    let mut scratch = positions.to_vec();
    Ok(hamming_split_sort(data, &table, &mut scratch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::{KeywordVocabulary, SpatioTextualObject};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let objs = (0..n)
            .map(|i| SpatioTextualObject::new(i as u64, Point::new(rng.gen(), rng.gen()), [rng.gen_range(0..6)]))
            .collect();
        let vocab = KeywordVocabulary::from_words((0..6).map(|i| format!("w{i}")).collect()).unwrap();
        Dataset::new(objs, vocab).unwrap()
    }

    fn all(d: &Dataset) -> Vec<u32> {
        (0..d.len() as u32).collect()
    }

    #[test]
    fn small_input_is_single_leaf() {
        let d = uniform(50, 1);
        let p = partition(&d, &all(&d), 50, PartitionStrategy::Spatial).unwrap();
        assert!(matches!(p.kind, PartitionKind::Leaf(ref v) if v.len() == 50));
        assert!(partition(&d, &all(&d), 0, PartitionStrategy::Spatial).is_err());
    }

    #[test]
    fn equi_count_split() {
        let d = uniform(101, 2);
        let p = partition(&d, &all(&d), 60, PartitionStrategy::Spatial).unwrap();
        let PartitionKind::Inner { axis, children } = &p.kind else {
            panic!("expected a split");
        };
        assert_eq!(*axis, Axis::X);
        let mut sizes: Vec<usize> = children.iter().map(PartitionNode::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![50, 51]);
    }

    #[test]
    fn spatial_strategy_alternates_axes() {
        let d = uniform(400, 3);
        let p = partition(&d, &all(&d), 100, PartitionStrategy::Spatial).unwrap();
        assert_eq!(p.split_axis(), Some(Axis::X));
        let PartitionKind::Inner { children, .. } = &p.kind else { unreachable!() };
        for c in children {
            assert_eq!(c.split_axis(), Some(Axis::Y));
        }
    }

    #[test]
    fn identical_keyword_sets_tie_to_x() {
        let objs = (0..8)
            .map(|i| SpatioTextualObject::new(i, Point::new(i as f64 * 0.1, (7 - i) as f64 * 0.1), [0, 1]))
            .collect();
        let d = Dataset::new(objs, KeywordVocabulary::from_words(vec!["a".into(), "b".into()]).unwrap()).unwrap();
        assert_eq!(choose_split_axis_hamming(&d, &all(&d)).unwrap(), Axis::X);
    }

    #[test]
    fn hamming_prefers_x_when_x_halves_differ_more() {
        // Left half {a,b,c,d}, right half {d}; bottom and top halves both hold {a,b,c,d}.
        let objs = vec![
            SpatioTextualObject::new(0, Point::new(0.1, 0.1), [0, 1, 2]),
            SpatioTextualObject::new(1, Point::new(0.2, 0.9), [0, 1, 2, 3]),
            SpatioTextualObject::new(2, Point::new(0.8, 0.2), [3]),
            SpatioTextualObject::new(3, Point::new(0.9, 0.8), [3]),
        ];
        let words = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let d = Dataset::new(objs, KeywordVocabulary::from_words(words).unwrap()).unwrap();
        let x_halves = hamming(&d.union_bitmap([0, 1]), &d.union_bitmap([2, 3])).unwrap();
        let y_halves = hamming(&d.union_bitmap([0, 2]), &d.union_bitmap([1, 3])).unwrap();
        assert_eq!((x_halves, y_halves), (3, 0));
        assert_eq!(choose_split_axis_hamming(&d, &all(&d)).unwrap(), Axis::X);
    }

    fn quadrant_fixture() -> Dataset {
        // Four points per quadrant; left quadrants share {p}, right ones share {q}.
        let quadrants: [(f64, f64, &[&str]); 4] = [
            (0.0, 0.0, &["a", "b", "c", "p"]),
            (0.5, 0.0, &["a", "b", "c", "q"]),
            (0.0, 0.5, &["d", "e", "p"]),
            (0.5, 0.5, &["d", "e", "q"]),
        ];
        let mut rows = Vec::new();
        for (qi, (x0, y0, words)) in quadrants.iter().enumerate() {
            for j in 0..4 {
                let p = Point::new(x0 + 0.1 + 0.1 * (j % 2) as f64, y0 + 0.1 + 0.1 * (j / 2) as f64);
                rows.push(((qi * 4 + j) as u64, p, words.to_vec()));
            }
        }
        Dataset::from_keyword_strings(rows).unwrap()
    }

    #[test]
    fn hamming_splits_quadrants_along_y() {
        let d = quadrant_fixture();
        assert_eq!(choose_split_axis_hamming(&d, &all(&d)).unwrap(), Axis::Y);
        let p = partition(&d, &all(&d), 8, PartitionStrategy::Hamming).unwrap();
        assert_eq!(p.split_axis(), Some(Axis::Y));
        let s = partition(&d, &all(&d), 8, PartitionStrategy::Spatial).unwrap();
        assert_eq!(s.split_axis(), Some(Axis::X));
    }

    #[test]
    fn needs_two_objects() {
        let d = uniform(1, 4);
        assert!(choose_split_axis_hamming(&d, &all(&d)).is_err());
    }

    #[test]
    fn children_follow_centroid_z_order() {
        let d = uniform(1000, 5);
        let table = RankTable::new(&d, &all(&d));
        let p = partition(&d, &all(&d), 40, PartitionStrategy::Spatial).unwrap();
        let mut stack = vec![&p];
        while let Some(n) = stack.pop() {
            if let PartitionKind::Inner { children, .. } = &n.kind {
                assert!(centroid_z(&table, &children[0]) <= centroid_z(&table, &children[1]));
                stack.extend(children.iter());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn leaves_bounded_and_partition_input(n in 1usize..600, s in 1usize..80, seed in any::<u64>(), hamming in any::<bool>()) {
            let d = uniform(n, seed);
            let strategy = if hamming { PartitionStrategy::Hamming } else { PartitionStrategy::Spatial };
            let p = partition(&d, &all(&d), s, strategy).unwrap();
            let mut seen: Vec<u32> = Vec::new();
            for leaf in p.leaves() {
                prop_assert!(leaf.len() <= s);
                prop_assert!(!leaf.is_empty());
                seen.extend_from_slice(leaf);
            }
            seen.sort_unstable();
            prop_assert_eq!(seen, all(&d));
        }
    }
}
