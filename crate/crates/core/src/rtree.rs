//! R*-tree and the two traditional spatio-textual indices built on it.
//!
//! Nodes live in an arena and are addressed by `u32`. Leaf entries carry a
//! dataset position and its location; queries resolve keywords through the
//! [`Dataset`] the tree was built from.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::domain::{covers_words, words_for, Dataset, PreparedKeywords};
use crate::error::{Result, StixError};
use crate::geometry::{Axis, Mbr, Point};
use crate::text::{InvertedFile, QueryStats};

/// Size of the candidate set for the overlap test when choosing a leaf.
const OVERLAP_CANDIDATES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RTreeParams {
    pub min_entries: usize,
    pub max_entries: usize,
}

impl RTreeParams {
    pub fn new(min_entries: usize, max_entries: usize) -> Result<Self> {
        let p = Self {
            min_entries,
            max_entries,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_entries == 0 || self.min_entries * 2 > self.max_entries {
            return Err(StixError::InvalidParameter(format!(
                "R-tree fill bounds need 1 <= m <= M/2, got m={} M={}",
                self.min_entries, self.max_entries
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafEntry {
    pub object: u32,
    pub point: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeEntries {
    Leaf(Vec<LeafEntry>),
    Inner(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RNode {
    pub mbr: Mbr,
    pub entries: NodeEntries,
}

impl RNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.entries, NodeEntries::Leaf(_))
    }

    pub fn len(&self) -> usize {
        match &self.entries {
            NodeEntries::Leaf(v) => v.len(),
            NodeEntries::Inner(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn children(&self) -> &[u32] {
        match &self.entries {
            NodeEntries::Inner(v) => v,
            NodeEntries::Leaf(_) => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RTree {
    params: RTreeParams,
    nodes: Vec<RNode>,
    root: u32,
    height: u32,
    len: usize,
}

impl RTree {
    pub fn new(params: RTreeParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            nodes: vec![RNode {
                mbr: Mbr::empty(),
                entries: NodeEntries::Leaf(Vec::new()),
            }],
            root: 0,
            height: 1,
            len: 0,
        })
    }

    /// One-by-one R* insertion in iteration order.
    pub fn build(entries: impl IntoIterator<Item = (u32, Point)>, params: RTreeParams) -> Result<Self> {
        let mut tree = Self::new(params)?;
        for (object, point) in entries {
            tree.insert(object, point);
        }
        Ok(tree)
    }

    pub fn params(&self) -> RTreeParams {
        self.params
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn node(&self, id: u32) -> &RNode {
        &self.nodes[id as usize]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn insert(&mut self, object: u32, point: Point) {
        if let Some(sibling) = self.insert_into(self.root, LeafEntry { object, point }) {
            let old = self.root;
            let mbr = self.nodes[old as usize].mbr.union(&self.nodes[sibling as usize].mbr);
            self.root = self.push(RNode {
                mbr,
                entries: NodeEntries::Inner(vec![old, sibling]),
            });
            self.height += 1;
        }
        self.len += 1;
    }

    fn push(&mut self, node: RNode) -> u32 {
        self.nodes.push(node);
        (self.nodes.len() - 1) as u32
    }

    /// Returns the id of a new sibling when `id` had to be split.
    fn insert_into(&mut self, id: u32, entry: LeafEntry) -> Option<u32> {
        let idx = id as usize;
        self.nodes[idx].mbr.expand(&entry.point);
        if self.nodes[idx].is_leaf() {
            if let NodeEntries::Leaf(v) = &mut self.nodes[idx].entries {
                v.push(entry);
            }
        } else {
            let child = self.choose_subtree(idx, &entry.point);
            if let Some(sibling) = self.insert_into(child, entry) {
                if let NodeEntries::Inner(v) = &mut self.nodes[idx].entries {
                    v.push(sibling);
                }
            }
        }
        if self.nodes[idx].len() > self.params.max_entries {
            Some(self.split(idx))
        } else {
            None
        }
    }

    fn choose_subtree(&self, idx: usize, p: &Point) -> u32 {
        let children = self.nodes[idx].children();
        let pm = Mbr::from_point(*p);
        let mbr = |c: u32| &self.nodes[c as usize].mbr;
        let enlargement = |c: u32| mbr(c).union(&pm).area() - mbr(c).area();

        if !self.nodes[children[0] as usize].is_leaf() {
            return *children
                .iter()
                .min_by(|&&a, &&b| {
                    enlargement(a)
                        .total_cmp(&enlargement(b))
                        .then(mbr(a).area().total_cmp(&mbr(b).area()))
                })
                .expect("inner node has children");
        }

        let mut candidates: Vec<u32> = children.to_vec();
        if candidates.len() > OVERLAP_CANDIDATES {
            candidates.sort_by(|&a, &b| enlargement(a).total_cmp(&enlargement(b)));
            candidates.truncate(OVERLAP_CANDIDATES);
        }
        let overlap_enlargement = |c: u32| {
            let before = mbr(c);
            let after = before.union(&pm);
            children
                .iter()
                .filter(|&&o| o != c)
                .map(|&o| after.overlap_area(mbr(o)) - before.overlap_area(mbr(o)))
                .sum::<f64>()
        };
        *candidates
            .iter()
            .min_by(|&&a, &&b| {
                overlap_enlargement(a)
                    .total_cmp(&overlap_enlargement(b))
                    .then(enlargement(a).total_cmp(&enlargement(b)))
                    .then(mbr(a).area().total_cmp(&mbr(b).area()))
            })
            .expect("candidate set is non-empty")
    }

    fn split(&mut self, idx: usize) -> u32 {
        let m = self.params.min_entries;
        let entries = std::mem::replace(&mut self.nodes[idx].entries, NodeEntries::Inner(Vec::new()));
        let (keep, moved) = match entries {
            NodeEntries::Leaf(v) => {
                let mbrs: Vec<Mbr> = v.iter().map(|e| Mbr::from_point(e.point)).collect();
                let (a, b) = rstar_split(&mbrs, m);
                let pick = |ix: &[usize]| ix.iter().map(|&i| v[i]).collect::<Vec<_>>();
                (NodeEntries::Leaf(pick(&a)), NodeEntries::Leaf(pick(&b)))
            }
            NodeEntries::Inner(v) => {
                let mbrs: Vec<Mbr> = v.iter().map(|&c| self.nodes[c as usize].mbr).collect();
                let (a, b) = rstar_split(&mbrs, m);
                let pick = |ix: &[usize]| ix.iter().map(|&i| v[i]).collect::<Vec<_>>();
                (NodeEntries::Inner(pick(&a)), NodeEntries::Inner(pick(&b)))
            }
        };
        let keep_mbr = self.entries_mbr(&keep);
        let moved_mbr = self.entries_mbr(&moved);
        self.nodes[idx] = RNode {
            mbr: keep_mbr,
            entries: keep,
        };
        self.push(RNode {
            mbr: moved_mbr,
            entries: moved,
        })
    }

    fn entries_mbr(&self, entries: &NodeEntries) -> Mbr {
        match entries {
            NodeEntries::Leaf(v) => Mbr::of_points(v.iter().map(|e| &e.point)),
            NodeEntries::Inner(v) => v
                .iter()
                .fold(Mbr::empty(), |acc, &c| acc.union(&self.nodes[c as usize].mbr)),
        }
    }

    /// Full scan of the structural invariants: fill bounds on non-root nodes,
    /// tight MBRs, all leaves at one depth, and every inserted entry present once.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut leaf_depth = None;
        let mut seen = 0usize;
        let mut stack = vec![(self.root, 1u32)];
        while let Some((id, depth)) = stack.pop() {
            let node = self.node(id);
            if id != self.root && (node.len() < self.params.min_entries || node.len() > self.params.max_entries) {
                return Err(format!("node {id} has {} entries", node.len()));
            }
            if id == self.root && !node.is_leaf() && node.len() < 2 {
                return Err("inner root with fewer than two children".into());
            }
            if node.mbr != self.entries_mbr(&node.entries) && !node.is_empty() {
                return Err(format!("node {id} MBR is not tight"));
            }
            match &node.entries {
                NodeEntries::Leaf(v) => {
                    seen += v.len();
                    match leaf_depth {
                        None => leaf_depth = Some(depth),
                        Some(d) if d != depth => return Err(format!("leaves at depths {d} and {depth}")),
                        _ => {}
                    }
                }
                NodeEntries::Inner(v) => stack.extend(v.iter().map(|&c| (c, depth + 1))),
            }
        }
        if leaf_depth != Some(self.height) {
            return Err(format!("height {} but leaves at {:?}", self.height, leaf_depth));
        }
        if seen != self.len {
            return Err(format!("{seen} leaf entries for {} insertions", self.len));
        }
        Ok(())
    }

    pub(crate) fn heap_bytes(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| {
                std::mem::size_of::<RNode>()
                    + match &n.entries {
                        NodeEntries::Leaf(v) => v.len() * std::mem::size_of::<LeafEntry>(),
                        NodeEntries::Inner(v) => v.len() * 4,
                    }
            })
            .sum()
    }
}

/// R* split of `mbrs` (one over capacity) into two groups of at least `m`.
/// The axis minimises the summed margins over all candidate distributions;
/// the distribution on that axis minimises overlap, then total area.
fn rstar_split(mbrs: &[Mbr], m: usize) -> (Vec<usize>, Vec<usize>) {
    let n = mbrs.len();
    let sorted = |axis: Axis, by_hi: bool| -> Vec<usize> {
        let key = |i: usize| {
            let (a, b) = (mbrs[i].lo.coord(axis), mbrs[i].hi.coord(axis));
            if by_hi {
                (b, a)
            } else {
                (a, b)
            }
        };
        let mut ix: Vec<usize> = (0..n).collect();
        ix.sort_by(|&i, &j| {
            let (a, b) = (key(i), key(j));
            a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
        });
        ix
    };
    // prefix[k] = MBR of the first k+1 entries, suffix[k] = MBR of entries k..
    let bounds = |ix: &[usize]| -> (Vec<Mbr>, Vec<Mbr>) {
        let mut prefix = Vec::with_capacity(n);
        let mut acc = Mbr::empty();
        for &i in ix {
            acc = acc.union(&mbrs[i]);
            prefix.push(acc);
        }
        let mut suffix = vec![Mbr::empty(); n];
        let mut acc = Mbr::empty();
        for k in (0..n).rev() {
            acc = acc.union(&mbrs[ix[k]]);
            suffix[k] = acc;
        }
        (prefix, suffix)
    };

    let mut best_axis = Axis::X;
    let mut best_margin = f64::INFINITY;
    let mut orders = Vec::with_capacity(4);
    for axis in [Axis::X, Axis::Y] {
        let mut margin = 0.0;
        for by_hi in [false, true] {
            let ix = sorted(axis, by_hi);
            let (prefix, suffix) = bounds(&ix);
            for k in m..=n - m {
                margin += prefix[k - 1].margin() + suffix[k].margin();
            }
            orders.push((axis, ix, prefix, suffix));
        }
        if margin < best_margin {
            best_margin = margin;
            best_axis = axis;
        }
    }

    let mut best: Option<(f64, f64, usize, usize)> = None;
    for (o, (axis, _, prefix, suffix)) in orders.iter().enumerate() {
        if *axis != best_axis {
            continue;
        }
        for k in m..=n - m {
            let overlap = prefix[k - 1].overlap_area(&suffix[k]);
            let area = prefix[k - 1].area() + suffix[k].area();
            let better = match best {
                None => true,
                Some((bo, ba, _, _)) => overlap < bo || (overlap == bo && area < ba),
            };
            if better {
                best = Some((overlap, area, o, k));
            }
        }
    }
    let (_, _, o, k) = best.expect("at least one distribution since n >= 2m");
    let ix = &orders[o].1;
    (ix[..k].to_vec(), ix[k..].to_vec())
}

fn tree_over(data: &Dataset, positions: &[u32], params: RTreeParams) -> Result<RTree> {
    RTree::build(positions.iter().map(|&p| (p, *data.location(p))), params)
}

/// R*-tree whose leaves each carry an inverted file over their objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RStarTreeIf {
    tree: RTree,
    /// Indexed by node id; empty for inner nodes.
    files: Vec<InvertedFile>,
}

impl RStarTreeIf {
    pub fn build(data: &Dataset, positions: &[u32], params: RTreeParams) -> Result<Self> {
        Ok(Self::attach(tree_over(data, positions, params)?, data))
    }

    pub fn attach(tree: RTree, data: &Dataset) -> Self {
        let files = tree
            .nodes
            .iter()
            .map(|n| match &n.entries {
                NodeEntries::Leaf(v) => InvertedFile::build(v.iter().map(|e| (e.object, data.object(e.object).keywords()))),
                NodeEntries::Inner(_) => InvertedFile::default(),
            })
            .collect();
        Self { tree, files }
    }

    pub fn tree(&self) -> &RTree {
        &self.tree
    }

    pub fn leaf_file(&self, node: u32) -> &InvertedFile {
        &self.files[node as usize]
    }

    /// Spatial descent; at each reached leaf the inverted file yields keyword
    /// candidates which are then checked against the window.
    pub fn bwq(&self, data: &Dataset, window: &Mbr, keywords: &PreparedKeywords, out: &mut Vec<u32>, stats: &mut QueryStats) {
        if !keywords.satisfiable || self.tree.is_empty() {
            return;
        }
        let mut stack = vec![self.tree.root];
        while let Some(id) = stack.pop() {
            let node = self.tree.node(id);
            if !node.mbr.intersects(window) {
                continue;
            }
            stats.nodes_visited += 1;
            match &node.entries {
                NodeEntries::Inner(children) => stack.extend(children.iter().rev()),
                NodeEntries::Leaf(_) => {
                    stats.blocks_visited += 1;
                    for pos in self.files[id as usize].candidates(&keywords.ids) {
                        stats.objects_examined += 1;
                        if window.contains_point(data.location(pos)) {
                            out.push(pos);
                        }
                    }
                }
            }
        }
    }

    pub(crate) fn heap_bytes(&self) -> usize {
        self.tree.heap_bytes() + self.files.iter().map(InvertedFile::heap_bytes).sum::<usize>()
    }
}

/// R*-tree whose every node carries the OR of its subtree's keyword bitmaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ir2Tree {
    tree: RTree,
    words: usize,
    /// `words` u64s per node, indexed by node id.
    bitmaps: Vec<u64>,
}

#[derive(Debug, PartialEq)]
struct HeapItem {
    dist: f64,
    /// 0 for a node, 1 for an object: nodes come first at equal distance.
    kind: u8,
    id: u32,
    object_id: u64,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap.
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.kind.cmp(&self.kind))
            .then(other.object_id.cmp(&self.object_id))
            .then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ir2Tree {
    pub fn build(data: &Dataset, positions: &[u32], params: RTreeParams) -> Result<Self> {
        Ok(Self::attach(tree_over(data, positions, params)?, data))
    }

    /// Bottom-up OR of object bitmaps into every node.
    pub fn attach(tree: RTree, data: &Dataset) -> Self {
        let words = words_for(data.bitmap_len());
        let mut bitmaps = vec![0u64; words * tree.nodes.len()];
        if words > 0 {
            fill_bitmaps(&tree, data, tree.root, words, &mut bitmaps);
        }
        Self { tree, words, bitmaps }
    }

    pub fn tree(&self) -> &RTree {
        &self.tree
    }

    pub fn node_bitmap(&self, node: u32) -> &[u64] {
        let start = node as usize * self.words;
        &self.bitmaps[start..start + self.words]
    }

    #[inline]
    fn gate(&self, node: u32, keywords: &PreparedKeywords, use_bitmaps: bool) -> bool {
        !use_bitmaps || self.words == 0 || covers_words(self.node_bitmap(node), keywords.bitmap.words())
    }

    /// Window search; a subtree is entered only if its MBR intersects the
    /// window and (with `use_bitmaps`) its bitmap covers the query bitmap.
    pub fn bwq(
        &self,
        data: &Dataset,
        window: &Mbr,
        keywords: &PreparedKeywords,
        use_bitmaps: bool,
        out: &mut Vec<u32>,
        stats: &mut QueryStats,
    ) {
        if !keywords.satisfiable || self.tree.is_empty() {
            return;
        }
        let mut stack = vec![self.tree.root];
        while let Some(id) = stack.pop() {
            let node = self.tree.node(id);
            if !node.mbr.intersects(window) || !self.gate(id, keywords, use_bitmaps) {
                continue;
            }
            stats.nodes_visited += 1;
            match &node.entries {
                NodeEntries::Inner(children) => stack.extend(children.iter().rev()),
                NodeEntries::Leaf(entries) => {
                    stats.blocks_visited += 1;
                    for e in entries {
                        stats.objects_examined += 1;
                        if window.contains_point(&e.point) && data.matches(e.object, keywords) {
                            out.push(e.object);
                        }
                    }
                }
            }
        }
    }

    /// Best-first search by minimum distance. Objects are emitted in
    /// `(distance, object id)` order, so the first `k` are the exact answer.
    pub fn bkq(
        &self,
        data: &Dataset,
        point: &Point,
        keywords: &PreparedKeywords,
        k: usize,
        use_bitmaps: bool,
        stats: &mut QueryStats,
    ) -> Vec<(u32, f64)> {
        let mut out = Vec::with_capacity(k);
        if !keywords.satisfiable || self.tree.is_empty() || k == 0 {
            return out;
        }
        let mut heap = BinaryHeap::new();
        let root = self.tree.root;
        heap.push(HeapItem {
            dist: self.tree.node(root).mbr.min_dist(point),
            kind: 0,
            id: root,
            object_id: 0,
        });
        while let Some(item) = heap.pop() {
            if item.kind == 1 {
                out.push((item.id, item.dist));
                if out.len() == k {
                    break;
                }
                continue;
            }
            if !self.gate(item.id, keywords, use_bitmaps) {
                continue;
            }
            stats.nodes_visited += 1;
            match &self.tree.node(item.id).entries {
                NodeEntries::Inner(children) => {
                    for &c in children {
                        heap.push(HeapItem {
                            dist: self.tree.node(c).mbr.min_dist(point),
                            kind: 0,
                            id: c,
                            object_id: 0,
                        });
                    }
                }
                NodeEntries::Leaf(entries) => {
                    stats.blocks_visited += 1;
                    for e in entries {
                        stats.objects_examined += 1;
                        if data.matches(e.object, keywords) {
                            heap.push(HeapItem {
                                dist: e.point.distance(point),
                                kind: 1,
                                id: e.object,
                                object_id: data.object(e.object).id,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub(crate) fn heap_bytes(&self) -> usize {
        self.tree.heap_bytes() + self.bitmaps.len() * 8
    }
}

fn fill_bitmaps(tree: &RTree, data: &Dataset, id: u32, words: usize, bitmaps: &mut [u64]) {
    let start = id as usize * words;
    match &tree.node(id).entries {
        NodeEntries::Leaf(entries) => {
            for e in entries {
                let sig = data.signature(e.object);
                for (w, s) in bitmaps[start..start + words].iter_mut().zip(sig) {
                    *w |= s;
                }
            }
        }
        NodeEntries::Inner(children) => {
            for &c in children {
                fill_bitmaps(tree, data, c, words, bitmaps);
                let cs = c as usize * words;
                for i in 0..words {
                    bitmaps[start + i] |= bitmaps[cs + i];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SpatioTextualObject;
    use crate::KeywordVocabulary;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(m: usize, max: usize) -> RTreeParams {
        RTreeParams::new(m, max).unwrap()
    }

    fn random_dataset(n: usize, vocab: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let objects = (0..n)
            .map(|i| {
                let kws: Vec<u32> = (0..rng.gen_range(0..4)).map(|_| rng.gen_range(0..vocab as u32)).collect();
                SpatioTextualObject::new(i as u64 * 3 + 1, Point::new(rng.gen(), rng.gen()), kws)
            })
            .collect();
        let words = (0..vocab).map(|i| format!("k{i}")).collect();
        Dataset::new(objects, KeywordVocabulary::from_words(words).unwrap()).unwrap()
    }

    fn all(data: &Dataset) -> Vec<u32> {
        (0..data.len() as u32).collect()
    }

    fn scan_bwq(data: &Dataset, window: &Mbr, kw: &PreparedKeywords) -> Vec<u32> {
        (0..data.len() as u32)
            .filter(|&p| window.contains_point(data.location(p)) && data.matches(p, kw))
            .collect()
    }

    fn sorted(mut v: Vec<u32>) -> Vec<u32> {
        v.sort_unstable();
        v
    }

    #[test]
    fn rejects_bad_fill_bounds() {
        assert!(RTreeParams::new(0, 10).is_err());
        assert!(RTreeParams::new(6, 10).is_err());
        assert!(RTreeParams::new(5, 10).is_ok());
    }

    #[test]
    fn single_object_root_is_leaf() {
        let p = Point::new(0.3, 0.4);
        let t = RTree::build([(0, p)], params(2, 4)).unwrap();
        assert!(t.node(t.root()).is_leaf());
        assert_eq!(t.node(t.root()).mbr, Mbr::from_point(p));
        t.check_invariants().unwrap();
    }

    #[test]
    fn overflow_splits_once() {
        let pts: Vec<(u32, Point)> = (0..5).map(|i| (i, Point::new(i as f64, 0.0))).collect();
        let t = RTree::build(pts, params(2, 4)).unwrap();
        assert_eq!(t.height(), 2);
        let root = t.node(t.root());
        assert_eq!(root.len(), 2);
        for &c in root.children() {
            assert!(t.node(c).len() >= 2);
        }
        t.check_invariants().unwrap();
    }

    #[test]
    fn structural_scan_10k() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<(u32, Point)> = (0..10_000).map(|i| (i, Point::new(rng.gen(), rng.gen()))).collect();
        let t = RTree::build(pts, params(50, 100)).unwrap();
        t.check_invariants().unwrap();
        assert_eq!(t.len(), 10_000);
    }

    #[test]
    fn duplicate_points_are_handled() {
        let pts: Vec<(u32, Point)> = (0..500).map(|i| (i, Point::new(0.5, 0.5))).collect();
        let t = RTree::build(pts, params(4, 10)).unwrap();
        t.check_invariants().unwrap();
    }

    fn motivating_example() -> (Dataset, Mbr) {
        let objs = vec![
            (1, Point::new(0.10, 0.80), vec!["pizza"]),
            (2, Point::new(0.45, 0.55), vec!["pizza", "bar"]),
            (3, Point::new(0.55, 0.45), vec!["bar"]),
            (4, Point::new(0.90, 0.90), vec!["pizza", "bar"]),
            (5, Point::new(0.40, 0.60), vec!["sushi"]),
            (6, Point::new(0.20, 0.10), vec!["pizza", "bar", "cafe"]),
            (7, Point::new(0.60, 0.40), vec!["pizza"]),
            (8, Point::new(0.70, 0.20), vec!["cafe"]),
            (9, Point::new(0.52, 0.58), vec!["bar", "cafe"]),
            (10, Point::new(0.95, 0.05), vec!["pizza", "bar"]),
        ];
        let data = Dataset::from_keyword_strings(objs).unwrap();
        (data, Mbr::new(Point::new(0.35, 0.35), Point::new(0.65, 0.65)).unwrap())
    }

    #[test]
    fn motivating_window_query() {
        let (data, w) = motivating_example();
        let kw = data.prepare_keywords(&data.keyword_ids(&["pizza", "bar"]).unwrap());
        let mut stats = QueryStats::default();
        let ir2 = Ir2Tree::build(&data, &all(&data), params(1, 3)).unwrap();
        let mut out = Vec::new();
        ir2.bwq(&data, &w, &kw, true, &mut out, &mut stats);
        assert_eq!(out.iter().map(|&p| data.object(p).id).collect::<Vec<_>>(), vec![2]);

        let rif = RStarTreeIf::build(&data, &all(&data), params(1, 3)).unwrap();
        let mut out = Vec::new();
        rif.bwq(&data, &w, &kw, &mut out, &mut stats);
        assert_eq!(out.iter().map(|&p| data.object(p).id).collect::<Vec<_>>(), vec![2]);

        let nn = ir2.bkq(&data, &Point::new(0.5, 0.5), &kw, 1, true, &mut stats);
        assert_eq!(data.object(nn[0].0).id, 2);
    }

    #[test]
    fn whole_space_returns_everything() {
        let data = random_dataset(300, 10, 1);
        let kw = data.prepare_keywords(&[]);
        let ir2 = Ir2Tree::build(&data, &all(&data), params(3, 8)).unwrap();
        let mut out = Vec::new();
        ir2.bwq(&data, &Mbr::unit(), &kw, true, &mut out, &mut QueryStats::default());
        assert_eq!(sorted(out), all(&data));
    }

    #[test]
    fn unsatisfiable_keywords_return_nothing() {
        let data = random_dataset(100, 5, 2);
        let kw = data.prepare_keywords(&[99]);
        let ir2 = Ir2Tree::build(&data, &all(&data), params(3, 8)).unwrap();
        assert!(ir2.bkq(&data, &Point::new(0.5, 0.5), &kw, 5, true, &mut QueryStats::default()).is_empty());
    }

    #[test]
    fn bkq_with_large_k_returns_all_matches_sorted() {
        let data = random_dataset(200, 4, 3);
        let kw = data.prepare_keywords(&[1]);
        let ir2 = Ir2Tree::build(&data, &all(&data), params(3, 8)).unwrap();
        let q = Point::new(0.2, 0.7);
        let hits = ir2.bkq(&data, &q, &kw, 10_000, true, &mut QueryStats::default());
        let matching = (0..200u32).filter(|&p| data.matches(p, &kw)).count();
        assert_eq!(hits.len(), matching);
        assert!(hits.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn node_bitmaps_are_subtree_unions() {
        let data = random_dataset(2_000, 40, 4);
        let ir2 = Ir2Tree::build(&data, &all(&data), params(5, 12)).unwrap();
        fn objects_under(t: &RTree, id: u32, out: &mut Vec<u32>) {
            match &t.node(id).entries {
                NodeEntries::Leaf(v) => out.extend(v.iter().map(|e| e.object)),
                NodeEntries::Inner(c) => c.iter().for_each(|&c| objects_under(t, c, out)),
            }
        }
        for id in 0..ir2.tree().node_count() as u32 {
            let mut objs = Vec::new();
            objects_under(ir2.tree(), id, &mut objs);
            let expected = data.union_bitmap(objs);
            assert_eq!(ir2.node_bitmap(id), expected.words(), "node {id}");
        }
        assert_eq!(
            ir2.node_bitmap(ir2.tree().root()),
            data.union_bitmap(all(&data)).words()
        );
    }

    #[test]
    fn bitmap_gate_changes_work_not_answers() {
        let data = random_dataset(3_000, 30, 6);
        let ir2 = Ir2Tree::build(&data, &all(&data), params(4, 10)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut pruned_somewhere = false;
        for _ in 0..100 {
            let w = Mbr::square(Point::new(rng.gen(), rng.gen()), rng.gen_range(0.05..0.4));
            let kw = data.prepare_keywords(&[rng.gen_range(0..30), rng.gen_range(0..30)]);
            let (mut a, mut b) = (Vec::new(), Vec::new());
            let (mut sa, mut sb) = (QueryStats::default(), QueryStats::default());
            ir2.bwq(&data, &w, &kw, true, &mut a, &mut sa);
            ir2.bwq(&data, &w, &kw, false, &mut b, &mut sb);
            assert_eq!(sorted(a), sorted(b));
            assert!(sa.nodes_visited <= sb.nodes_visited);
            pruned_somewhere |= sa.nodes_visited < sb.nodes_visited;

            let q = w.center();
            let na = ir2.bkq(&data, &q, &kw, 5, true, &mut sa);
            let nb = ir2.bkq(&data, &q, &kw, 5, false, &mut sb);
            assert_eq!(na, nb);
        }
        assert!(pruned_somewhere);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn trees_match_scan(seed in any::<u64>(), n in 1usize..1500, m in 1usize..6, extra in 0usize..8) {
            let data = random_dataset(n, 12, seed);
            let p = params(m, 2 * m + extra);
            let ir2 = Ir2Tree::build(&data, &all(&data), p).unwrap();
            let rif = RStarTreeIf::build(&data, &all(&data), p).unwrap();
            ir2.tree().check_invariants().unwrap();
            rif.tree().check_invariants().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            for _ in 0..20 {
                let w = Mbr::square(Point::new(rng.gen(), rng.gen()), rng.gen_range(0.0..0.6));
                let kws: Vec<u32> = (0..rng.gen_range(0..3)).map(|_| rng.gen_range(0..12)).collect();
                let kw = data.prepare_keywords(&kws);
                let expected = scan_bwq(&data, &w, &kw);
                let mut stats = QueryStats::default();
                let mut a = Vec::new();
                ir2.bwq(&data, &w, &kw, true, &mut a, &mut stats);
                prop_assert_eq!(sorted(a), expected.clone());
                let mut b = Vec::new();
                rif.bwq(&data, &w, &kw, &mut b, &mut stats);
                prop_assert_eq!(sorted(b), expected);

                let q = Point::new(rng.gen(), rng.gen());
                let k = rng.gen_range(1..15);
                let mut exact: Vec<(u32, f64)> = (0..n as u32)
                    .filter(|&p| data.matches(p, &kw))
                    .map(|p| (p, data.location(p).distance(&q)))
                    .collect();
                exact.sort_by(|a, b| a.1.total_cmp(&b.1).then(data.object(a.0).id.cmp(&data.object(b.0).id)));
                exact.truncate(k);
                prop_assert_eq!(ir2.bkq(&data, &q, &kw, k, true, &mut stats), exact);
            }
        }
    }
}
