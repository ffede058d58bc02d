//! Textual pruning primitives: inverted files, bitmap matching and Hamming distance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Bitmap, KeywordId, SpatioTextualObject};
use crate::error::{Result, StixError};

/// Per-keyword postings over a group of objects.
///
/// Entries are `u32` object references chosen by the builder; the indices in
/// this crate use dataset positions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvertedFile {
    postings: BTreeMap<KeywordId, Vec<u32>>,
    members: Vec<u32>,
}

impl InvertedFile {
    pub fn build<'a>(entries: impl IntoIterator<Item = (u32, &'a [KeywordId])>) -> Self {
        let mut postings: BTreeMap<KeywordId, Vec<u32>> = BTreeMap::new();
        let mut members = Vec::new();
        for (obj, keywords) in entries {
            members.push(obj);
            for &k in keywords {
                postings.entry(k).or_default().push(obj);
            }
        }
        members.sort_unstable();
        members.dedup();
        for list in postings.values_mut() {
            list.sort_unstable();
            list.dedup();
        }
        Self { postings, members }
    }

    pub fn postings(&self, keyword: KeywordId) -> &[u32] {
        self.postings.get(&keyword).map_or(&[], Vec::as_slice)
    }

    pub fn members(&self) -> &[u32] {
        &self.members
    }

    pub fn keyword_count(&self) -> usize {
        self.postings.len()
    }

    /// Objects containing every keyword in `keywords`: the intersection of their
    /// postings lists, started from the shortest list. An empty keyword set
    /// selects every member.
    pub fn candidates(&self, keywords: &[KeywordId]) -> Vec<u32> {
        if keywords.is_empty() {
            return self.members.clone();
        }
        let mut lists = Vec::with_capacity(keywords.len());
        for k in keywords {
            match self.postings.get(k) {
                Some(list) => lists.push(list.as_slice()),
                None => return Vec::new(),
            }
        }
        lists.sort_by_key(|l| l.len());
        let mut acc = lists[0].to_vec();
        for list in &lists[1..] {
            if acc.is_empty() {
                break;
            }
            intersect_in_place(&mut acc, list);
        }
        acc
    }

    pub(crate) fn heap_bytes(&self) -> usize {
        self.members.len() * 4
            + self
                .postings
                .values()
                .map(|l| l.len() * 4 + std::mem::size_of::<Vec<u32>>() + 4)
                .sum::<usize>()
    }
}

pub fn build_inverted_file(objects: &[SpatioTextualObject]) -> InvertedFile {
    InvertedFile::build(
        objects
            .iter()
            .enumerate()
            .map(|(i, o)| (i as u32, o.keywords())),
    )
}

pub fn if_candidates(file: &InvertedFile, keywords: &[KeywordId]) -> Vec<u32> {
    file.candidates(keywords)
}

/// Keep the elements of `acc` that occur in `other`. Both sorted. Each lookup
/// gallops forward from the previous match, so a short `acc` against a long
/// list costs O(|acc| log(|other| / |acc|)).
fn intersect_in_place(acc: &mut Vec<u32>, other: &[u32]) {
    let mut lo = 0usize;
    acc.retain(|&v| {
        let mut hi = lo;
        let mut step = 1usize;
        while hi < other.len() && other[hi] < v {
            lo = hi + 1;
            hi += step;
            step *= 2;
        }
        let end = (hi + 1).min(other.len());
        let idx = lo + other[lo..end].partition_point(|&x| x < v);
        if idx < other.len() && other[idx] == v {
            lo = idx + 1;
            true
        } else {
            lo = idx;
            false
        }
    });
}

/// True iff every bit set in `query_bm` is also set in `node_bm`.
pub fn bitmap_match(node_bm: &Bitmap, query_bm: &Bitmap) -> Result<bool> {
    if node_bm.len() != query_bm.len() {
        return Err(StixError::BitmapLength {
            left: node_bm.len(),
            right: query_bm.len(),
        });
    }
    Ok(node_bm.covers(query_bm))
}

/// Number of differing bits.
pub fn hamming(a: &Bitmap, b: &Bitmap) -> Result<u32> {
    if a.len() != b.len() {
        return Err(StixError::BitmapLength {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.words()
        .iter()
        .zip(b.words())
        .map(|(x, y)| (x ^ y).count_ones())
        .sum())
}

/// Work counters collected during one or more queries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryStats {
    /// Index nodes (tree nodes or model nodes) whose contents were examined.
    pub nodes_visited: u64,
    /// Leaf blocks whose objects were examined (learned variants and R*-tree leaves).
    pub blocks_visited: u64,
    /// Individual objects tested against the query predicates.
    pub objects_examined: u64,
    /// Window queries issued; greater than one for expanding-window kNN.
    pub windows_issued: u64,
}

impl QueryStats {
    pub fn merge(&mut self, other: &QueryStats) {
        self.nodes_visited += other.nodes_visited;
        self.blocks_visited += other.blocks_visited;
        self.objects_examined += other.objects_examined;
        self.windows_issued += other.windows_issued;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PIZZA: KeywordId = 0;
    const BAR: KeywordId = 1;

    fn bm(bits: &str) -> Bitmap {
        let ones: Vec<KeywordId> = bits
            .chars()
            .enumerate()
            .filter(|(_, c)| *c == '1')
            .map(|(i, _)| i as KeywordId)
            .collect();
        Bitmap::from_keywords(bits.len(), &ones).unwrap()
    }

    #[test]
    fn build_examples() {
        let f = InvertedFile::build([(1, &[PIZZA][..]), (2, &[PIZZA, BAR][..]), (3, &[][..])]);
        assert_eq!(f.postings(PIZZA), &[1, 2]);
        assert_eq!(f.postings(BAR), &[2]);
        assert_eq!(f.keyword_count(), 2);
        assert_eq!(f.members(), &[1, 2, 3]);

        let empty = InvertedFile::build(std::iter::empty());
        assert_eq!(empty.keyword_count(), 0);
        assert!(empty.candidates(&[]).is_empty());
    }

    #[test]
    fn candidate_examples() {
        let f = InvertedFile::build([
            (1, &[PIZZA][..]),
            (2, &[PIZZA, BAR][..]),
            (5, &[PIZZA][..]),
            (7, &[BAR][..]),
        ]);
        assert_eq!(f.candidates(&[PIZZA, BAR]), vec![2]);
        assert_eq!(f.candidates(&[99]), Vec::<u32>::new());
        assert_eq!(f.candidates(&[PIZZA]), vec![1, 2, 5]);
        assert_eq!(f.candidates(&[]), vec![1, 2, 5, 7]);
    }

    #[test]
    fn bitmap_match_examples() {
        assert!(bitmap_match(&bm("0110"), &bm("0100")).unwrap());
        assert!(!bitmap_match(&bm("0110"), &bm("1100")).unwrap());
        assert!(bitmap_match(&bm("0000"), &bm("0000")).unwrap());
        assert!(bitmap_match(&bm("1011"), &bm("0000")).unwrap());
        assert!(matches!(
            bitmap_match(&bm("011"), &bm("0110")),
            Err(StixError::BitmapLength { left: 3, right: 4 })
        ));
    }

    #[test]
    fn hamming_examples() {
        let a = bm("101010");
        assert_eq!(hamming(&a, &a).unwrap(), 0);
        assert_eq!(hamming(&a, &bm("011010")).unwrap(), 2);
        assert_eq!(hamming(&a, &a.complement()).unwrap(), 6);
        assert!(hamming(&a, &bm("1")).is_err());
    }

    #[test]
    fn gallop_intersection_long_lists() {
        let long: Vec<u32> = (0..10_000).map(|i| i * 3).collect();
        let mut short = vec![0, 2, 3, 299, 300, 29_997, 40_000];
        intersect_in_place(&mut short, &long);
        assert_eq!(short, vec![0, 3, 300, 29_997]);
    }

    fn arb_block() -> impl Strategy<Value = Vec<Vec<KeywordId>>> {
        prop::collection::vec(prop::collection::vec(0u32..8, 0..5), 0..40)
    }

    fn arb_bitmap(len: usize) -> impl Strategy<Value = Bitmap> {
        prop::collection::vec(any::<bool>(), len).prop_map(move |bits| {
            let ones: Vec<KeywordId> = bits
                .iter()
                .enumerate()
                .filter(|(_, b)| **b)
                .map(|(i, _)| i as KeywordId)
                .collect();
            Bitmap::from_keywords(len, &ones).unwrap()
        })
    }

    proptest! {
        #[test]
        fn candidates_match_brute_force(block in arb_block(), query in prop::collection::vec(0u32..9, 0..4)) {
            let objs: Vec<SpatioTextualObject> = block
                .iter()
                .enumerate()
                .map(|(i, ks)| SpatioTextualObject::new(i as u64, crate::Point::new(0.0, 0.0), ks.clone()))
                .collect();
            let f = build_inverted_file(&objs);
            let expected: Vec<u32> = objs
                .iter()
                .enumerate()
                .filter(|(_, o)| o.contains_all(&query))
                .map(|(i, _)| i as u32)
                .collect();
            prop_assert_eq!(f.candidates(&query), expected.clone());

            let mut reversed = query.clone();
            reversed.reverse();
            prop_assert_eq!(f.candidates(&reversed), expected);
        }

        #[test]
        fn bitmap_match_is_subset(obj in prop::collection::btree_set(0u32..70, 0..10),
                                  q in prop::collection::btree_set(0u32..70, 0..4)) {
            let obj: Vec<u32> = obj.into_iter().collect();
            let q: Vec<u32> = q.into_iter().collect();
            let o = SpatioTextualObject::new(0, crate::Point::new(0.0, 0.0), obj.clone());
            let matched = bitmap_match(
                &Bitmap::from_keywords(70, &obj).unwrap(),
                &Bitmap::from_keywords(70, &q).unwrap(),
            ).unwrap();
            prop_assert_eq!(matched, o.contains_all(&q));
        }

        #[test]
        fn hamming_is_metric(a in arb_bitmap(90), b in arb_bitmap(90), c in arb_bitmap(90)) {
            let ab = hamming(&a, &b).unwrap();
            prop_assert_eq!(ab, hamming(&b, &a).unwrap());
            prop_assert_eq!(hamming(&a, &a).unwrap(), 0);
            prop_assert_eq!(ab == 0, a == b);
            prop_assert!(hamming(&a, &c).unwrap() <= ab + hamming(&b, &c).unwrap());
        }
    }
}
