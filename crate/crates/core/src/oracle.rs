//! Brute-force ground truth and answer-quality metrics.

use std::collections::HashSet;

use crate::domain::{BkqSpec, BwqSpec, Dataset, ResultSet};

/// Linear scan for a Boolean window query.
pub fn oracle_bwq(data: &Dataset, q: &BwqSpec) -> ResultSet {
    let kw = data.prepare_keywords(&q.keywords);
    ResultSet::from_ids(
        (0..data.len() as u32)
            .filter(|&p| q.window.contains_point(data.location(p)) && data.matches(p, &kw))
            .map(|p| data.object(p).id)
            .collect(),
    )
}

/// Keyword filter, then the `k` nearest by Euclidean distance (ties by id).
pub fn oracle_bkq(data: &Dataset, q: &BkqSpec) -> ResultSet {
    let kw = data.prepare_keywords(&q.keywords);
    let hits = (0..data.len() as u32)
        .filter(|&p| data.matches(p, &kw))
        .map(|p| (data.object(p).id, data.location(p).distance(&q.point)))
        .collect();
    ResultSet::from_neighbors(hits, q.k)
}

/// `|R ∩ exact| / |exact|`, or 1 when the exact answer is empty.
pub fn recall(result: &ResultSet, exact: &ResultSet) -> f64 {
    if exact.is_empty() {
        return 1.0;
    }
    let got: HashSet<_> = result.ids().iter().collect();
    let hit = exact.ids().iter().filter(|id| got.contains(id)).count();
    hit as f64 / exact.len() as f64
}

/// Percentage by which the farthest returned neighbour is farther than the
/// exact neighbour of the same rank. `None` when either answer is empty or the
/// exact distance is zero while the returned one is not.
pub fn knn_deviation(result: &ResultSet, exact: &ResultSet) -> Option<f64> {
    if result.is_empty() || exact.is_empty() {
        return None;
    }
    if result.ids() == exact.ids() {
        return Some(0.0);
    }
    let d_r = result.kth_distance()?;
    let exact_d = exact.distances()?;
    let d_e = exact_d[(result.len() - 1).min(exact_d.len() - 1)];
    if d_e == 0.0 {
        return (d_r == 0.0).then_some(0.0);
    }
    Some((d_r - d_e) / d_e * 100.0)
}

/// Objects in `result` that are outside the window or miss a keyword.
pub fn bwq_violations(data: &Dataset, q: &BwqSpec, result: &ResultSet) -> Vec<u64> {
    let kw = data.prepare_keywords(&q.keywords);
    let pos = position_lookup(data);
    result
        .ids()
        .iter()
        .copied()
        .filter(|id| match pos(*id) {
            Some(p) => !(q.window.contains_point(data.location(p)) && data.matches(p, &kw)),
            None => true,
        })
        .collect()
}

/// Objects in `result` that miss a keyword or report a wrong distance.
pub fn bkq_violations(data: &Dataset, q: &BkqSpec, result: &ResultSet) -> Vec<u64> {
    let kw = data.prepare_keywords(&q.keywords);
    let pos = position_lookup(data);
    let distances = result.distances().unwrap_or(&[]);
    result
        .ids()
        .iter()
        .enumerate()
        .filter(|(i, id)| match pos(**id) {
            Some(p) => {
                !data.matches(p, &kw)
                    || distances.get(*i).copied() != Some(data.location(p).distance(&q.point))
            }
            None => true,
        })
        .map(|(_, id)| *id)
        .collect()
}

fn position_lookup(data: &Dataset) -> impl Fn(u64) -> Option<u32> + '_ {
    let map: std::collections::HashMap<u64, u32> = data
        .objects()
        .iter()
        .enumerate()
        .map(|(i, o)| (o.id, i as u32))
        .collect();
    move |id| map.get(&id).copied()
}
