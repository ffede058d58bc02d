//! Query workloads drawn from the data itself.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{BkqSpec, BwqSpec, Dataset, KeywordId, ObjectId};
use crate::error::{Result, StixError};
use crate::geometry::{Mbr, Point};

pub const DEFAULT_QUERIES: usize = 1000;
pub const WINDOW_FRACS: [f64; 5] = [0.01, 0.05, 0.1, 0.15, 0.2];
pub const DEFAULT_WINDOW_FRAC: f64 = 0.1;
pub const KS: [usize; 5] = [5, 10, 20, 50, 100];
pub const DEFAULT_K: usize = 10;

/// Number of query keywords: fixed, or drawn uniformly per query from an inclusive range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KeywordCount {
    Fixed(usize),
    Range(usize, usize),
}

impl KeywordCount {
    fn bounds(self) -> (usize, usize) {
        match self {
            KeywordCount::Fixed(n) => (n, n),
            KeywordCount::Range(a, b) => (a, b),
        }
    }
}

impl fmt::Display for KeywordCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeywordCount::Fixed(n) => write!(f, "{n}"),
            KeywordCount::Range(a, b) => write!(f, "{a}-{b}"),
        }
    }
}

impl FromStr for KeywordCount {
    type Err = StixError;

    /// `3` or `1-3`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || StixError::InvalidParameter(format!("keyword count {s:?} is not N or A-B"));
        let s = s.trim();
        match s.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                Ok(if a == b { KeywordCount::Fixed(a) } else { KeywordCount::Range(a, b) })
            }
            None => Ok(KeywordCount::Fixed(s.parse().map_err(|_| bad())?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub queries: usize,
    pub keywords: KeywordCount,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            queries: DEFAULT_QUERIES,
            keywords: KeywordCount::Range(1, 3),
            seed: 42,
        }
    }
}

/// A query location and keyword set, taken from one data object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadQuery {
    pub source: ObjectId,
    pub point: Point,
    pub keywords: Vec<KeywordId>,
}

impl WorkloadQuery {
    /// Square window of side `window_frac` centred on the query point, clipped to the unit square.
    pub fn bwq(&self, window_frac: f64) -> BwqSpec {
        let w = Mbr::square(self.point, window_frac);
        let w = w.intersection(&Mbr::unit()).unwrap_or(w);
        BwqSpec::from_window(w, self.keywords.clone()).expect("square around a finite point is valid")
    }

    pub fn bkq(&self, k: usize) -> Result<BkqSpec> {
        BkqSpec::new(self.point, self.keywords.clone(), k)
    }
}

/// Source objects are drawn without replacement among those holding at least
/// `|T|` keywords, and `|T|` of their keywords become the query keywords.
/// When too few objects qualify the workload is shorter and a warning is logged.
pub fn generate_workload(data: &Dataset, spec: &WorkloadSpec) -> Result<Vec<WorkloadQuery>> {
    let (lo, hi) = spec.keywords.bounds();
    if lo > hi {
        return Err(StixError::InvalidParameter("empty keyword-count range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pools: BTreeMap<usize, (Vec<u32>, usize)> = BTreeMap::new();
    for t in lo..=hi {
        let mut eligible: Vec<u32> = (0..data.len() as u32)
            .filter(|&p| data.object(p).keywords().len() >= t)
            .collect();
        eligible.shuffle(&mut rng);
        pools.insert(t, (eligible, 0));
    }
    let mut used = vec![false; data.len()];
    let mut out = Vec::with_capacity(spec.queries);
    let mut short = 0usize;
    for _ in 0..spec.queries {
        let t = rng.gen_range(lo..=hi);
        let (pool, cursor) = pools.get_mut(&t).expect("pool per count");
        while *cursor < pool.len() && used[pool[*cursor] as usize] {
            *cursor += 1;
        }
        let Some(&pos) = pool.get(*cursor) else {
            short += 1;
            continue;
        };
        used[pos as usize] = true;
        let obj = data.object(pos);
        let keywords: Vec<KeywordId> = obj.keywords().choose_multiple(&mut rng, t).copied().collect();
        out.push(WorkloadQuery {
            source: obj.id,
            point: obj.location,
            keywords,
        });
    }
    if short > 0 {
        log::warn!(
            "only {} of {} queries could be drawn: too few objects with {} keywords",
            out.len(),
            spec.queries,
            spec.keywords
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::synth::{generate, SyntheticSpec};

    fn data() -> Dataset {
        generate(&SyntheticSpec {
            count: 5_000,
            vocabulary: 100,
            ..SyntheticSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn deterministic_and_sized() {
        let d = data();
        let spec = WorkloadSpec::default();
        let a = generate_workload(&d, &spec).unwrap();
        let b = generate_workload(&d, &spec).unwrap();
        assert_eq!(a.len(), DEFAULT_QUERIES);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn sources_hold_the_keywords() {
        let d = data();
        let spec = WorkloadSpec {
            keywords: KeywordCount::Fixed(3),
            queries: 300,
            seed: 1,
        };
        let byid: std::collections::HashMap<u64, u32> = d.objects().iter().enumerate().map(|(i, o)| (o.id, i as u32)).collect();
        for q in generate_workload(&d, &spec).unwrap() {
            let src = d.object(byid[&q.source]);
            assert!(src.keywords().len() >= 3);
            assert_eq!(q.keywords.len(), 3);
            assert!(src.contains_all(&q.keywords));
            assert!(q.bwq(0.1).window.contains_point(&q.point));
        }
    }

    #[test]
    fn short_workload_when_few_objects_qualify() {
        let d = data();
        let spec = WorkloadSpec {
            keywords: KeywordCount::Fixed(40),
            queries: 10,
            seed: 1,
        };
        assert!(generate_workload(&d, &spec).unwrap().is_empty());
    }

    #[test]
    fn keyword_count_parsing() {
        assert_eq!("3".parse::<KeywordCount>().unwrap(), KeywordCount::Fixed(3));
        assert_eq!("1-3".parse::<KeywordCount>().unwrap(), KeywordCount::Range(1, 3));
        assert_eq!("2-2".parse::<KeywordCount>().unwrap(), KeywordCount::Fixed(2));
        assert!("3-1".parse::<KeywordCount>().is_err());
        assert!("x".parse::<KeywordCount>().is_err());
    }

    #[test]
    fn windows_are_clipped() {
        let q = WorkloadQuery {
            source: 0,
            point: Point::new(0.0, 1.0),
            keywords: vec![],
        };
        let w = q.bwq(0.2).window;
        assert_eq!(w, Mbr::new(Point::new(0.0, 0.9), Point::new(0.1, 1.0)).unwrap());
    }
}
