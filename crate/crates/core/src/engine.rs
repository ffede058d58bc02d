//! One handle over all six index variants.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::domain::{BkqSpec, BwqSpec, Dataset, ResultSet};
use crate::error::{Result, StixError};
use crate::geometry::Mbr;
use crate::mlp::TrainConfig;
use crate::rsmi::{RsmiConfig, RsmiIndex, RsmiVariant, TraversalOptions};
use crate::rtree::{Ir2Tree, RStarTreeIf, RTreeParams};
use crate::text::QueryStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum IndexVariant {
    RStarIf,
    Ir2,
    RsmiIf,
    RsmiBm,
    RsmiBmStar,
    RsmiBmIr2,
}

impl IndexVariant {
    pub const ALL: [IndexVariant; 6] = [
        IndexVariant::RStarIf,
        IndexVariant::Ir2,
        IndexVariant::RsmiIf,
        IndexVariant::RsmiBm,
        IndexVariant::RsmiBmStar,
        IndexVariant::RsmiBmIr2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IndexVariant::RStarIf => "rstar-if",
            IndexVariant::Ir2 => "ir2",
            IndexVariant::RsmiIf => "rsmi-if",
            IndexVariant::RsmiBm => "rsmi-bm",
            IndexVariant::RsmiBmStar => "rsmi-bm-star",
            IndexVariant::RsmiBmIr2 => "rsmi-bm-ir2",
        }
    }

    pub fn rsmi(self) -> Option<RsmiVariant> {
        match self {
            IndexVariant::RsmiIf => Some(RsmiVariant::If),
            IndexVariant::RsmiBm => Some(RsmiVariant::Bm),
            IndexVariant::RsmiBmStar => Some(RsmiVariant::BmStar),
            IndexVariant::RsmiBmIr2 => Some(RsmiVariant::BmIr2),
            _ => None,
        }
    }

    pub fn is_learned(self) -> bool {
        self.rsmi().is_some()
    }

    pub fn supports_bkq(self) -> bool {
        self != IndexVariant::RStarIf
    }

    pub fn tag(self) -> u8 {
        match self {
            IndexVariant::RStarIf => 1,
            IndexVariant::Ir2 => 2,
            IndexVariant::RsmiIf => 3,
            IndexVariant::RsmiBm => 4,
            IndexVariant::RsmiBmStar => 5,
            IndexVariant::RsmiBmIr2 => 6,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.tag() == tag)
    }
}

impl fmt::Display for IndexVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IndexVariant {
    type Err = StixError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|v| v.name()).collect();
                StixError::InvalidParameter(format!("unknown index variant {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

impl From<IndexVariant> for String {
    fn from(v: IndexVariant) -> String {
        v.name().to_string()
    }
}

impl TryFrom<String> for IndexVariant {
    type Error = StixError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Build parameters. `None` picks the variant's default.
///
/// | variant        | defaults                                   |
/// |----------------|--------------------------------------------|
/// | `rstar-if`     | m = 500, M = 1000                          |
/// | `ir2`          | m = 50, M = 100                            |
/// | `rsmi-if`      | block size 1000                            |
/// | `rsmi-bm(-star)` | block size 100                           |
/// | `rsmi-bm-ir2`  | block size 1000, embedded m = 10, M = 20   |
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexParams {
    pub block_size: Option<usize>,
    pub min_node: Option<usize>,
    pub max_node: Option<usize>,
    pub partition_frac: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub inner_error_margins: bool,
}

impl Default for IndexParams {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            block_size: None,
            min_node: None,
            max_node: None,
            partition_frac: 0.1,
            learning_rate: train.learning_rate,
            epochs: train.epochs,
            batch_size: train.batch_size,
            seed: train.seed,
            inner_error_margins: false,
        }
    }
}

impl IndexParams {
    pub fn block_size_for(&self, variant: IndexVariant) -> usize {
        self.block_size.unwrap_or(match variant {
            IndexVariant::RsmiBm | IndexVariant::RsmiBmStar => 100,
            _ => 1000,
        })
    }

    /// Fill bounds of the R*-tree (or of the trees inside hybrid blocks).
    pub fn rtree_params(&self, variant: IndexVariant) -> Result<RTreeParams> {
        let (m, max) = match variant {
            IndexVariant::RStarIf => (500, 1000),
            IndexVariant::Ir2 => (50, 100),
            _ => (10, 20),
        };
        let max = self.max_node.unwrap_or(max);
        let m = self.min_node.unwrap_or(if self.max_node.is_some() { (max / 2).max(1) } else { m });
        RTreeParams::new(m, max)
    }

    pub fn rsmi_config(&self, variant: IndexVariant) -> Result<RsmiConfig> {
        let config = RsmiConfig {
            block_size: self.block_size_for(variant),
            partition_frac: self.partition_frac,
            train: TrainConfig {
                learning_rate: self.learning_rate,
                epochs: self.epochs,
                batch_size: self.batch_size,
                seed: self.seed,
                monotone: false,
            },
            leaf_tree: self.rtree_params(IndexVariant::RsmiBmIr2)?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn traversal(&self) -> TraversalOptions {
        TraversalOptions {
            inner_error_margins: self.inner_error_margins,
            ..TraversalOptions::default()
        }
    }
}

/// Per-query switches; see [`TraversalOptions`].
pub type QueryOptions = TraversalOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildMeta {
    pub params: IndexParams,
    pub objects: usize,
    pub vocabulary: usize,
    pub build_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IndexImpl {
    RStarIf(RStarTreeIf),
    Ir2(Ir2Tree),
    Rsmi(RsmiIndex),
}

#[derive(Debug, Clone)]
pub struct IndexHandle {
    variant: IndexVariant,
    data: Arc<Dataset>,
    index: IndexImpl,
    meta: BuildMeta,
}

impl IndexHandle {
    pub fn build(data: Arc<Dataset>, variant: IndexVariant, params: &IndexParams) -> Result<Self> {
        let started = Instant::now();
        let positions: Vec<u32> = (0..data.len() as u32).collect();
        let index = match variant {
            IndexVariant::RStarIf => IndexImpl::RStarIf(RStarTreeIf::build(&data, &positions, params.rtree_params(variant)?)?),
            IndexVariant::Ir2 => IndexImpl::Ir2(Ir2Tree::build(&data, &positions, params.rtree_params(variant)?)?),
            _ => {
                let rv = variant.rsmi().expect("learned variant");
                IndexImpl::Rsmi(RsmiIndex::build(&data, rv, &params.rsmi_config(variant)?)?)
            }
        };
        let meta = BuildMeta {
            params: *params,
            objects: data.len(),
            vocabulary: data.vocabulary().len(),
            build_seconds: started.elapsed().as_secs_f64(),
        };
        log::info!("built {variant} over {} objects in {:.2}s", data.len(), meta.build_seconds);
        Ok(Self {
            variant,
            data,
            index,
            meta,
        })
    }

    /// Another variant over the same data. Learned variants that partition the
    /// same way and use the same block size reuse the trained models.
    pub fn rebuild_as(&self, variant: IndexVariant, params: &IndexParams) -> Result<Self> {
        if let (IndexImpl::Rsmi(current), Some(rv)) = (&self.index, variant.rsmi()) {
            let config = params.rsmi_config(variant)?;
            let old = current.config();
            let compatible = rv.strategy() == current.variant().strategy()
                && config.block_size == old.block_size
                && config.partition_frac == old.partition_frac
                && config.train == old.train;
            if compatible {
                let started = Instant::now();
                let index = current.rebuild_as(&self.data, rv, config.leaf_tree)?;
                return Ok(Self {
                    variant,
                    data: Arc::clone(&self.data),
                    index: IndexImpl::Rsmi(index),
                    meta: BuildMeta {
                        params: *params,
                        build_seconds: self.meta.build_seconds + started.elapsed().as_secs_f64(),
                        ..self.meta.clone()
                    },
                });
            }
        }
        Self::build(Arc::clone(&self.data), variant, params)
    }

    pub fn from_parts(variant: IndexVariant, data: Arc<Dataset>, index: IndexImpl, meta: BuildMeta) -> Result<Self> {
        let consistent = match (&index, variant.rsmi()) {
            (IndexImpl::RStarIf(_), None) => variant == IndexVariant::RStarIf,
            (IndexImpl::Ir2(_), None) => variant == IndexVariant::Ir2,
            (IndexImpl::Rsmi(r), Some(rv)) => r.variant() == rv && r.len() == data.len(),
            _ => false,
        };
        if !consistent {
            return Err(StixError::Format(format!("index structure does not match variant {variant}")));
        }
        Ok(Self {
            variant,
            data,
            index,
            meta,
        })
    }

    pub fn variant(&self) -> IndexVariant {
        self.variant
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.data
    }

    pub fn meta(&self) -> &BuildMeta {
        &self.meta
    }

    pub fn index(&self) -> &IndexImpl {
        &self.index
    }

    /// Default query options from the build parameters.
    pub fn options(&self) -> QueryOptions {
        self.meta.params.traversal()
    }

    /// Approximate heap footprint of the index structure, excluding the dataset.
    pub fn memory_bytes(&self) -> usize {
        match &self.index {
            IndexImpl::RStarIf(t) => t.heap_bytes(),
            IndexImpl::Ir2(t) => t.heap_bytes(),
            IndexImpl::Rsmi(r) => r.heap_bytes(),
        }
    }

    pub fn execute_bwq(&self, q: &BwqSpec) -> ResultSet {
        self.execute_bwq_with(q, &self.options(), &mut QueryStats::default())
    }

    pub fn execute_bwq_with(&self, q: &BwqSpec, opts: &QueryOptions, stats: &mut QueryStats) -> ResultSet {
        let positions = self.window_positions(&q.window, &q.keywords, opts, stats);
        ResultSet::from_ids(positions.into_iter().map(|p| self.data.object(p).id).collect())
    }

    fn window_positions(&self, window: &Mbr, keywords: &[u32], opts: &QueryOptions, stats: &mut QueryStats) -> Vec<u32> {
        let kw = self.data.prepare_keywords(keywords);
        let mut out = Vec::new();
        stats.windows_issued += 1;
        match &self.index {
            IndexImpl::RStarIf(t) => t.bwq(&self.data, window, &kw, &mut out, stats),
            IndexImpl::Ir2(t) => t.bwq(&self.data, window, &kw, opts.bitmap_gates, &mut out, stats),
            IndexImpl::Rsmi(r) => r.bwq(&self.data, window, &kw, opts, &mut out, stats),
        }
        out
    }

    pub fn execute_bkq(&self, q: &BkqSpec) -> Result<ResultSet> {
        self.execute_bkq_with(q, &self.options(), &mut QueryStats::default())
    }

    /// Exact best-first search on `ir2`; expanding square windows on the
    /// learned variants; unsupported on `rstar-if`.
    pub fn execute_bkq_with(&self, q: &BkqSpec, opts: &QueryOptions, stats: &mut QueryStats) -> Result<ResultSet> {
        if q.k == 0 {
            return Err(StixError::InvalidQuery("k must be at least 1".into()));
        }
        match &self.index {
            IndexImpl::RStarIf(_) => Err(StixError::Unsupported {
                variant: "rstar-if",
                operation: "Boolean kNN queries",
            }),
            IndexImpl::Ir2(t) => {
                let kw = self.data.prepare_keywords(&q.keywords);
                let hits = t.bkq(&self.data, &q.point, &kw, q.k, opts.bitmap_gates, stats);
                Ok(self.neighbors(hits, q.k))
            }
            IndexImpl::Rsmi(_) => {
                let n = self.data.len();
                if n == 0 {
                    return Ok(ResultSet::from_neighbors(Vec::new(), q.k));
                }
                let space = Mbr::unit().union(&self.data.bounds());
                let mut side = initial_window_side(q.k, n);
                loop {
                    let covers = side >= space_side(&space);
                    let window = if covers {
                        Some(space)
                    } else {
                        Mbr::square(q.point, side).intersection(&space)
                    };
                    let found = match window {
                        Some(w) => self.window_positions(&w, &q.keywords, opts, stats),
                        None => Vec::new(),
                    };
                    if found.len() >= q.k || covers {
                        let hits = found
                            .into_iter()
                            .map(|p| (p, self.data.location(p).distance(&q.point)))
                            .collect();
                        return Ok(self.neighbors(hits, q.k));
                    }
                    side *= 2.0;
                }
            }
        }
    }

    fn neighbors(&self, hits: Vec<(u32, f64)>, k: usize) -> ResultSet {
        ResultSet::from_neighbors(hits.into_iter().map(|(p, d)| (self.data.object(p).id, d)).collect(), k)
    }
}

/// `sqrt(k / n)`, the side of a square expected to hold `k` of `n` uniform points.
pub fn initial_window_side(k: usize, n: usize) -> f64 {
    (k as f64 / n.max(1) as f64).sqrt()
}

fn space_side(space: &Mbr) -> f64 {
    (space.hi.x - space.lo.x).max(space.hi.y - space.lo.y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::{KeywordVocabulary, SpatioTextualObject};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quick() -> IndexParams {
        IndexParams {
            epochs: 40,
            ..IndexParams::default()
        }
    }

    fn random_data(n: usize, seed: u64) -> Arc<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let objs = (0..n)
            .map(|i| SpatioTextualObject::new(i as u64, Point::new(rng.gen(), rng.gen()), [rng.gen_range(0..5)]))
            .collect();
        let vocab = KeywordVocabulary::from_words((0..5).map(|i| format!("k{i}")).collect()).unwrap();
        Arc::new(Dataset::new(objs, vocab).unwrap())
    }

    #[test]
    fn variant_names_round_trip() {
        for v in IndexVariant::ALL {
            assert_eq!(v.name().parse::<IndexVariant>().unwrap(), v);
            assert_eq!(IndexVariant::from_tag(v.tag()), Some(v));
        }
        assert!("btree".parse::<IndexVariant>().is_err());
        assert_eq!("RSMI_BM".parse::<IndexVariant>().unwrap(), IndexVariant::RsmiBm);
    }

    #[test]
    fn default_parameters_per_variant() {
        let p = IndexParams::default();
        assert_eq!(p.rtree_params(IndexVariant::RStarIf).unwrap(), RTreeParams::new(500, 1000).unwrap());
        assert_eq!(p.rtree_params(IndexVariant::Ir2).unwrap(), RTreeParams::new(50, 100).unwrap());
        assert_eq!(p.block_size_for(IndexVariant::RsmiBm), 100);
        assert_eq!(p.block_size_for(IndexVariant::RsmiBmStar), 100);
        assert_eq!(p.block_size_for(IndexVariant::RsmiIf), 1000);
        let hybrid = p.rsmi_config(IndexVariant::RsmiBmIr2).unwrap();
        assert_eq!(hybrid.block_size, 1000);
        assert_eq!(hybrid.leaf_tree, RTreeParams::new(10, 20).unwrap());
        assert_eq!(hybrid.partition_frac, 0.1);
        assert_eq!(hybrid.train.learning_rate, 0.01);
        assert_eq!(hybrid.train.epochs, 500);
    }

    #[test]
    fn initial_side_formula() {
        assert!((initial_window_side(10, 1_000_000) - 3.162e-3).abs() < 1e-6);
    }

    #[test]
    fn rstar_if_rejects_knn() {
        let data = random_data(50, 1);
        let h = IndexHandle::build(data, IndexVariant::RStarIf, &IndexParams::default()).unwrap();
        let q = BkqSpec::new(Point::new(0.5, 0.5), vec![], 3).unwrap();
        assert!(matches!(h.execute_bkq(&q), Err(StixError::Unsupported { .. })));
    }

    #[test]
    fn window_outside_data_is_empty_for_every_variant() {
        let data = random_data(500, 2);
        let q = BwqSpec::new(Point::new(5.0, 5.0), Point::new(6.0, 6.0), vec![]).unwrap();
        for v in IndexVariant::ALL {
            let h = IndexHandle::build(Arc::clone(&data), v, &quick()).unwrap();
            assert!(h.execute_bwq(&q).is_empty(), "{v}");
            let again = BwqSpec::new(Point::new(0.2, 0.2), Point::new(0.6, 0.7), vec![1]).unwrap();
            assert_eq!(h.execute_bwq(&again), h.execute_bwq(&again));
        }
    }

    #[test]
    fn unsatisfiable_knn_expands_to_full_space() {
        let data = random_data(1000, 3);
        let h = IndexHandle::build(data, IndexVariant::RsmiBm, &quick()).unwrap();
        let q = BkqSpec::new(Point::new(0.5, 0.5), vec![42], 10).unwrap();
        let mut stats = QueryStats::default();
        let r = h.execute_bkq_with(&q, &h.options(), &mut stats).unwrap();
        assert!(r.is_empty());
        let bound = (1.0 / initial_window_side(10, 1000)).log2().ceil() as u64 + 1;
        assert!(stats.windows_issued <= bound, "{} > {bound}", stats.windows_issued);
        assert!(stats.windows_issued >= 2);
    }

    #[test]
    fn expanding_window_can_miss_a_closer_match() {
        // ℓ0 = sqrt(1/3) ≈ 0.577. Object 1 sits in the first window near its corner;
        // object 2 is closer to q but just outside the square.
        let data = Arc::new(
            Dataset::from_keyword_strings(vec![
                (1, Point::new(0.5 + 0.28, 0.5 + 0.28), vec!["a"]),
                (2, Point::new(0.5 + 0.30, 0.5), vec!["a"]),
                (3, Point::new(0.0, 1.0), vec!["b"]),
            ])
            .unwrap(),
        );
        let params = IndexParams {
            partition_frac: 1.0,
            ..quick()
        };
        let h = IndexHandle::build(data, IndexVariant::RsmiBm, &params).unwrap();
        let a = h.dataset().vocabulary().id("a").unwrap();
        let q = BkqSpec::new(Point::new(0.5, 0.5), vec![a], 1).unwrap();
        let got = h.execute_bkq(&q).unwrap();
        assert_eq!(got.ids(), &[1]);
        let side = initial_window_side(1, 3);
        assert!(got.kth_distance().unwrap() <= side * 2f64.sqrt() / 2.0);
        let exact = crate::oracle::oracle_bkq(h.dataset(), &q);
        assert_eq!(exact.ids(), &[2]);
    }

    #[test]
    fn rebuild_as_reuses_learned_backbone() {
        let data = random_data(2000, 4);
        let params = quick();
        let a = IndexHandle::build(Arc::clone(&data), IndexVariant::RsmiIf, &params).unwrap();
        let b = a.rebuild_as(IndexVariant::RsmiBmIr2, &params).unwrap();
        let fresh = IndexHandle::build(data, IndexVariant::RsmiBmIr2, &params).unwrap();
        assert_eq!(b.index(), fresh.index());
    }
}
