//! Recursive learned spatial index and its spatio-textual variants.
//!
//! The index is a binary partition tree over rank space. Every node owns a
//! model: inner models map a location to the z-ordered child that holds it,
//! leaf models map a location to the block that holds it. Blocks are runs of at
//! most `block_size` objects consecutive in z-order.
//!
//! Objects of a subtree are stored contiguously in [`RsmiStructure::order`], so a
//! node and a block are both just a range of that array.

mod partition;
mod query;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{words_for, Dataset};
use crate::error::{Result, StixError};
use crate::geometry::{Axis, Mbr};
use crate::mlp::{compute_error_bounds, ErrorBounds, Mlp, Sample, TrainConfig};
use crate::rtree::{Ir2Tree, RTreeParams};
use crate::text::InvertedFile;

pub use partition::{
    choose_split_axis_hamming, partition, PartitionKind, PartitionNode, PartitionStrategy, RankMbr,
};
pub use query::{block_range, inner_child_range, TraversalOptions};

use partition::{partition_with, RankTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RsmiVariant {
    /// Spatial pruning only; an inverted file per leaf block.
    If,
    /// Bitmaps on every node and block.
    Bm,
    /// As `Bm`, with keyword-aware split axes.
    BmStar,
    /// As `Bm` on the model levels; an IR²-tree inside every block.
    BmIr2,
}

impl RsmiVariant {
    pub fn strategy(self) -> PartitionStrategy {
        match self {
            RsmiVariant::BmStar => PartitionStrategy::Hamming,
            _ => PartitionStrategy::Spatial,
        }
    }

    pub fn uses_bitmaps(self) -> bool {
        !matches!(self, RsmiVariant::If)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsmiConfig {
    /// `|B|`, objects per leaf block.
    pub block_size: usize,
    /// Leaf partitions hold at most `ceil(partition_frac * n)` objects.
    pub partition_frac: f64,
    pub train: TrainConfig,
    /// Fill bounds of the trees embedded in hybrid blocks.
    pub leaf_tree: RTreeParams,
}

impl Default for RsmiConfig {
    fn default() -> Self {
        Self {
            block_size: 100,
            partition_frac: 0.1,
            train: TrainConfig::default(),
            leaf_tree: RTreeParams {
                min_entries: 10,
                max_entries: 20,
            },
        }
    }
}

impl RsmiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 {
            return Err(StixError::InvalidParameter("block size must be at least 1".into()));
        }
        if !(self.partition_frac > 0.0 && self.partition_frac <= 1.0) {
            return Err(StixError::InvalidParameter(format!(
                "partition fraction must lie in (0, 1], got {}",
                self.partition_frac
            )));
        }
        if !(self.train.learning_rate > 0.0 && self.train.learning_rate.is_finite()) {
            return Err(StixError::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.train.learning_rate
            )));
        }
        self.leaf_tree.validate()
    }

    /// `S` for a dataset of `n` objects.
    pub fn max_partition(&self, n: usize) -> usize {
        ((self.partition_frac * n as f64).ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RsmiNodeKind {
    Inner { axis: Axis, children: Vec<u32> },
    Leaf { first_block: u32, block_count: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsmiNode {
    pub mbr: Mbr,
    /// Range into [`RsmiStructure::order`].
    pub start: u32,
    pub len: u32,
    pub bounds: ErrorBounds,
    pub kind: RsmiNodeKind,
}

impl RsmiNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, RsmiNodeKind::Leaf { .. })
    }

    /// Number of output positions of this node's model.
    pub fn outputs(&self) -> usize {
        match &self.kind {
            RsmiNodeKind::Inner { children, .. } => children.len(),
            RsmiNodeKind::Leaf { block_count, .. } => (*block_count as usize).max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafBlock {
    pub mbr: Mbr,
    pub start: u32,
    pub len: u32,
}

/// Per-block textual structures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BlockAttachment {
    None,
    InvertedFiles(Vec<InvertedFile>),
    Ir2Trees(Vec<Ir2Tree>),
}

/// The model-free part of the index: what a snapshot calls "structure".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsmiStructure {
    pub variant: RsmiVariant,
    pub config: RsmiConfig,
    pub nodes: Vec<RsmiNode>,
    pub blocks: Vec<LeafBlock>,
    pub order: Vec<u32>,
    pub bitmap_words: usize,
    pub node_bitmaps: Vec<u64>,
    pub block_bitmaps: Vec<u64>,
    pub attachment: BlockAttachment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsmiIndex {
    structure: RsmiStructure,
    /// `models[i]` belongs to `nodes[i]`.
    models: Vec<Mlp>,
}

impl RsmiIndex {
    /// Build over every object of `data`.
    pub fn build(data: &Dataset, variant: RsmiVariant, config: &RsmiConfig) -> Result<Self> {
        let positions: Vec<u32> = (0..data.len() as u32).collect();
        Self::build_over(data, &positions, variant, config)
    }

    pub fn build_over(data: &Dataset, positions: &[u32], variant: RsmiVariant, config: &RsmiConfig) -> Result<Self> {
        config.validate()?;
        let table = RankTable::new(data, positions);
        let ptree = partition_with(
            data,
            &table,
            positions.to_vec(),
            config.max_partition(positions.len()),
            variant.strategy(),
        )?;
        let mut structure = build_hierarchy(&ptree, &table, variant, config);
        let models = train_models(data, &structure)?;
        let bounds: Vec<ErrorBounds> = structure
            .nodes
            .par_iter()
            .zip(&models)
            .map(|(node, model)| compute_error_bounds(model, &node_samples(data, &structure, node)))
            .collect();
        for (node, b) in structure.nodes.iter_mut().zip(bounds) {
            node.bounds = b;
        }
        augment(data, &mut structure)?;
        Ok(Self { structure, models })
    }

    /// The same partition, blocks and models with another variant's textual
    /// attachments. Fails if the variants partition differently.
    pub fn rebuild_as(&self, data: &Dataset, variant: RsmiVariant, leaf_tree: RTreeParams) -> Result<Self> {
        if variant.strategy() != self.structure.variant.strategy() {
            return Err(StixError::InvalidParameter(format!(
                "{variant:?} cannot share a partition built for {:?}",
                self.structure.variant
            )));
        }
        leaf_tree.validate()?;
        let mut structure = self.structure.clone();
        structure.variant = variant;
        structure.config.leaf_tree = leaf_tree;
        augment(data, &mut structure)?;
        Ok(Self {
            structure,
            models: self.models.clone(),
        })
    }

    pub fn from_parts(structure: RsmiStructure, models: Vec<Mlp>) -> Result<Self> {
        if structure.nodes.len() != models.len() {
            return Err(StixError::Format(format!(
                "{} nodes but {} models",
                structure.nodes.len(),
                models.len()
            )));
        }
        Ok(Self { structure, models })
    }

    pub fn into_parts(self) -> (RsmiStructure, Vec<Mlp>) {
        (self.structure, self.models)
    }

    pub fn structure(&self) -> &RsmiStructure {
        &self.structure
    }

    pub fn variant(&self) -> RsmiVariant {
        self.structure.variant
    }

    pub fn config(&self) -> &RsmiConfig {
        &self.structure.config
    }

    pub fn nodes(&self) -> &[RsmiNode] {
        &self.structure.nodes
    }

    pub fn models(&self) -> &[Mlp] {
        &self.models
    }

    pub fn blocks(&self) -> &[LeafBlock] {
        &self.structure.blocks
    }

    pub fn block_objects(&self, block: &LeafBlock) -> &[u32] {
        &self.structure.order[block.start as usize..(block.start + block.len) as usize]
    }

    pub fn node_objects(&self, node: &RsmiNode) -> &[u32] {
        &self.structure.order[node.start as usize..(node.start + node.len) as usize]
    }

    pub fn node_bitmap(&self, node: usize) -> Option<&[u64]> {
        let w = self.structure.bitmap_words;
        if self.structure.node_bitmaps.is_empty() {
            return None;
        }
        Some(&self.structure.node_bitmaps[node * w..(node + 1) * w])
    }

    pub fn block_bitmap(&self, block: usize) -> Option<&[u64]> {
        let w = self.structure.bitmap_words;
        if self.structure.block_bitmaps.is_empty() {
            return None;
        }
        Some(&self.structure.block_bitmaps[block * w..(block + 1) * w])
    }

    pub fn len(&self) -> usize {
        self.structure.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.structure.order.is_empty()
    }

    pub fn depth(&self) -> usize {
        fn depth(nodes: &[RsmiNode], id: usize) -> usize {
            match &nodes[id].kind {
                RsmiNodeKind::Leaf { .. } => 1,
                RsmiNodeKind::Inner { children, .. } => {
                    1 + children.iter().map(|&c| depth(nodes, c as usize)).max().unwrap_or(0)
                }
            }
        }
        depth(&self.structure.nodes, 0)
    }

    pub(crate) fn heap_bytes(&self) -> usize {
        let s = &self.structure;
        let attach = match &s.attachment {
            BlockAttachment::None => 0,
            BlockAttachment::InvertedFiles(v) => v.iter().map(InvertedFile::heap_bytes).sum(),
            BlockAttachment::Ir2Trees(v) => v.iter().map(Ir2Tree::heap_bytes).sum(),
        };
        s.nodes.len() * std::mem::size_of::<RsmiNode>()
            + s.blocks.len() * std::mem::size_of::<LeafBlock>()
            + s.order.len() * 4
            + (s.node_bitmaps.len() + s.block_bitmaps.len()) * 8
            + self.models.iter().map(Mlp::heap_bytes).sum::<usize>()
            + attach
    }
}

/// Flatten a partition tree into nodes (pre-order, root first) and blocks.
/// Leaf objects are sorted by z-value and chunked into blocks of `block_size`.
fn build_hierarchy(ptree: &PartitionNode, table: &RankTable, variant: RsmiVariant, config: &RsmiConfig) -> RsmiStructure {
    let mut s = RsmiStructure {
        variant,
        config: *config,
        nodes: Vec::new(),
        blocks: Vec::new(),
        order: Vec::with_capacity(ptree.len()),
        bitmap_words: 0,
        node_bitmaps: Vec::new(),
        block_bitmaps: Vec::new(),
        attachment: BlockAttachment::None,
    };
    flatten(ptree, table, config.block_size, &mut s);
    s
}

fn flatten(p: &PartitionNode, table: &RankTable, block_size: usize, s: &mut RsmiStructure) -> u32 {
    let id = s.nodes.len() as u32;
    let start = s.order.len() as u32;
    s.nodes.push(RsmiNode {
        mbr: p.mbr,
        start,
        len: 0,
        bounds: ErrorBounds::default(),
        kind: RsmiNodeKind::Leaf {
            first_block: 0,
            block_count: 0,
        },
    });
    let kind = match &p.kind {
        PartitionKind::Inner { axis, children } => {
            let ids = children.iter().map(|c| flatten(c, table, block_size, s)).collect();
            RsmiNodeKind::Inner { axis: *axis, children: ids }
        }
        PartitionKind::Leaf(objects) => {
            let mut sorted = objects.clone();
            sorted.sort_unstable_by_key(|&p| (table.z(p), p));
            let first_block = s.blocks.len() as u32;
            for chunk in sorted.chunks(block_size) {
                s.blocks.push(LeafBlock {
                    mbr: Mbr::empty(),
                    start: s.order.len() as u32,
                    len: chunk.len() as u32,
                });
                s.order.extend_from_slice(chunk);
            }
            RsmiNodeKind::Leaf {
                first_block,
                block_count: s.blocks.len() as u32 - first_block,
            }
        }
    };
    let node = &mut s.nodes[id as usize];
    node.len = s.order.len() as u32 - start;
    node.kind = kind;
    id
}

/// Deterministic per-node seed.
fn node_seed(base: u64, node: usize) -> u64 {
    let mut z = base ^ (node as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn node_samples(data: &Dataset, s: &RsmiStructure, node: &RsmiNode) -> Vec<Sample> {
    let slice = |start: u32, len: u32| &s.order[start as usize..(start + len) as usize];
    let mut samples = Vec::with_capacity(node.len as usize);
    match &node.kind {
        RsmiNodeKind::Inner { children, .. } => {
            for (j, &c) in children.iter().enumerate() {
                let child = &s.nodes[c as usize];
                samples.extend(slice(child.start, child.len).iter().map(|&p| Sample::new(*data.location(p), j)));
            }
        }
        RsmiNodeKind::Leaf {
            first_block,
            block_count,
        } => {
            for b in 0..*block_count {
                let block = &s.blocks[(first_block + b) as usize];
                samples.extend(
                    slice(block.start, block.len)
                        .iter()
                        .map(|&p| Sample::new(*data.location(p), b as usize)),
                );
            }
        }
    }
    samples
}

/// Inner models predict the child index; leaf models the block index and are
/// trained monotone so that a window's corners bracket every point inside it.
fn train_models(data: &Dataset, s: &RsmiStructure) -> Result<Vec<Mlp>> {
    s.nodes
        .par_iter()
        .enumerate()
        .map(|(i, node)| {
            let samples = node_samples(data, s, node);
            if samples.is_empty() {
                return Mlp::constant(node.outputs(), 0.0);
            }
            let cfg = TrainConfig {
                seed: node_seed(s.config.train.seed, i),
                monotone: node.is_leaf(),
                ..s.config.train
            };
            Mlp::train(&samples, node.outputs(), &cfg)
        })
        .collect()
}

/// Block MBRs, bitmaps and per-block textual structures for the current variant.
fn augment(data: &Dataset, s: &mut RsmiStructure) -> Result<()> {
    for block in s.blocks.iter_mut() {
        let objects = &s.order[block.start as usize..(block.start + block.len) as usize];
        block.mbr = Mbr::of_points(objects.iter().map(|&p| data.location(p)));
    }
    s.bitmap_words = words_for(data.bitmap_len());
    s.node_bitmaps.clear();
    s.block_bitmaps.clear();
    if s.variant.uses_bitmaps() {
        let w = s.bitmap_words;
        s.block_bitmaps = vec![0; w * s.blocks.len()];
        for (i, block) in s.blocks.iter().enumerate() {
            for &p in &s.order[block.start as usize..(block.start + block.len) as usize] {
                for (dst, src) in s.block_bitmaps[i * w..(i + 1) * w].iter_mut().zip(data.signature(p)) {
                    *dst |= src;
                }
            }
        }
        s.node_bitmaps = vec![0; w * s.nodes.len()];
        // Children come after their parent in pre-order, so a reverse sweep
        // sees every child before its parent.
        for id in (0..s.nodes.len()).rev() {
            let mut acc = vec![0u64; w];
            match &s.nodes[id].kind {
                RsmiNodeKind::Inner { children, .. } => {
                    for &c in children {
                        let c = c as usize;
                        acc.iter_mut()
                            .zip(&s.node_bitmaps[c * w..(c + 1) * w])
                            .for_each(|(a, b)| *a |= b);
                    }
                }
                RsmiNodeKind::Leaf {
                    first_block,
                    block_count,
                } => {
                    for b in *first_block..first_block + block_count {
                        let b = b as usize;
                        acc.iter_mut()
                            .zip(&s.block_bitmaps[b * w..(b + 1) * w])
                            .for_each(|(a, x)| *a |= x);
                    }
                }
            }
            s.node_bitmaps[id * w..(id + 1) * w].copy_from_slice(&acc);
        }
    }
    s.attachment = match s.variant {
        RsmiVariant::If => BlockAttachment::InvertedFiles(
            s.blocks
                .iter()
                .map(|b| {
                    let objects = &s.order[b.start as usize..(b.start + b.len) as usize];
                    InvertedFile::build(objects.iter().map(|&p| (p, data.object(p).keywords())))
                })
                .collect(),
        ),
        RsmiVariant::BmIr2 => BlockAttachment::Ir2Trees(
            s.blocks
                .par_iter()
                .map(|b| Ir2Tree::build(data, &s.order[b.start as usize..(b.start + b.len) as usize], s.config.leaf_tree))
                .collect::<Result<Vec<_>>>()?,
        ),
        RsmiVariant::Bm | RsmiVariant::BmStar => BlockAttachment::None,
    };
    Ok(())
}
