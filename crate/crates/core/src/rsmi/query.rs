//! Window traversal over the model hierarchy.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::{BlockAttachment, RsmiIndex, RsmiNodeKind};
use crate::domain::{covers_words, Dataset, PreparedKeywords};
use crate::geometry::Mbr;
use crate::mlp::ErrorBounds;
use crate::text::QueryStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraversalOptions {
    /// Visit every child of an inner node instead of the predicted range.
    /// Leaf models are still used, which isolates their contribution.
    pub exhaustive_inner: bool,
    /// Widen inner-node child ranges by the node's error bounds.
    pub inner_error_margins: bool,
    /// Apply bitmap pruning where the variant has bitmaps.
    pub bitmap_gates: bool,
}

impl Default for TraversalOptions {
    fn default() -> Self {
        Self {
            exhaustive_inner: false,
            inner_error_margins: false,
            bitmap_gates: true,
        }
    }
}

/// `[min(a, b) - eps_lo, max(a, b) + eps_hi]` clamped to `0..count`.
/// `None` when there is nothing to visit.
pub fn block_range(a: usize, b: usize, bounds: ErrorBounds, count: usize) -> Option<RangeInclusive<usize>> {
    if count == 0 {
        return None;
    }
    let lo = a.min(b).saturating_sub(bounds.eps_lo as usize);
    let hi = (a.max(b) + bounds.eps_hi as usize).min(count - 1);
    (lo <= hi).then_some(lo..=hi)
}

/// Children between the two corner predictions; error bounds only when asked for.
pub fn inner_child_range(a: usize, b: usize, margins: Option<ErrorBounds>, count: usize) -> Option<RangeInclusive<usize>> {
    block_range(a, b, margins.unwrap_or_default(), count)
}

impl RsmiIndex {
    /// Boolean window query. Appends matching dataset positions to `out`.
    pub fn bwq(
        &self,
        data: &Dataset,
        window: &Mbr,
        keywords: &PreparedKeywords,
        opts: &TraversalOptions,
        out: &mut Vec<u32>,
        stats: &mut QueryStats,
    ) {
        if !keywords.satisfiable || self.is_empty() || !self.check_inner(0, window, keywords, opts) {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            stats.nodes_visited += 1;
            let node = &self.structure.nodes[id];
            let model = &self.models[id];
            let lo = node.mbr.clamp_point(&window.lo);
            let hi = node.mbr.clamp_point(&window.hi);
            match &node.kind {
                RsmiNodeKind::Inner { children, .. } => {
                    let range = if opts.exhaustive_inner {
                        Some(0..=children.len() - 1)
                    } else {
                        let margins = opts.inner_error_margins.then_some(node.bounds);
                        inner_child_range(model.predict_index(&lo), model.predict_index(&hi), margins, children.len())
                    };
                    for j in range.into_iter().flatten().rev() {
                        let c = children[j] as usize;
                        if self.check_inner(c, window, keywords, opts) {
                            stack.push(c);
                        }
                    }
                }
                RsmiNodeKind::Leaf {
                    first_block,
                    block_count,
                } => {
                    let range = block_range(
                        model.predict_index(&lo),
                        model.predict_index(&hi),
                        node.bounds,
                        *block_count as usize,
                    );
                    for b in range.into_iter().flatten() {
                        self.check_leaf(data, *first_block as usize + b, window, keywords, opts, out, stats);
                    }
                }
            }
        }
    }

    /// MBR intersection, plus bitmap coverage for the bitmap variants.
    pub fn check_inner(&self, node: usize, window: &Mbr, keywords: &PreparedKeywords, opts: &TraversalOptions) -> bool {
        if !self.structure.nodes[node].mbr.intersects(window) {
            return false;
        }
        match self.node_bitmap(node) {
            Some(bm) if opts.bitmap_gates => covers_words(bm, keywords.bitmap.words()),
            _ => true,
        }
    }

    /// Gate a block by MBR (and bitmap) and collect its matches.
    #[allow(clippy::too_many_arguments)]
    pub fn check_leaf(
        &self,
        data: &Dataset,
        block: usize,
        window: &Mbr,
        keywords: &PreparedKeywords,
        opts: &TraversalOptions,
        out: &mut Vec<u32>,
        stats: &mut QueryStats,
    ) {
        let b = &self.structure.blocks[block];
        if !b.mbr.intersects(window) {
            return;
        }
        if let Some(bm) = self.block_bitmap(block) {
            if opts.bitmap_gates && !covers_words(bm, keywords.bitmap.words()) {
                return;
            }
        }
        stats.blocks_visited += 1;
        match &self.structure.attachment {
            BlockAttachment::InvertedFiles(files) => {
                for pos in files[block].candidates(&keywords.ids) {
                    stats.objects_examined += 1;
                    if window.contains_point(data.location(pos)) {
                        out.push(pos);
                    }
                }
            }
            BlockAttachment::Ir2Trees(trees) => {
                trees[block].bwq(data, window, keywords, opts.bitmap_gates, out, stats);
            }
            BlockAttachment::None => {
                for &pos in self.block_objects(b) {
                    stats.objects_examined += 1;
                    if window.contains_point(data.location(pos)) && data.matches(pos, keywords) {
                        out.push(pos);
                    }
                }
            }
        }
    }
}
