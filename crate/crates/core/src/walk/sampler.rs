//! Weighted edge selection via per-vertex prefix sums.

use crate::graph::{EntityId, KnowledgeGraph};
use crate::weighting::EdgeWeightTable;

use super::WalkError;

/// Per-vertex cumulative weight arrays, built once per (graph, weights)
/// pair. Selection is a binary search, O(log degree) per step.
#[derive(Debug, Clone)]
pub struct CumulativeSampler {
    /// CSR offsets into `prefix`: vertex v owns `prefix[offsets[v]..offsets[v+1]]`.
    offsets: Vec<usize>,
    /// Nondecreasing running sums of out-edge weights per vertex.
    prefix: Vec<f64>,
}

impl CumulativeSampler {
    /// Builds the prefix-sum arrays. Fails when the weight table's shape
    /// does not mirror the graph's adjacency.
    pub fn build(graph: &KnowledgeGraph, weights: &EdgeWeightTable) -> Result<Self, WalkError> {
        if !weights.matches_shape(graph) {
            return Err(WalkError::ShapeMismatch);
        }
        let mut offsets = Vec::with_capacity(graph.entity_count() + 1);
        let mut prefix = Vec::with_capacity(graph.edge_count());
        offsets.push(0);
        for row in weights.rows() {
            let mut running = 0.0;
            for &w in row {
                running += w;
                prefix.push(running);
            }
            offsets.push(prefix.len());
        }
        Ok(CumulativeSampler { offsets, prefix })
    }

    fn row(&self, v: EntityId) -> &[f64] {
        &self.prefix[self.offsets[v.index()]..self.offsets[v.index() + 1]]
    }

    /// Total out-weight of `v`; zero for sinks and all-zero rows.
    pub fn total(&self, v: EntityId) -> f64 {
        self.row(v).last().copied().unwrap_or(0.0)
    }

    /// Picks an adjacency index with probability `weight / total` from a
    /// uniform draw `u` in [0, 1): the first index whose prefix sum exceeds
    /// `u * total`. `None` for sinks and all-zero rows, which truncate the
    /// walk.
    pub fn select_edge(&self, v: EntityId, u: f64) -> Option<usize> {
        debug_assert!((0.0..1.0).contains(&u), "draw {u} outside [0, 1)");
        let row = self.row(v);
        let total = *row.last()?;
        if total <= 0.0 {
            return None;
        }
        let target = u * total;
        // partition_point returns the count of leading entries <= target,
        // i.e. the first index whose prefix exceeds it. Zero-weight edges
        // repeat the previous prefix and are therefore never selected.
        let k = row.partition_point(|&p| p <= target);
        Some(k.min(row.len() - 1))
    }
}
