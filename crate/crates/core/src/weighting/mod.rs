//! Edge weight strategies.
//!
//! An [`EdgeWeightTable`] assigns one nonnegative weight per directed edge
//! occurrence, mirroring the graph's adjacency shape exactly. The walker
//! normalizes weights per source vertex: an out-edge is followed with
//! probability `weight / sum of the source's out-weights`.

mod clickstream;
mod pagerank;

pub use clickstream::{
    clickstream_weights, parse_clickstream, ClickstreamCoverage, ClickstreamOptions,
    ClickstreamReport, ClickstreamTable,
};
pub use pagerank::{
    inverse_pagerank_weights, pagerank, pagerank_weights, PageRankScores, DEFAULT_DAMPING,
    DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE,
};

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EntityId, KnowledgeGraph};

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("graph has no entities")]
    EmptyGraph,
    #[error("negative weight parameter: {0}")]
    NegativeWeight(f64),
    #[error("unknown weighting strategy `{0}`")]
    UnknownStrategy(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Which strategy produced a weight table; kept for provenance in outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightStrategy {
    #[serde(rename = "uniform")]
    Uniform,
    #[serde(rename = "pred-freq")]
    PredFreq,
    #[serde(rename = "pagerank")]
    PageRank,
    #[serde(rename = "inv-pagerank")]
    InvPageRank,
    #[serde(rename = "clickstream")]
    Clickstream,
}

impl WeightStrategy {
    pub const ALL: [WeightStrategy; 5] = [
        WeightStrategy::Uniform,
        WeightStrategy::PredFreq,
        WeightStrategy::PageRank,
        WeightStrategy::InvPageRank,
        WeightStrategy::Clickstream,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WeightStrategy::Uniform => "uniform",
            WeightStrategy::PredFreq => "pred-freq",
            WeightStrategy::PageRank => "pagerank",
            WeightStrategy::InvPageRank => "inv-pagerank",
            WeightStrategy::Clickstream => "clickstream",
        }
    }

    /// Short form used in output file stems, e.g. `clickstream_sg_500w_200v_4d`.
    pub fn stem(self) -> &'static str {
        match self {
            WeightStrategy::Uniform => "uniform",
            WeightStrategy::PredFreq => "predfreq",
            WeightStrategy::PageRank => "pagerank",
            WeightStrategy::InvPageRank => "invpagerank",
            WeightStrategy::Clickstream => "clickstream",
        }
    }
}

impl fmt::Display for WeightStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WeightStrategy {
    type Err = WeightError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(WeightStrategy::Uniform),
            "pred-freq" => Ok(WeightStrategy::PredFreq),
            "pagerank" => Ok(WeightStrategy::PageRank),
            "inv-pagerank" => Ok(WeightStrategy::InvPageRank),
            "clickstream" => Ok(WeightStrategy::Clickstream),
            other => Err(WeightError::UnknownStrategy(other.to_owned())),
        }
    }
}

/// One nonnegative weight per edge occurrence, indexed exactly like the
/// graph's adjacency: `weights[vertex][position]`.
#[derive(Debug, Clone)]
pub struct EdgeWeightTable {
    weights: Vec<Vec<f64>>,
    strategy: WeightStrategy,
}

impl EdgeWeightTable {
    pub(crate) fn new(weights: Vec<Vec<f64>>, strategy: WeightStrategy) -> Self {
        debug_assert!(weights.iter().flatten().all(|w| *w >= 0.0 && w.is_finite()));
        EdgeWeightTable { weights, strategy }
    }

    pub fn strategy(&self) -> WeightStrategy {
        self.strategy
    }

    pub fn weights_for(&self, v: EntityId) -> &[f64] {
        &self.weights[v.index()]
    }

    pub(crate) fn rows(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// True when the table's per-vertex row lengths mirror the graph.
    pub fn matches_shape(&self, graph: &KnowledgeGraph) -> bool {
        self.weights.len() == graph.entity_count()
            && graph
                .adjacency()
                .iter()
                .zip(&self.weights)
                .all(|(edges, row)| edges.len() == row.len())
    }

    /// Transition probabilities over the out-edges of `v`: each weight
    /// divided by the sum of the vertex's out-weights. `None` when the
    /// vertex is a sink or all its weights are zero.
    pub fn probabilities(&self, v: EntityId) -> Option<Vec<f64>> {
        let row = self.weights_for(v);
        let total: f64 = row.iter().sum();
        if total <= 0.0 {
            return None;
        }
        Some(row.iter().map(|w| w / total).collect())
    }

    /// Writes `source_iri<tab>adjacency_index<tab>weight` lines for inspection.
    pub fn write_tsv<W: Write>(&self, graph: &KnowledgeGraph, mut w: W) -> io::Result<()> {
        for v in graph.entity_ids() {
            let iri = graph
                .entity_iri(v)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
            for (k, weight) in self.weights_for(v).iter().enumerate() {
                writeln!(w, "{iri}\t{k}\t{weight}")?;
            }
        }
        Ok(())
    }
}

/// All weights 1: the classic unweighted walk distribution.
pub fn uniform_weights(graph: &KnowledgeGraph) -> EdgeWeightTable {
    let weights = graph
        .adjacency()
        .iter()
        .map(|edges| vec![1.0; edges.len()])
        .collect();
    EdgeWeightTable::new(weights, WeightStrategy::Uniform)
}

/// Each edge weighted by the global occurrence count of its predicate.
pub fn predicate_frequency_weights(graph: &KnowledgeGraph) -> EdgeWeightTable {
    let mut counts = vec![0u64; graph.predicate_count()];
    for edges in graph.adjacency() {
        for edge in edges {
            counts[edge.predicate.index()] += 1;
        }
    }
    let weights = graph
        .adjacency()
        .iter()
        .map(|edges| {
            edges
                .iter()
                .map(|e| counts[e.predicate.index()] as f64)
                .collect()
        })
        .collect();
    EdgeWeightTable::new(weights, WeightStrategy::PredFreq)
}
