//! PageRank scores and the two weighting strategies derived from them.

use crate::graph::{EntityId, KnowledgeGraph};

use super::{EdgeWeightTable, WeightError, WeightStrategy};

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 100;

/// PageRank scores over the graph's entities. Scores are strictly positive
/// and sum to 1.
#[derive(Debug, Clone)]
pub struct PageRankScores {
    scores: Vec<f64>,
    pub damping: f64,
    pub iterations: usize,
    /// L1 change of the final iteration.
    pub residual: f64,
    pub converged: bool,
}

impl PageRankScores {
    pub fn score(&self, v: EntityId) -> f64 {
        self.scores[v.index()]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// Power iteration over the entity-to-entity link structure.
///
/// Parallel edges are collapsed to a single directed link per distinct
/// (source, target) pair and predicates are ignored: PageRank is a node
/// score, not an edge score. Dangling-node mass is redistributed uniformly.
/// Terminates when the L1 change drops below `tolerance` or after
/// `max_iterations`, whichever comes first; a non-converged result is
/// returned as-is with a warning logged and the residual recorded.
pub fn pagerank(
    graph: &KnowledgeGraph,
    damping: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<PageRankScores, WeightError> {
    let n = graph.entity_count();
    if n == 0 {
        return Err(WeightError::EmptyGraph);
    }
    assert!(
        damping > 0.0 && damping < 1.0,
        "damping must be in (0, 1), got {damping}"
    );

    // Distinct-target link lists per source.
    let links: Vec<Vec<u32>> = graph
        .adjacency()
        .iter()
        .map(|edges| {
            let mut targets: Vec<u32> = edges.iter().map(|e| e.target.index() as u32).collect();
            targets.sort_unstable();
            targets.dedup();
            targets
        })
        .collect();

    let inv_n = 1.0 / n as f64;
    let mut current = vec![inv_n; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;

    while iterations < max_iterations {
        let dangling_mass: f64 = links
            .iter()
            .zip(&current)
            .filter(|(targets, _)| targets.is_empty())
            .map(|(_, score)| *score)
            .sum();

        let teleport = (1.0 - damping) * inv_n + damping * dangling_mass * inv_n;
        next.fill(teleport);
        for (targets, &score) in links.iter().zip(&current) {
            if targets.is_empty() {
                continue;
            }
            let share = damping * score / targets.len() as f64;
            for &t in targets {
                next[t as usize] += share;
            }
        }

        residual = current
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .sum();
        std::mem::swap(&mut current, &mut next);
        iterations += 1;
        if residual < tolerance {
            break;
        }
    }

    let converged = residual < tolerance;
    if !converged {
        log::warn!(
            "pagerank did not converge after {iterations} iterations (residual {residual:e}, tolerance {tolerance:e})"
        );
    }

    Ok(PageRankScores {
        scores: current,
        damping,
        iterations,
        residual,
        converged,
    })
}

/// Weight of edge (i, p, j) = PageRank score of the target j.
pub fn pagerank_weights(graph: &KnowledgeGraph, scores: &PageRankScores) -> EdgeWeightTable {
    assert_eq!(
        scores.scores.len(),
        graph.entity_count(),
        "scores were computed for a different graph"
    );
    let weights = graph
        .adjacency()
        .iter()
        .map(|edges| edges.iter().map(|e| scores.score(e.target)).collect())
        .collect();
    EdgeWeightTable::new(weights, WeightStrategy::PageRank)
}

/// Weight of edge (i, p, j) = 1 / PageRank score of the target j. Scores
/// are strictly positive, so the reciprocal is always defined.
pub fn inverse_pagerank_weights(
    graph: &KnowledgeGraph,
    scores: &PageRankScores,
) -> EdgeWeightTable {
    assert_eq!(
        scores.scores.len(),
        graph.entity_count(),
        "scores were computed for a different graph"
    );
    let weights = graph
        .adjacency()
        .iter()
        .map(|edges| edges.iter().map(|e| 1.0 / scores.score(e.target)).collect())
        .collect();
    EdgeWeightTable::new(weights, WeightStrategy::InvPageRank)
}
