//! Weighted random walk generation.
//!
//! For every vertex, `walks_per_vertex` walks of token budget `depth` are
//! generated. A walk starts at its vertex and alternates entity and
//! predicate tokens; each step follows an out-edge chosen with probability
//! proportional to its weight. Vertices without a selectable edge truncate
//! the walk, which is still emitted, so graph periphery stays covered.

mod sampler;

pub use sampler::CumulativeSampler;

use std::io::{self, BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EntityId, KnowledgeGraph, PredicateId};
use crate::weighting::EdgeWeightTable;

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("weight table shape does not match the graph")]
    ShapeMismatch,
    #[error("invalid walk configuration: {0}")]
    InvalidConfig(String),
    #[error("line {line}: unknown token `{token}`")]
    UnknownToken { line: u64, token: String },
    #[error("line {line}: {message}")]
    MalformedWalk { line: u64, message: String },
    #[error("failed to build worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Walk generation parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Token budget per walk; a full walk has `1 + depth` tokens.
    pub depth: usize,
    pub walks_per_vertex: usize,
    pub seed: u64,
    pub workers: usize,
}

impl WalkConfig {
    pub fn new(depth: usize, walks_per_vertex: usize, seed: u64) -> Result<Self, WalkError> {
        if depth < 1 {
            return Err(WalkError::InvalidConfig("depth must be >= 1".into()));
        }
        if walks_per_vertex < 1 {
            return Err(WalkError::InvalidConfig(
                "walks_per_vertex must be >= 1".into(),
            ));
        }
        Ok(WalkConfig {
            depth,
            walks_per_vertex,
            seed,
            workers: 1,
        })
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }
}

/// One token of a walk: walks alternate entities and predicates, starting
/// with an entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Entity(EntityId),
    Predicate(PredicateId),
}

/// Ordered multiset of walks, vertex-id major, walk-index minor. Duplicate
/// walks are kept: downstream training benefits from frequency information.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WalkCorpus {
    walks: Vec<Vec<Token>>,
}

impl WalkCorpus {
    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    pub fn walks(&self) -> &[Vec<Token>] {
        &self.walks
    }

    /// Resolves every token to its IRI, one `Vec<String>` per walk.
    pub fn token_strings(&self, graph: &KnowledgeGraph) -> Vec<Vec<String>> {
        self.walks
            .iter()
            .map(|walk| {
                walk.iter()
                    .map(|token| match token {
                        Token::Entity(v) => graph.entity_iri(*v).expect("token from graph"),
                        Token::Predicate(p) => graph.predicate_iri(*p).expect("token from graph"),
                    }
                    .to_owned())
                    .collect()
            })
            .collect()
    }

    /// Writes one walk per line, tokens space-separated, IRIs verbatim.
    pub fn write<W: Write>(&self, graph: &KnowledgeGraph, mut w: W) -> io::Result<()> {
        let mut line = String::new();
        for walk in &self.walks {
            line.clear();
            for (i, token) in walk.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                let iri = match token {
                    Token::Entity(v) => graph.entity_iri(*v),
                    Token::Predicate(p) => graph.predicate_iri(*p),
                }
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
                line.push_str(iri);
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads a corpus written by [`WalkCorpus::write`], resolving tokens
    /// against the graph. Tokens at even positions must be entities, at odd
    /// positions predicates.
    pub fn read<R: BufRead>(graph: &KnowledgeGraph, reader: R) -> Result<Self, WalkError> {
        let mut walks = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx as u64 + 1;
            let line = line?;
            let mut walk = Vec::new();
            for (pos, token) in line.split_whitespace().enumerate() {
                let resolved = if pos % 2 == 0 {
                    graph.resolve(token).map(Token::Entity)
                } else {
                    graph.resolve_predicate(token).map(Token::Predicate)
                };
                match resolved {
                    Some(t) => walk.push(t),
                    None => {
                        return Err(WalkError::UnknownToken {
                            line: line_no,
                            token: token.to_owned(),
                        })
                    }
                }
            }
            if walk.is_empty() {
                return Err(WalkError::MalformedWalk {
                    line: line_no,
                    message: "empty walk line".into(),
                });
            }
            walks.push(walk);
        }
        Ok(WalkCorpus { walks })
    }
}

fn single_walk(
    graph: &KnowledgeGraph,
    sampler: &CumulativeSampler,
    start: EntityId,
    depth: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Token> {
    let adjacency = graph.adjacency();
    let mut walk = Vec::with_capacity(depth + 1);
    walk.push(Token::Entity(start));
    let mut current = start;
    let mut budget = depth;
    while budget > 0 {
        let Some(k) = sampler.select_edge(current, rng.gen::<f64>()) else {
            break;
        };
        let edge = adjacency[current.index()][k];
        budget -= 1;
        walk.push(Token::Predicate(edge.predicate));
        if budget > 0 {
            walk.push(Token::Entity(edge.target));
            current = edge.target;
            budget -= 1;
        }
    }
    walk
}

/// Generates `walks_per_vertex` walks from every vertex.
///
/// Each start vertex draws from its own counter-based random stream derived
/// from (seed, vertex id), so the corpus is identical for any worker count;
/// walks are emitted vertex-id major, walk-index minor.
pub fn generate_walks(
    graph: &KnowledgeGraph,
    weights: &EdgeWeightTable,
    config: &WalkConfig,
) -> Result<WalkCorpus, WalkError> {
    if config.depth < 1 || config.walks_per_vertex < 1 {
        return Err(WalkError::InvalidConfig(
            "depth and walks_per_vertex must be >= 1".into(),
        ));
    }
    let sampler = CumulativeSampler::build(graph, weights)?;

    let walks_from = |v: u32| -> Vec<Vec<Token>> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(v as u64);
        let start = EntityId::new(v);
        (0..config.walks_per_vertex)
            .map(|_| single_walk(graph, &sampler, start, config.depth, &mut rng))
            .collect()
    };

    let vertex_range = 0..graph.entity_count() as u32;
    let per_vertex: Vec<Vec<Vec<Token>>> = if config.workers <= 1 {
        vertex_range.map(walks_from).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| WalkError::Pool(e.to_string()))?;
        pool.install(|| vertex_range.into_par_iter().map(walks_from).collect())
    };

    Ok(WalkCorpus {
        walks: per_vertex.into_iter().flatten().collect(),
    })
}
