//! Knowledge-graph walk embeddings.
//!
//! The pipeline turns an RDF knowledge graph (N-Triples) plus optional
//! clickstream transition counts into entity embeddings:
//!
//! 1. [`graph`] parses triples into an interned, adjacency-list graph.
//! 2. [`weighting`] assigns one nonnegative weight per directed edge under
//!    one of five strategies (uniform, predicate frequency, PageRank,
//!    inverse PageRank, clickstream counts).
//! 3. [`walk`] generates weighted random walks, following each out-edge
//!    with probability proportional to its weight.
//! 4. [`embed`] trains SkipGram or CBOW embeddings with negative sampling
//!    over the walk corpus.
//! 5. [`eval`] scores the embeddings with kNN classification/regression,
//!    ridge regression, and an item-KNN recommender.

pub mod embed;
pub mod eval;
pub mod graph;
pub(crate) mod io;
pub mod walk;
pub mod weighting;

pub use embed::{
    build_vocab, load_embeddings, save_embeddings, train_cbow, train_skipgram, EmbedError,
    EmbeddingMatrix, TrainConfig, TrainMode, TrainResult, Vocabulary,
};
pub use eval::{
    cosine_similarity, evaluate_recommender, knn_classify, knn_regress, linear_regression,
    predict_rating, EvalError, EvalReport, Label, LabeledEntitySet, MetricSeries,
    PredictionRecord, RatingPrediction, RatingsDataset, RecommenderConfig,
};
pub use graph::{
    parse_ntriples, Edge, EntityId, GraphError, KnowledgeGraph, ParseOptions, ParseReport,
    PredicateId,
};
pub use walk::{
    generate_walks, CumulativeSampler, Token, WalkConfig, WalkCorpus, WalkError,
};
pub use weighting::{
    clickstream_weights, inverse_pagerank_weights, pagerank, pagerank_weights,
    parse_clickstream, predicate_frequency_weights, uniform_weights, ClickstreamCoverage,
    ClickstreamOptions, ClickstreamReport, ClickstreamTable, EdgeWeightTable, PageRankScores,
    WeightError, WeightStrategy,
};
