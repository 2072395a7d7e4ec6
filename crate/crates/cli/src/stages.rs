//! Stage implementations shared by the standalone subcommands and the
//! end-to-end pipeline.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use kgwe_core::{
    build_vocab, clickstream_weights, evaluate_recommender, generate_walks, inverse_pagerank_weights,
    knn_classify, knn_regress, linear_regression, pagerank, pagerank_weights, parse_clickstream,
    parse_ntriples, predicate_frequency_weights, save_embeddings, train_cbow, train_skipgram,
    uniform_weights, ClickstreamOptions, EdgeWeightTable, EmbeddingMatrix, EvalReport,
    KnowledgeGraph, LabeledEntitySet, ParseOptions, ParseReport, RatingsDataset,
    RecommenderConfig, TrainConfig, TrainMode, TrainResult, WalkConfig, WalkCorpus,
    WeightStrategy,
};

use crate::config::{stage_seed, PipelineConfig, Task};

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn load_graph(path: &Path, strict: bool) -> Result<(KnowledgeGraph, ParseReport)> {
    let reader = open(path)?;
    let (graph, report) = parse_ntriples(reader, &ParseOptions { strict })
        .with_context(|| format!("parsing {}", path.display()))?;
    log::info!(
        "graph: {} entities, {} predicates, {} edges ({} literal triples skipped, {} duplicates, {} malformed lines)",
        graph.entity_count(),
        graph.predicate_count(),
        graph.edge_count(),
        report.literals_skipped,
        report.duplicates_skipped,
        report.errors.len()
    );
    Ok((graph, report))
}

/// Writes `graph_stats.json` and the `LINE<tab>MESSAGE` parse-error report.
pub fn write_parse_outputs(
    out: &Path,
    graph: &KnowledgeGraph,
    report: &ParseReport,
) -> Result<Vec<PathBuf>> {
    let stats_path = out.join("graph_stats.json");
    let stats = serde_json::json!({
        "entities": graph.entity_count(),
        "predicates": graph.predicate_count(),
        "edges": graph.edge_count(),
        "literals_skipped": report.literals_skipped,
        "duplicates_skipped": report.duplicates_skipped,
        "malformed_lines": report.errors.len(),
    });
    fs::write(&stats_path, serde_json::to_string_pretty(&stats)?)?;

    let errors_path = out.join("parse_errors.tsv");
    let mut w = create(&errors_path)?;
    report.write_tsv(&mut w)?;
    w.flush()?;
    Ok(vec![stats_path, errors_path])
}

/// Builds the weight table for the configured strategy. `clickstream`
/// strategy requires a clickstream path, checked by the caller.
pub fn build_weights(graph: &KnowledgeGraph, config: &PipelineConfig) -> Result<EdgeWeightTable> {
    let table = match config.strategy {
        WeightStrategy::Uniform => uniform_weights(graph),
        WeightStrategy::PredFreq => predicate_frequency_weights(graph),
        WeightStrategy::PageRank | WeightStrategy::InvPageRank => {
            let scores = pagerank(graph, config.damping, config.tolerance, config.max_iterations)?;
            log::info!(
                "pagerank: {} iterations, residual {:e}, converged: {}",
                scores.iterations,
                scores.residual,
                scores.converged
            );
            if config.strategy == WeightStrategy::PageRank {
                pagerank_weights(graph, &scores)
            } else {
                inverse_pagerank_weights(graph, &scores)
            }
        }
        WeightStrategy::Clickstream => {
            let path = config
                .clickstream
                .as_ref()
                .context("clickstream strategy needs a clickstream path")?;
            let (table, report) = parse_clickstream(open(path)?)?;
            log::info!(
                "clickstream: {} pairs kept, {} non-link rows skipped, {} malformed rows",
                table.len(),
                report.rows_skipped_non_link,
                report.rows_malformed
            );
            let options = ClickstreamOptions {
                entity_prefix: config.entity_prefix.clone(),
                smoothing: config.smoothing,
                decode_titles: config.decode_titles,
            };
            let (weights, coverage) = clickstream_weights(graph, &table, &options)?;
            log::info!(
                "clickstream coverage: {} matched edges, {} smoothed, {} unmapped entities",
                coverage.matched_edges,
                coverage.smoothed_edges,
                coverage.unmapped_entities
            );
            weights
        }
    };
    Ok(table)
}

pub fn write_weights_tsv(
    out: &Path,
    name: &str,
    graph: &KnowledgeGraph,
    table: &EdgeWeightTable,
) -> Result<PathBuf> {
    let path = out.join(name);
    let mut w = create(&path)?;
    table.write_tsv(graph, &mut w)?;
    w.flush()?;
    Ok(path)
}

pub fn generate_corpus(
    graph: &KnowledgeGraph,
    weights: &EdgeWeightTable,
    config: &PipelineConfig,
) -> Result<WalkCorpus> {
    let walk_config = WalkConfig::new(
        config.depth,
        config.walks_per_vertex,
        stage_seed(config.seed, "walk"),
    )?
    .with_workers(config.workers);
    let corpus = generate_walks(graph, weights, &walk_config)?;
    log::info!("walks: {} sequences", corpus.len());
    Ok(corpus)
}

pub fn write_corpus(
    out: &Path,
    name: &str,
    graph: &KnowledgeGraph,
    corpus: &WalkCorpus,
) -> Result<PathBuf> {
    let path = out.join(name);
    let mut w = create(&path)?;
    corpus.write(graph, &mut w)?;
    w.flush()?;
    Ok(path)
}

/// Reads a corpus file as raw token lines; no graph needed for training.
pub fn read_corpus_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut sentences = Vec::new();
    for line in open(path)?.lines() {
        let line = line?;
        let tokens: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
        if !tokens.is_empty() {
            sentences.push(tokens);
        }
    }
    Ok(sentences)
}

pub fn train_embeddings(
    sentences: &[Vec<String>],
    config: &PipelineConfig,
) -> Result<TrainResult> {
    let mut train_config = TrainConfig::new(config.mode);
    train_config.dimension = config.dim;
    train_config.window = config.window;
    train_config.negatives = config.negatives;
    train_config.epochs = config.epochs;
    train_config.min_count = config.min_count;
    train_config.seed = stage_seed(config.seed, "train");
    train_config.workers = config.workers;
    train_config.subsample = config.subsample;
    if let Some(rate) = config.learning_rate {
        train_config.learning_rate = rate;
    }

    let vocab = build_vocab(sentences, config.min_count);
    log::info!(
        "vocabulary: {} tokens ({} occurrences)",
        vocab.len(),
        vocab.total_tokens()
    );
    let result = match config.mode {
        TrainMode::SkipGram => train_skipgram(sentences, &vocab, &train_config)?,
        TrainMode::Cbow => train_cbow(sentences, &vocab, &train_config)?,
    };
    log::info!("epoch losses: {:?}", result.epoch_loss);
    Ok(result)
}

pub fn write_embeddings(out: &Path, name: &str, matrix: &EmbeddingMatrix) -> Result<PathBuf> {
    let path = out.join(name);
    let mut w = create(&path)?;
    save_embeddings(matrix, &mut w)?;
    w.flush()?;
    Ok(path)
}

pub fn load_embeddings_file(path: &Path) -> Result<EmbeddingMatrix> {
    Ok(kgwe_core::load_embeddings(open(path)?)
        .with_context(|| format!("loading embeddings {}", path.display()))?)
}

/// Runs the configured classification/regression evaluation. Regression
/// runs both the kNN regressor and linear regression.
pub fn eval_ml(
    embeddings: &EmbeddingMatrix,
    labels_path: &Path,
    config: &PipelineConfig,
) -> Result<Vec<(String, EvalReport)>> {
    let seed = stage_seed(config.seed, "eval-ml");
    let task_name = labels_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "task".to_owned());
    let mut reports = Vec::new();
    match config.task {
        Task::Classify => {
            let labels = LabeledEntitySet::read_classification(task_name, open(labels_path)?)?;
            let report = knn_classify(embeddings, &labels, config.knn_k, config.folds, seed)?;
            reports.push(("knn".to_owned(), report));
        }
        Task::Regress => {
            let labels = LabeledEntitySet::read_regression(task_name, open(labels_path)?)?;
            let report = knn_regress(embeddings, &labels, config.knn_k, config.folds, seed)?;
            reports.push(("knn".to_owned(), report));
            let report = linear_regression(embeddings, &labels, config.folds, seed, config.l2)?;
            reports.push(("linreg".to_owned(), report));
        }
    }
    Ok(reports)
}

pub fn eval_rec(
    embeddings: &EmbeddingMatrix,
    ratings_path: &Path,
    config: &PipelineConfig,
) -> Result<EvalReport> {
    let ratings = RatingsDataset::read_tsv(open(ratings_path)?)?;
    let rec_config = RecommenderConfig {
        neighborhood: config.neighborhood,
        top_n: config.top_n,
        relevance_threshold: config.relevance_threshold,
        holdout_fraction: config.holdout,
        seed: stage_seed(config.seed, "eval-rec"),
    };
    Ok(evaluate_recommender(&ratings, embeddings, &rec_config)?)
}

/// Writes the machine-readable report and prints the human table.
pub fn write_report(out: &Path, name: &str, report: &EvalReport) -> Result<PathBuf> {
    let path = out.join(name);
    let mut w = create(&path)?;
    report.write_machine(&mut w)?;
    w.flush()?;
    print!("{}", report.render_table());
    Ok(path)
}

/// Echoes the fully resolved configuration next to the outputs.
pub fn write_config_echo(out: &Path, name: &str, config: &PipelineConfig) -> Result<PathBuf> {
    let path = out.join(name);
    fs::write(&path, serde_json::to_string_pretty(config)?)?;
    Ok(path)
}

pub fn ensure_out_dir(config: &PipelineConfig) -> Result<PathBuf> {
    let out = config.out.clone().context("missing output directory")?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok(out)
}
