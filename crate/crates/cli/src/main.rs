//! `kgwe`: knowledge-graph walk embeddings.
//!
//! Subcommands cover the individual stages (parse-graph, weights, walk,
//! train, eval-ml, eval-rec) and an end-to-end `pipeline` that chains them
//! and writes a manifest with stage timings and artifact checksums.
//! Logging verbosity comes from the `KGWE_LOG` environment variable.

mod config;
mod manifest;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use kgwe_core::{TrainMode, WeightStrategy};

use config::{PipelineConfig, Task};
use manifest::Manifest;

fn strategy_parser(s: &str) -> Result<WeightStrategy, String> {
    s.parse().map_err(|e: kgwe_core::WeightError| e.to_string())
}

fn mode_parser(s: &str) -> Result<TrainMode, String> {
    s.parse().map_err(|e: kgwe_core::EmbedError| e.to_string())
}

#[derive(Parser)]
#[command(
    name = "kgwe",
    version,
    about = "Entity embeddings from weighted knowledge-graph walks",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an N-Triples graph and write shape stats plus a parse report
    ParseGraph {
        #[command(flatten)]
        graph: GraphFlags,
        #[command(flatten)]
        global: GlobalFlags,
    },
    /// Compute an edge weight table and export it as TSV
    Weights {
        #[command(flatten)]
        graph: GraphFlags,
        #[command(flatten)]
        weights: WeightFlags,
        #[command(flatten)]
        global: GlobalFlags,
    },
    /// Generate a weighted random-walk corpus
    Walk {
        #[command(flatten)]
        graph: GraphFlags,
        #[command(flatten)]
        weights: WeightFlags,
        #[command(flatten)]
        walk: WalkFlags,
        #[command(flatten)]
        global: GlobalFlags,
    },
    /// Train SkipGram/CBOW embeddings over a walk corpus file
    Train {
        /// Walk corpus: one walk per line, space-separated tokens
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        global: GlobalFlags,
    },
    /// Evaluate embeddings with kNN classification or regression
    EvalMl {
        /// Embedding file written by `train`
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[command(flatten)]
        ml: MlFlags,
        #[command(flatten)]
        global: GlobalFlags,
    },
    /// Evaluate embeddings as an item-KNN recommender
    EvalRec {
        /// Embedding file written by `train`
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[command(flatten)]
        rec: RecFlags,
        #[command(flatten)]
        global: GlobalFlags,
    },
    /// Run parse -> weights -> walk -> train -> eval end to end
    Pipeline {
        /// Optional JSON config file; flags override its values
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        graph: GraphFlags,
        #[command(flatten)]
        weights: WeightFlags,
        #[command(flatten)]
        walk: WalkFlags,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        ml: MlFlags,
        #[command(flatten)]
        rec: RecFlags,
        #[command(flatten)]
        global: GlobalFlags,
    },
}

#[derive(Args)]
struct GraphFlags {
    /// N-Triples input, optionally gzip-compressed
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Abort on the first malformed line instead of reporting it
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct WeightFlags {
    /// uniform | pred-freq | pagerank | inv-pagerank | clickstream
    #[arg(long, value_parser = strategy_parser)]
    strategy: Option<WeightStrategy>,
    /// Clickstream TSV (prev curr type n), optionally gzip-compressed
    #[arg(long)]
    clickstream: Option<PathBuf>,
    /// IRI prefix stripped to map entities onto clickstream page titles
    #[arg(long)]
    entity_prefix: Option<String>,
    /// Weight for graph edges absent from the clickstream
    #[arg(long)]
    smoothing: Option<f64>,
    /// Percent-decode page titles before lookup
    #[arg(long)]
    decode_titles: bool,
    /// PageRank damping factor
    #[arg(long)]
    damping: Option<f64>,
    /// PageRank L1 convergence tolerance
    #[arg(long)]
    tolerance: Option<f64>,
    /// PageRank iteration cap
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Args)]
struct WalkFlags {
    /// Token budget per walk (a full walk has depth+1 tokens)
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    walks_per_vertex: Option<usize>,
}

#[derive(Args)]
struct TrainFlags {
    /// Embedding dimension
    #[arg(long)]
    dim: Option<usize>,
    /// sg | cbow
    #[arg(long, value_parser = mode_parser)]
    mode: Option<TrainMode>,
    #[arg(long)]
    window: Option<usize>,
    /// Negative samples per positive pair
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    min_count: Option<u64>,
    /// Initial learning rate (defaults to 0.025 for sg, 0.05 for cbow)
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Frequent-token subsampling threshold (off by default)
    #[arg(long)]
    subsample: Option<f64>,
}

#[derive(Args)]
struct MlFlags {
    /// Labeled entities: entity_iri<TAB>label
    #[arg(long)]
    labels: Option<PathBuf>,
    /// classify | regress
    #[arg(long, value_enum)]
    task: Option<Task>,
    /// Neighbors for the kNN learners
    #[arg(long)]
    knn_k: Option<usize>,
    /// Cross-validation folds
    #[arg(long)]
    folds: Option<usize>,
    /// Ridge term for linear regression
    #[arg(long)]
    l2: Option<f64>,
}

#[derive(Args)]
struct RecFlags {
    /// Ratings: user_id<TAB>item_iri<TAB>rating
    #[arg(long)]
    ratings: Option<PathBuf>,
    /// Rated-item neighborhood per prediction
    #[arg(long)]
    neighborhood: Option<usize>,
    /// Recommendation list length
    #[arg(long)]
    top_n: Option<usize>,
    /// Minimum rating that counts as relevant
    #[arg(long)]
    relevance_threshold: Option<f64>,
    /// Per-user fraction of ratings hidden for evaluation
    #[arg(long)]
    holdout: Option<f64>,
}

#[derive(Args)]
struct GlobalFlags {
    /// Global seed; per-stage seeds derive from it deterministically
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for walk generation and training
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Usage-level failure: mirrors clap's exit status for bad invocations.
fn usage_error(message: &str) -> ! {
    eprintln!("error: {message}\n\nFor more information, try '--help'.");
    std::process::exit(2);
}

fn require<T>(value: Option<T>, flag: &str) -> T {
    match value {
        Some(v) => v,
        None => usage_error(&format!("missing required flag `{flag}`")),
    }
}

impl GraphFlags {
    fn apply(&self, config: &mut PipelineConfig) {
        if let Some(path) = &self.graph {
            config.graph = Some(path.clone());
        }
    }
}

impl WeightFlags {
    fn apply(&self, config: &mut PipelineConfig) {
        if let Some(strategy) = self.strategy {
            config.strategy = strategy;
        }
        if let Some(path) = &self.clickstream {
            config.clickstream = Some(path.clone());
        }
        if let Some(prefix) = &self.entity_prefix {
            config.entity_prefix = prefix.clone();
        }
        if let Some(smoothing) = self.smoothing {
            config.smoothing = smoothing;
        }
        if self.decode_titles {
            config.decode_titles = true;
        }
        if let Some(damping) = self.damping {
            config.damping = damping;
        }
        if let Some(tolerance) = self.tolerance {
            config.tolerance = tolerance;
        }
        if let Some(max_iterations) = self.max_iterations {
            config.max_iterations = max_iterations;
        }
    }
}

impl WalkFlags {
    fn apply(&self, config: &mut PipelineConfig) {
        if let Some(depth) = self.depth {
            config.depth = depth;
        }
        if let Some(n) = self.walks_per_vertex {
            config.walks_per_vertex = n;
        }
    }
}

impl TrainFlags {
    fn apply(&self, config: &mut PipelineConfig) {
        if let Some(dim) = self.dim {
            config.dim = dim;
        }
        if let Some(mode) = self.mode {
            config.mode = mode;
        }
        if let Some(window) = self.window {
            config.window = window;
        }
        if let Some(negatives) = self.negatives {
            config.negatives = negatives;
        }
        if let Some(epochs) = self.epochs {
            config.epochs = epochs;
        }
        if let Some(min_count) = self.min_count {
            config.min_count = min_count;
        }
        if let Some(rate) = self.learning_rate {
            config.learning_rate = Some(rate);
        }
        if let Some(threshold) = self.subsample {
            config.subsample = Some(threshold);
        }
    }
}

impl MlFlags {
    fn apply(&self, config: &mut PipelineConfig) {
        if let Some(labels) = &self.labels {
            config.labels = Some(labels.clone());
        }
        if let Some(task) = self.task {
            config.task = task;
        }
        if let Some(k) = self.knn_k {
            config.knn_k = k;
        }
        if let Some(folds) = self.folds {
            config.folds = folds;
        }
        if let Some(l2) = self.l2 {
            config.l2 = l2;
        }
    }
}

impl RecFlags {
    fn apply(&self, config: &mut PipelineConfig) {
        if let Some(ratings) = &self.ratings {
            config.ratings = Some(ratings.clone());
        }
        if let Some(neighborhood) = self.neighborhood {
            config.neighborhood = neighborhood;
        }
        if let Some(top_n) = self.top_n {
            config.top_n = top_n;
        }
        if let Some(threshold) = self.relevance_threshold {
            config.relevance_threshold = threshold;
        }
        if let Some(holdout) = self.holdout {
            config.holdout = holdout;
        }
    }
}

impl GlobalFlags {
    fn apply(&self, config: &mut PipelineConfig) {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(workers) = self.workers {
            config.workers = workers;
        }
        if let Some(out) = &self.out {
            config.out = Some(out.clone());
        }
    }
}

fn check_clickstream_inputs(config: &PipelineConfig) {
    if config.strategy == WeightStrategy::Clickstream && config.clickstream.is_none() {
        usage_error("--strategy clickstream requires --clickstream <path>");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KGWE_LOG", "info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ParseGraph { graph, global } => {
            let mut config = PipelineConfig::default();
            graph.apply(&mut config);
            global.apply(&mut config);
            let graph_path = require(config.graph.clone(), "--graph");
            let out = stages::ensure_out_dir(&config)?;

            let (kg, report) = stages::load_graph(&graph_path, graph.strict)?;
            let outputs = stages::write_parse_outputs(&out, &kg, &report)?;
            stages::write_config_echo(&out, "parse_graph.config.json", &config)?;
            println!(
                "entities: {}\npredicates: {}\nedges: {}\nmalformed lines: {}",
                kg.entity_count(),
                kg.predicate_count(),
                kg.edge_count(),
                report.errors.len()
            );
            for path in outputs {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Weights {
            graph,
            weights,
            global,
        } => {
            let mut config = PipelineConfig::default();
            graph.apply(&mut config);
            weights.apply(&mut config);
            global.apply(&mut config);
            check_clickstream_inputs(&config);
            let graph_path = require(config.graph.clone(), "--graph");
            let out = stages::ensure_out_dir(&config)?;

            let (kg, _) = stages::load_graph(&graph_path, graph.strict)?;
            let table = stages::build_weights(&kg, &config)?;
            let name = format!("weights_{}.tsv", config.strategy.stem());
            let path = stages::write_weights_tsv(&out, &name, &kg, &table)?;
            stages::write_config_echo(
                &out,
                &format!("weights_{}.config.json", config.strategy.stem()),
                &config,
            )?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Walk {
            graph,
            weights,
            walk,
            global,
        } => {
            let mut config = PipelineConfig::default();
            graph.apply(&mut config);
            weights.apply(&mut config);
            walk.apply(&mut config);
            global.apply(&mut config);
            check_clickstream_inputs(&config);
            let graph_path = require(config.graph.clone(), "--graph");
            let out = stages::ensure_out_dir(&config)?;

            let (kg, _) = stages::load_graph(&graph_path, graph.strict)?;
            let table = stages::build_weights(&kg, &config)?;
            let corpus = stages::generate_corpus(&kg, &table, &config)?;
            let stem = format!(
                "{}_{}w_{}d",
                config.strategy.stem(),
                config.walks_per_vertex,
                config.depth
            );
            let path = stages::write_corpus(&out, &format!("{stem}.walks.txt"), &kg, &corpus)?;
            stages::write_config_echo(&out, &format!("{stem}.config.json"), &config)?;
            println!("wrote {} ({} walks)", path.display(), corpus.len());
            Ok(())
        }
        Command::Train {
            corpus,
            train,
            global,
        } => {
            let mut config = PipelineConfig::default();
            train.apply(&mut config);
            global.apply(&mut config);
            let corpus_path = require(corpus, "--corpus");
            let out = stages::ensure_out_dir(&config)?;

            let sentences = stages::read_corpus_lines(&corpus_path)?;
            let result = stages::train_embeddings(&sentences, &config)?;
            let stem = format!("emb_{}_{}v", config.mode, config.dim);
            let path =
                stages::write_embeddings(&out, &format!("{stem}.txt"), &result.embeddings)?;
            stages::write_config_echo(&out, &format!("{stem}.config.json"), &config)?;
            println!(
                "wrote {} ({} vectors, final epoch loss {:.6})",
                path.display(),
                result.embeddings.len(),
                result.epoch_loss.last().copied().unwrap_or(0.0)
            );
            Ok(())
        }
        Command::EvalMl {
            embeddings,
            ml,
            global,
        } => {
            let mut config = PipelineConfig::default();
            ml.apply(&mut config);
            global.apply(&mut config);
            let embeddings_path = require(embeddings, "--embeddings");
            let labels_path = require(config.labels.clone(), "--labels");
            let out = stages::ensure_out_dir(&config)?;

            let matrix = stages::load_embeddings_file(&embeddings_path)?;
            let reports = stages::eval_ml(&matrix, &labels_path, &config)?;
            for (learner, report) in &reports {
                let path =
                    stages::write_report(&out, &format!("eval_ml_{learner}.tsv"), report)?;
                println!("wrote {}", path.display());
            }
            stages::write_config_echo(&out, "eval_ml.config.json", &config)?;
            Ok(())
        }
        Command::EvalRec {
            embeddings,
            rec,
            global,
        } => {
            let mut config = PipelineConfig::default();
            rec.apply(&mut config);
            global.apply(&mut config);
            let embeddings_path = require(embeddings, "--embeddings");
            let ratings_path = require(config.ratings.clone(), "--ratings");
            let out = stages::ensure_out_dir(&config)?;

            let matrix = stages::load_embeddings_file(&embeddings_path)?;
            let report = stages::eval_rec(&matrix, &ratings_path, &config)?;
            let path = stages::write_report(&out, "eval_rec.tsv", &report)?;
            stages::write_config_echo(&out, "eval_rec.config.json", &config)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Pipeline {
            config: config_path,
            graph,
            weights,
            walk,
            train,
            ml,
            rec,
            global,
        } => {
            let mut config = match &config_path {
                Some(path) => {
                    let text = std::fs::read_to_string(path)?;
                    serde_json::from_str(&text)
                        .map_err(|e| anyhow::anyhow!("config file {}: {e}", path.display()))?
                }
                None => PipelineConfig::default(),
            };
            graph.apply(&mut config);
            weights.apply(&mut config);
            walk.apply(&mut config);
            train.apply(&mut config);
            ml.apply(&mut config);
            rec.apply(&mut config);
            global.apply(&mut config);
            check_clickstream_inputs(&config);
            if config.graph.is_none() {
                usage_error("missing required flag `--graph`");
            }
            if config.out.is_none() {
                usage_error("missing required flag `--out`");
            }
            run_pipeline(&config, graph.strict)
        }
    }
}

fn run_pipeline(config: &PipelineConfig, strict: bool) -> Result<()> {
    let out = stages::ensure_out_dir(config)?;
    let stem = config.stem();
    let graph_path = config.graph.clone().expect("checked by caller");

    let mut manifest = Manifest::new(serde_json::to_value(config)?);
    let config_echo = stages::write_config_echo(&out, &format!("{stem}.config.json"), config)?;
    println!("config: {}", config_echo.display());

    let mut kg = None;
    let mut parse_report = None;
    manifest.stage("parse-graph", || {
        let (graph, report) = stages::load_graph(&graph_path, strict)?;
        let outputs = stages::write_parse_outputs(&out, &graph, &report)?;
        kg = Some(graph);
        parse_report = Some(report);
        Ok(outputs)
    })?;
    let kg = kg.expect("set by stage");

    let mut weights_table = None;
    manifest.stage("weights", || {
        let table = stages::build_weights(&kg, config)?;
        let path =
            stages::write_weights_tsv(&out, &format!("{stem}.weights.tsv"), &kg, &table)?;
        weights_table = Some(table);
        Ok(vec![path])
    })?;
    let weights_table = weights_table.expect("set by stage");

    let mut corpus = None;
    manifest.stage("walk", || {
        let generated = stages::generate_corpus(&kg, &weights_table, config)?;
        let path = stages::write_corpus(&out, &format!("{stem}.walks.txt"), &kg, &generated)?;
        corpus = Some(generated);
        Ok(vec![path])
    })?;
    let corpus = corpus.expect("set by stage");

    let mut embeddings = None;
    manifest.stage("train", || {
        let sentences = corpus.token_strings(&kg);
        let result = stages::train_embeddings(&sentences, config)?;
        let path = stages::write_embeddings(
            &out,
            &format!("{stem}.embeddings.txt"),
            &result.embeddings,
        )?;
        embeddings = Some(result.embeddings);
        Ok(vec![path])
    })?;
    let embeddings = embeddings.expect("set by stage");

    if let Some(labels_path) = &config.labels {
        manifest.stage("eval-ml", || {
            let reports = stages::eval_ml(&embeddings, labels_path, config)?;
            let mut outputs = Vec::new();
            for (learner, report) in &reports {
                outputs.push(stages::write_report(
                    &out,
                    &format!("{stem}.ml_{learner}.tsv"),
                    report,
                )?);
            }
            Ok(outputs)
        })?;
    }

    if let Some(ratings_path) = &config.ratings {
        manifest.stage("eval-rec", || {
            let report = stages::eval_rec(&embeddings, ratings_path, config)?;
            let path = stages::write_report(&out, &format!("{stem}.rec.tsv"), &report)?;
            Ok(vec![path])
        })?;
    }

    let manifest_path = out.join(format!("{stem}.manifest.json"));
    manifest.write(&manifest_path)?;
    println!("manifest: {}", manifest_path.display());
    Ok(())
}
