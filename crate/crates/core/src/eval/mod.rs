//! Embedding evaluation: kNN classification/regression, ridge regression,
//! and an item-KNN recommender over cosine similarity.
//!
//! All evaluators are read-only over the embeddings and deterministic given
//! (embeddings, data, seed). Entities without an embedding are excluded and
//! counted, never imputed.

mod ml;
mod recommend;

pub use ml::{fit_ridge, knn_classify, knn_regress, linear_regression};
pub use recommend::{
    evaluate_recommender, predict_rating, RatingPrediction, RatingsDataset, RecommenderConfig,
};

use std::fmt;
use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("classification needs at least 2 distinct classes")]
    TooFewClasses,
    #[error("not enough usable entities: have {available}, need {needed}")]
    NotEnoughData { needed: usize, available: usize },
    #[error("normal equations are singular; retry with a positive l2 ridge term")]
    SingularSystem,
    #[error("user `{0}` has no rated item with an embedding")]
    ColdUser(String),
    #[error("no embedding for `{0}`")]
    MissingEmbedding(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Cosine similarity clamped to [-1, 1]. `None` when either vector has zero
/// norm; callers treat that as similarity 0 and report the occurrence.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "dimension mismatch");
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// A target value attached to an entity.
#[derive(Debug, Clone, PartialEq)]
pub enum Label {
    Categorical(String),
    Numeric(f64),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Categorical(s) => f.write_str(s),
            Label::Numeric(v) => write!(f, "{v}"),
        }
    }
}

/// Entities with labels for one classification or regression task.
#[derive(Debug, Clone)]
pub struct LabeledEntitySet {
    pub task: String,
    entries: Vec<(String, Label)>,
}

impl LabeledEntitySet {
    pub fn new(task: impl Into<String>, entries: Vec<(String, Label)>) -> Self {
        LabeledEntitySet {
            task: task.into(),
            entries,
        }
    }

    pub fn entries(&self) -> &[(String, Label)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads `entity_iri<tab>label` lines with categorical labels.
    pub fn read_classification<R: BufRead>(
        task: impl Into<String>,
        reader: R,
    ) -> Result<Self, EvalError> {
        let mut entries = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (iri, label) = split_tsv2(&line, idx as u64 + 1)?;
            entries.push((iri.to_owned(), Label::Categorical(label.to_owned())));
        }
        Ok(LabeledEntitySet::new(task, entries))
    }

    /// Reads `entity_iri<tab>value` lines with real-valued targets.
    pub fn read_regression<R: BufRead>(
        task: impl Into<String>,
        reader: R,
    ) -> Result<Self, EvalError> {
        let mut entries = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx as u64 + 1;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (iri, label) = split_tsv2(&line, line_no)?;
            let value: f64 = label.parse().map_err(|_| EvalError::Format {
                line: line_no,
                message: format!("bad numeric label `{label}`"),
            })?;
            if !value.is_finite() {
                return Err(EvalError::Format {
                    line: line_no,
                    message: format!("non-finite label `{label}`"),
                });
            }
            entries.push((iri.to_owned(), Label::Numeric(value)));
        }
        Ok(LabeledEntitySet::new(task, entries))
    }
}

fn split_tsv2(line: &str, line_no: u64) -> Result<(&str, &str), EvalError> {
    let mut fields = line.split('\t');
    match (fields.next(), fields.next(), fields.next()) {
        (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => Ok((a, b)),
        _ => Err(EvalError::Format {
            line: line_no,
            message: "expected two tab-separated fields".into(),
        }),
    }
}

/// One metric across folds. The aggregate is always the mean of the folds.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub name: String,
    pub per_fold: Vec<f64>,
    pub aggregate: f64,
}

impl MetricSeries {
    pub fn from_folds(name: impl Into<String>, per_fold: Vec<f64>) -> Self {
        let aggregate = if per_fold.is_empty() {
            f64::NAN
        } else {
            per_fold.iter().sum::<f64>() / per_fold.len() as f64
        };
        MetricSeries {
            name: name.into(),
            per_fold,
            aggregate,
        }
    }
}

/// Per-entity prediction, kept so results can be audited against the raw
/// data (and against independent reimplementations).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub entity: String,
    pub fold: usize,
    pub predicted: Label,
    pub actual: Label,
}

/// Evaluation outcome: metrics per fold and aggregated, the configuration
/// that produced them, and exclusion counters.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub task: String,
    pub config: Vec<(String, String)>,
    pub metrics: Vec<MetricSeries>,
    pub predictions: Vec<PredictionRecord>,
    /// Labeled entities (or rated items) without an embedding.
    pub missing_entities: usize,
    /// Named exclusion/fallback counters, e.g. excluded users.
    pub counters: Vec<(String, u64)>,
}

impl EvalReport {
    /// Writes `metric<tab>fold<tab>value` lines; the aggregate row uses
    /// `mean` as the fold column, counters use `-`.
    pub fn write_machine<W: Write>(&self, mut w: W) -> io::Result<()> {
        for metric in &self.metrics {
            for (fold, value) in metric.per_fold.iter().enumerate() {
                writeln!(w, "{}\t{}\t{}", metric.name, fold, value)?;
            }
            writeln!(w, "{}\tmean\t{}", metric.name, metric.aggregate)?;
        }
        writeln!(w, "missing_entities\t-\t{}", self.missing_entities)?;
        for (name, value) in &self.counters {
            writeln!(w, "{name}\t-\t{value}")?;
        }
        Ok(())
    }

    /// Human-readable summary table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("task: {}\n", self.task));
        for (key, value) in &self.config {
            out.push_str(&format!("  {key} = {value}\n"));
        }
        out.push_str(&format!(
            "{:<12} {:>8} {:>12}\n",
            "metric", "folds", "mean"
        ));
        for metric in &self.metrics {
            out.push_str(&format!(
                "{:<12} {:>8} {:>12.6}\n",
                metric.name,
                metric.per_fold.len(),
                metric.aggregate
            ));
        }
        out.push_str(&format!("missing entities: {}\n", self.missing_entities));
        for (name, value) in &self.counters {
            out.push_str(&format!("{name}: {value}\n"));
        }
        out
    }
}

/// Assigns each item to a fold after a seeded shuffle: `folds` must be at
/// least 2 and at most the item count.
pub(crate) fn shuffled_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    validate_folds(n, folds)?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignment = vec![0usize; n];
    for (position, &item) in order.iter().enumerate() {
        assignment[item] = position % folds;
    }
    Ok(assignment)
}

/// Stratified fold assignment: shuffles within each class, then deals
/// members across folds with a shared cursor so fold sizes stay balanced.
pub(crate) fn stratified_folds(
    class_of: &[usize],
    folds: usize,
    seed: u64,
) -> Result<Vec<usize>, EvalError> {
    validate_folds(class_of.len(), folds)?;
    let class_count = class_of.iter().copied().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (item, &class) in class_of.iter().enumerate() {
        groups[class].push(item);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; class_of.len()];
    let mut cursor = 0usize;
    for group in &mut groups {
        group.shuffle(&mut rng);
        for &item in group.iter() {
            assignment[item] = cursor % folds;
            cursor += 1;
        }
    }
    Ok(assignment)
}

fn validate_folds(n: usize, folds: usize) -> Result<(), EvalError> {
    if folds < 2 {
        return Err(EvalError::InvalidParameter("folds must be >= 2".into()));
    }
    if n < folds {
        return Err(EvalError::NotEnoughData {
            needed: folds,
            available: n,
        });
    }
    Ok(())
}
