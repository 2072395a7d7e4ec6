//! SkipGram and CBOW embedding training with negative sampling.
//!
//! Walk corpora are plain token sequences; entities and predicates are both
//! tokens and both receive vectors (the evaluator only ever looks entities
//! up). Training follows the canonical word2vec recipe: per-position window
//! size sampled uniformly from `1..=window`, negatives drawn from a
//! unigram^0.75 table, learning rate decaying linearly to 1e-4 of its
//! initial value over all scheduled updates.

mod train;

pub use train::{log_logistic_loss, train_cbow, train_skipgram, TrainResult};

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Token vocabulary with dense indices ordered by descending corpus
/// frequency, ties broken by token string.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    min_count: u64,
}

impl Vocabulary {
    fn from_parts(tokens: Vec<String>, counts: Vec<u64>, min_count: u64) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            tokens,
            counts,
            index,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: u32) -> &str {
        &self.tokens[index as usize]
    }

    pub fn count(&self, index: u32) -> u64 {
        self.counts[index as usize]
    }

    pub(crate) fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Sum of retained token occurrences.
    pub fn total_tokens(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Maps a token sequence to vocabulary indices, dropping
    /// out-of-vocabulary tokens.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens
            .iter()
            .filter_map(|t| self.index_of(t.as_ref()))
            .collect()
    }
}

/// Counts every token occurrence in the walks and keeps tokens whose
/// frequency reaches `min_count`. An empty corpus yields an empty
/// vocabulary, which is valid for building but not for training.
pub fn build_vocab<S: AsRef<str>>(walks: &[Vec<S>], min_count: u64) -> Vocabulary {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for walk in walks {
        for token in walk {
            *counts.entry(token.as_ref()).or_insert(0) += 1;
        }
    }
    let mut retained: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .collect();
    retained.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let tokens = retained.iter().map(|(t, _)| (*t).to_owned()).collect();
    let freq = retained.iter().map(|&(_, c)| c).collect();
    Vocabulary::from_parts(tokens, freq, min_count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainMode {
    /// The center token predicts each context token.
    #[serde(rename = "sg")]
    SkipGram,
    /// The averaged context window predicts the center token.
    #[serde(rename = "cbow")]
    Cbow,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::SkipGram => "sg",
            TrainMode::Cbow => "cbow",
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrainMode {
    type Err = EmbedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sg" | "skipgram" => Ok(TrainMode::SkipGram),
            "cbow" => Ok(TrainMode::Cbow),
            other => Err(EmbedError::InvalidConfig(format!(
                "unknown training mode `{other}`"
            ))),
        }
    }
}

/// Training hyperparameters. [`TrainConfig::new`] fills in the usual
/// word2vec defaults, with the learning rate depending on the mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dimension: usize,
    pub window: usize,
    /// Negative samples per positive pair.
    pub negatives: usize,
    pub epochs: usize,
    /// Initial learning rate; decays linearly to 1e-4 of this value.
    pub learning_rate: f64,
    pub min_count: u64,
    pub mode: TrainMode,
    pub seed: u64,
    pub workers: usize,
    /// Frequent-token subsampling threshold; off by default since walk
    /// corpora have engineered frequencies.
    pub subsample: Option<f64>,
    /// Entries in the unigram^0.75 negative-sampling table.
    pub ns_table_size: usize,
}

impl TrainConfig {
    pub fn new(mode: TrainMode) -> Self {
        TrainConfig {
            dimension: 200,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: match mode {
                TrainMode::SkipGram => 0.025,
                TrainMode::Cbow => 0.05,
            },
            min_count: 1,
            mode,
            seed: 1,
            workers: 1,
            subsample: None,
            ns_table_size: 10_000_000,
        }
    }

    pub(crate) fn validate(&self) -> Result<(), EmbedError> {
        if self.dimension < 1 {
            return Err(EmbedError::InvalidConfig("dimension must be >= 1".into()));
        }
        if self.window < 1 {
            return Err(EmbedError::InvalidConfig("window must be >= 1".into()));
        }
        if self.negatives < 1 {
            return Err(EmbedError::InvalidConfig("negatives must be >= 1".into()));
        }
        if self.epochs < 1 {
            return Err(EmbedError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(EmbedError::InvalidConfig(
                "learning rate must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Dense row-major matrix of training parameters.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Matrix {
    data: Vec<f64>,
    dim: usize,
}

impl Matrix {
    pub(crate) fn zeros(rows: usize, dim: usize) -> Self {
        Matrix {
            data: vec![0.0; rows * dim],
            dim,
        }
    }

    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let dim = self.dim;
        &mut self.data[i * dim..(i + 1) * dim]
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub(crate) fn dim(&self) -> usize {
        self.dim
    }
}

/// Trained embeddings: the input matrix holds the published vectors, the
/// output matrix is training-internal and not persisted.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    vocab: Vocabulary,
    input: Matrix,
    output: Matrix,
}

impl EmbeddingMatrix {
    pub(crate) fn new(vocab: Vocabulary, input: Matrix, output: Matrix) -> Self {
        EmbeddingMatrix {
            vocab,
            input,
            output,
        }
    }

    /// Builds a matrix from externally supplied vectors, one per token.
    /// Token frequencies are unknown (zero) and the output matrix is empty.
    pub fn from_vectors(tokens: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self, EmbedError> {
        if tokens.len() != vectors.len() {
            return Err(EmbedError::InvalidConfig(format!(
                "{} tokens but {} vectors",
                tokens.len(),
                vectors.len()
            )));
        }
        let dim = vectors.first().map_or(0, Vec::len);
        let mut input = Matrix::zeros(tokens.len(), dim);
        for (i, vector) in vectors.iter().enumerate() {
            if vector.len() != dim {
                return Err(EmbedError::InvalidConfig(format!(
                    "vector {i} has dimension {}, expected {dim}",
                    vector.len()
                )));
            }
            input.row_mut(i).copy_from_slice(vector);
        }
        let counts = vec![0; tokens.len()];
        let output = Matrix::zeros(tokens.len(), dim);
        Ok(EmbeddingMatrix::new(
            Vocabulary::from_parts(tokens, counts, 0),
            input,
            output,
        ))
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dimension(&self) -> usize {
        self.input.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    /// Published vector of a token, if the token is in the vocabulary.
    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.vocab
            .index_of(token)
            .map(|i| self.input.row(i as usize))
    }

    pub fn row(&self, index: u32) -> &[f64] {
        self.input.row(index as usize)
    }

    pub fn is_finite(&self) -> bool {
        self.input.data.iter().all(|v| v.is_finite())
            && self.output.data.iter().all(|v| v.is_finite())
    }
}

/// Writes the text format: a `<vocab_size> <dimension>` header, then one
/// line per token with its vector. Floats are printed in Rust's shortest
/// round-trip form, so reloading reproduces them exactly.
pub fn save_embeddings<W: Write>(matrix: &EmbeddingMatrix, mut w: W) -> io::Result<()> {
    writeln!(w, "{} {}", matrix.len(), matrix.dimension())?;
    let mut line = String::new();
    for i in 0..matrix.len() as u32 {
        line.clear();
        line.push_str(matrix.vocab.token(i));
        for v in matrix.row(i) {
            line.push(' ');
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Loads embeddings written by [`save_embeddings`]. Only the published
/// input vectors are stored in the format; the output matrix loads as
/// zeros and token frequencies are unknown.
pub fn load_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingMatrix, EmbedError> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.ok_or(EmbedError::Format {
        line: 1,
        message: "missing header".into(),
    })?;
    let mut parts = header.split_whitespace();
    let (rows, dim) = match (parts.next(), parts.next(), parts.next()) {
        (Some(r), Some(d), None) => (
            r.parse::<usize>().map_err(|_| EmbedError::Format {
                line: 1,
                message: format!("bad vocab size `{r}`"),
            })?,
            d.parse::<usize>().map_err(|_| EmbedError::Format {
                line: 1,
                message: format!("bad dimension `{d}`"),
            })?,
        ),
        _ => {
            return Err(EmbedError::Format {
                line: 1,
                message: "header must be `<vocab_size> <dimension>`".into(),
            })
        }
    };

    let mut tokens = Vec::with_capacity(rows);
    let mut input = Matrix::zeros(rows, dim);
    let mut row_idx = 0usize;
    for (idx, line) in lines.enumerate() {
        let line_no = idx as u64 + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if row_idx >= rows {
            return Err(EmbedError::Format {
                line: line_no,
                message: format!("more rows than the declared {rows}"),
            });
        }
        let mut fields = line.split(' ');
        let token = fields.next().expect("split yields at least one field");
        let row = input.row_mut(row_idx);
        let mut filled = 0usize;
        for field in fields {
            if filled >= dim {
                filled += 1;
                break;
            }
            row[filled] = field.parse::<f64>().map_err(|_| EmbedError::Format {
                line: line_no,
                message: format!("bad float `{field}`"),
            })?;
            filled += 1;
        }
        if filled != dim {
            return Err(EmbedError::Format {
                line: line_no,
                message: format!(
                    "row `{token}` has {filled} values, header declares dimension {dim}"
                ),
            });
        }
        tokens.push(token.to_owned());
        row_idx += 1;
    }
    if row_idx != rows {
        return Err(EmbedError::Format {
            line: row_idx as u64 + 1,
            message: format!("header declares {rows} rows, found {row_idx}"),
        });
    }

    let counts = vec![0; tokens.len()];
    let vocab = Vocabulary::from_parts(tokens, counts, 0);
    let output = Matrix::zeros(rows, dim);
    Ok(EmbeddingMatrix::new(vocab, input, output))
}
