//! Negative-sampling SGD for SkipGram and CBOW.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbedError, EmbeddingMatrix, Matrix, TrainConfig, TrainMode, Vocabulary};

/// Learning rate floor as a fraction of the initial rate.
const LR_FLOOR: f64 = 1e-4;
/// Bound on redraws when a negative collides with the positive target.
const MAX_NEGATIVE_REDRAWS: usize = 100;

/// Trained embeddings plus the mean per-pair logistic loss of each epoch.
#[derive(Debug)]
pub struct TrainResult {
    pub embeddings: EmbeddingMatrix,
    pub epoch_loss: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow for large |x|.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Binary logistic loss of one (input, output) pair under negative
/// sampling. Returns `(loss, coeff)` with `coeff = label − σ(input·output)`:
/// the gradient of the loss is `−coeff · output` with respect to `input`
/// and `−coeff · input` with respect to `output`.
pub fn log_logistic_loss(input: &[f64], output: &[f64], positive: bool) -> (f64, f64) {
    debug_assert_eq!(input.len(), output.len());
    let score: f64 = input.iter().zip(output).map(|(a, b)| a * b).sum();
    let loss = if positive {
        softplus(-score)
    } else {
        softplus(score)
    };
    let label = if positive { 1.0 } else { 0.0 };
    (loss, label - sigmoid(score))
}

/// Raw view over a parameter matrix shared by training workers.
///
/// Multi-worker training applies unsynchronized read-modify-write updates;
/// lost or interleaved writes are tolerated as stochastic noise and the
/// result is non-deterministic by contract. With a single worker the view
/// is exclusive and the run is fully deterministic.
#[derive(Clone, Copy)]
struct ParamView {
    ptr: *mut f64,
    dim: usize,
}

unsafe impl Send for ParamView {}
unsafe impl Sync for ParamView {}

impl ParamView {
    fn new(matrix: &mut Matrix) -> Self {
        ParamView {
            dim: matrix.dim(),
            ptr: matrix.data_mut().as_mut_ptr(),
        }
    }

    unsafe fn row(&self, i: usize) -> &[f64] {
        std::slice::from_raw_parts(self.ptr.add(i * self.dim), self.dim)
    }

    #[allow(clippy::mut_from_ref)]
    unsafe fn row_mut(&self, i: usize) -> &mut [f64] {
        std::slice::from_raw_parts_mut(self.ptr.add(i * self.dim), self.dim)
    }
}

/// One negative-sampling step: scores `h` against every target, updates the
/// targets' output rows in place, and accumulates the hidden-side update
/// into `h_delta`. Returns the summed pair loss.
///
/// # Safety
/// `output` rows indexed by `targets` must stay in bounds; concurrent
/// access follows the multi-worker contract above.
unsafe fn ns_step(
    output: &ParamView,
    h: &[f64],
    targets: &[(u32, bool)],
    lr: f64,
    h_delta: &mut [f64],
) -> f64 {
    let mut loss = 0.0;
    for &(target, positive) in targets {
        let row = output.row_mut(target as usize);
        let (pair_loss, coeff) = log_logistic_loss(h, row, positive);
        loss += pair_loss;
        let g = lr * coeff;
        for k in 0..h.len() {
            let old = row[k];
            h_delta[k] += g * old;
            row[k] = old + g * h[k];
        }
    }
    loss
}

/// Builds the unigram^0.75 sampling table: `size` slots filled with vocab
/// indices proportionally to `count^0.75`.
fn build_ns_table(vocab: &Vocabulary, size: usize) -> Vec<u32> {
    if vocab.is_empty() || size == 0 {
        return Vec::new();
    }
    let pows: Vec<f64> = vocab
        .counts()
        .iter()
        .map(|&c| (c as f64).powf(0.75))
        .collect();
    let z: f64 = pows.iter().sum();
    if z <= 0.0 {
        return Vec::new();
    }
    let mut table = Vec::with_capacity(size);
    let mut index = 0usize;
    let mut cumulative = pows[0] / z;
    for slot in 0..size {
        table.push(index as u32);
        if (slot + 1) as f64 / size as f64 > cumulative && index + 1 < pows.len() {
            index += 1;
            cumulative += pows[index] / z;
        }
    }
    table
}

fn draw_negative(rng: &mut ChaCha8Rng, table: &[u32], exclude: u32) -> Option<u32> {
    if table.is_empty() {
        return None;
    }
    for _ in 0..MAX_NEGATIVE_REDRAWS {
        let candidate = table[rng.gen_range(0..table.len())];
        if candidate != exclude {
            return Some(candidate);
        }
    }
    None
}

struct ChunkParams<'a> {
    config: &'a TrainConfig,
    ns_table: &'a [u32],
    /// Per-token keep probability for subsampling, when enabled.
    keep_probs: Option<Vec<f64>>,
    total_scheduled: u64,
}

/// Runs all epochs over one slice of the corpus. Returns per-epoch
/// (summed loss, pair count).
///
/// # Safety
/// All token indices in `sentences` must be valid rows of both matrices.
unsafe fn train_chunk(
    sentences: &[Vec<u32>],
    params: &ChunkParams<'_>,
    input: ParamView,
    output: ParamView,
    rng: &mut ChaCha8Rng,
    processed: &AtomicU64,
) -> Vec<(f64, u64)> {
    let config = params.config;
    let dim = config.dimension;
    let lr0 = config.learning_rate;
    let min_lr = lr0 * LR_FLOOR;

    let mut h = vec![0.0; dim];
    let mut h_delta = vec![0.0; dim];
    let mut targets: Vec<(u32, bool)> = Vec::with_capacity(config.negatives + 1);
    let mut kept: Vec<u32> = Vec::new();
    let mut context: Vec<u32> = Vec::new();
    let mut per_epoch = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut pair_count = 0u64;
        for sentence in sentences {
            let done = processed.fetch_add(sentence.len() as u64, Ordering::Relaxed);
            let progress = done as f64 / params.total_scheduled as f64;
            let lr = (lr0 * (1.0 - progress)).max(min_lr);

            let tokens: &[u32] = match &params.keep_probs {
                Some(keep) => {
                    kept.clear();
                    kept.extend(
                        sentence
                            .iter()
                            .filter(|&&t| rng.gen::<f64>() < keep[t as usize])
                            .copied(),
                    );
                    &kept
                }
                None => sentence,
            };

            for t in 0..tokens.len() {
                let span = rng.gen_range(1..=config.window);
                let lo = t.saturating_sub(span);
                let hi = (t + span).min(tokens.len().saturating_sub(1));
                let center = tokens[t];

                match config.mode {
                    TrainMode::SkipGram => {
                        for j in lo..=hi {
                            if j == t {
                                continue;
                            }
                            let ctx = tokens[j];
                            targets.clear();
                            targets.push((ctx, true));
                            for _ in 0..config.negatives {
                                if let Some(neg) = draw_negative(rng, params.ns_table, ctx) {
                                    targets.push((neg, false));
                                }
                            }
                            h_delta.fill(0.0);
                            loss_sum +=
                                ns_step(&output, input.row(center as usize), &targets, lr, &mut h_delta);
                            pair_count += targets.len() as u64;
                            let row = input.row_mut(center as usize);
                            for k in 0..dim {
                                row[k] += h_delta[k];
                            }
                        }
                    }
                    TrainMode::Cbow => {
                        context.clear();
                        context.extend((lo..=hi).filter(|&j| j != t).map(|j| tokens[j]));
                        if context.is_empty() {
                            continue;
                        }
                        let inv_m = 1.0 / context.len() as f64;
                        h.fill(0.0);
                        for &c in &context {
                            let row = input.row(c as usize);
                            for k in 0..dim {
                                h[k] += row[k];
                            }
                        }
                        for v in h.iter_mut() {
                            *v *= inv_m;
                        }
                        targets.clear();
                        targets.push((center, true));
                        for _ in 0..config.negatives {
                            if let Some(neg) = draw_negative(rng, params.ns_table, center) {
                                targets.push((neg, false));
                            }
                        }
                        h_delta.fill(0.0);
                        loss_sum += ns_step(&output, &h, &targets, lr, &mut h_delta);
                        pair_count += targets.len() as u64;
                        // The hidden vector is the context mean, so each
                        // contributing row receives an equal 1/m share.
                        for &c in &context {
                            let row = input.row_mut(c as usize);
                            for k in 0..dim {
                                row[k] += h_delta[k] * inv_m;
                            }
                        }
                    }
                }
            }
        }
        per_epoch.push((loss_sum, pair_count));
    }
    per_epoch
}

fn train<S: AsRef<str>>(
    walks: &[Vec<S>],
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<TrainResult, EmbedError> {
    config.validate()?;
    if vocab.is_empty() {
        return Err(EmbedError::EmptyVocabulary);
    }

    let sentences: Vec<Vec<u32>> = walks
        .iter()
        .map(|w| vocab.encode(w))
        .filter(|s| !s.is_empty())
        .collect();
    let total_tokens: u64 = sentences.iter().map(|s| s.len() as u64).sum();

    let dim = config.dimension;
    let rows = vocab.len();
    let mut input = Matrix::zeros(rows, dim);
    let mut output = Matrix::zeros(rows, dim);

    // Seed streams: 0 initializes, 1.. drive the workers.
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    init_rng.set_stream(0);
    let bound = 0.5 / dim as f64;
    for v in input.data_mut() {
        *v = (init_rng.gen::<f64>() - 0.5) * 2.0 * bound;
    }

    let ns_table = build_ns_table(vocab, config.ns_table_size);
    let keep_probs = config.subsample.map(|threshold| {
        let total = vocab.total_tokens() as f64;
        vocab
            .counts()
            .iter()
            .map(|&c| {
                if c == 0 {
                    return 1.0;
                }
                let ratio = threshold * total / c as f64;
                (ratio.sqrt() + ratio).min(1.0)
            })
            .collect()
    });

    let params = ChunkParams {
        config,
        ns_table: &ns_table,
        keep_probs,
        total_scheduled: (config.epochs as u64 * total_tokens).max(1),
    };
    let processed = AtomicU64::new(0);
    let input_view = ParamView::new(&mut input);
    let output_view = ParamView::new(&mut output);

    let workers = config.workers.max(1);
    let per_epoch: Vec<(f64, u64)> = if workers == 1 || sentences.len() <= 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        // Exclusive views: single-worker mode is race-free and deterministic.
        unsafe {
            train_chunk(
                &sentences,
                &params,
                input_view,
                output_view,
                &mut rng,
                &processed,
            )
        }
    } else {
        let chunk_size = sentences.len().div_ceil(workers);
        let chunks: Vec<&[Vec<u32>]> = sentences.chunks(chunk_size).collect();
        let partials: Vec<Vec<(f64, u64)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .into_iter()
                .enumerate()
                .map(|(w, chunk)| {
                    let params = &params;
                    let processed = &processed;
                    scope.spawn(move || {
                        let mut rng = ChaCha8Rng::seed_from_u64(params.config.seed);
                        rng.set_stream(1 + w as u64);
                        // Shared views: races tolerated per the
                        // multi-worker contract.
                        unsafe {
                            train_chunk(chunk, params, input_view, output_view, &mut rng, processed)
                        }
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let mut combined = vec![(0.0, 0u64); config.epochs];
        for partial in partials {
            for (epoch, (loss, pairs)) in partial.into_iter().enumerate() {
                combined[epoch].0 += loss;
                combined[epoch].1 += pairs;
            }
        }
        combined
    };

    let epoch_loss = per_epoch
        .into_iter()
        .map(|(loss, pairs)| if pairs == 0 { 0.0 } else { loss / pairs as f64 })
        .collect();

    Ok(TrainResult {
        embeddings: EmbeddingMatrix::new(vocab.clone(), input, output),
        epoch_loss,
    })
}

/// Trains SkipGram embeddings: each center token predicts its context
/// tokens, one positive and `negatives` sampled pairs per context.
pub fn train_skipgram<S: AsRef<str>>(
    walks: &[Vec<S>],
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<TrainResult, EmbedError> {
    let config = TrainConfig {
        mode: TrainMode::SkipGram,
        ..config.clone()
    };
    train(walks, vocab, &config)
}

/// Trains CBOW embeddings: the averaged context window predicts the center
/// token, with the gradient shared equally by the contributing rows.
pub fn train_cbow<S: AsRef<str>>(
    walks: &[Vec<S>],
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<TrainResult, EmbedError> {
    let config = TrainConfig {
        mode: TrainMode::Cbow,
        ..config.clone()
    };
    train(walks, vocab, &config)
}
