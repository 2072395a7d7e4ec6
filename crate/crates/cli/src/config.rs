//! Resolved pipeline configuration.
//!
//! Precedence: command-line flags override the optional JSON config file,
//! which overrides built-in defaults. The resolved configuration is written
//! alongside outputs so no result exists under unrecorded parameters.

use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use kgwe_core::{TrainMode, WeightStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classify,
    Regress,
}

/// Every knob of the end-to-end run, with defaults filled in.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    // Inputs and output directory.
    pub graph: Option<PathBuf>,
    pub clickstream: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    pub out: Option<PathBuf>,

    // Weighting.
    pub strategy: WeightStrategy,
    pub entity_prefix: String,
    pub smoothing: f64,
    pub decode_titles: bool,
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,

    // Walks.
    pub depth: usize,
    pub walks_per_vertex: usize,

    // Training.
    pub dim: usize,
    pub mode: TrainMode,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: u64,
    /// Defaults to the mode-specific rate when absent.
    pub learning_rate: Option<f64>,
    pub subsample: Option<f64>,

    // Classification/regression evaluation.
    pub task: Task,
    pub knn_k: usize,
    pub folds: usize,
    pub l2: f64,

    // Recommender evaluation.
    pub neighborhood: usize,
    pub top_n: usize,
    pub relevance_threshold: f64,
    pub holdout: f64,

    // Global.
    pub seed: u64,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            graph: None,
            clickstream: None,
            labels: None,
            ratings: None,
            out: None,
            strategy: WeightStrategy::Uniform,
            entity_prefix: "http://dbpedia.org/resource/".to_owned(),
            smoothing: 1.0,
            decode_titles: false,
            damping: 0.85,
            tolerance: 1e-8,
            max_iterations: 100,
            depth: 4,
            walks_per_vertex: 200,
            dim: 200,
            mode: TrainMode::SkipGram,
            window: 5,
            negatives: 5,
            epochs: 5,
            min_count: 1,
            learning_rate: None,
            subsample: None,
            task: Task::Classify,
            knn_k: 5,
            folds: 10,
            l2: 0.0,
            neighborhood: 5,
            top_n: 10,
            relevance_threshold: 4.0,
            holdout: 0.2,
            seed: 42,
            workers: 1,
        }
    }
}

impl PipelineConfig {
    /// Output file stem in the strategy_mode_walks_dim_depth labelling
    /// scheme, e.g. `clickstream_sg_500w_200v_4d`.
    pub fn stem(&self) -> String {
        format!(
            "{}_{}_{}w_{}v_{}d",
            self.strategy.stem(),
            self.mode,
            self.walks_per_vertex,
            self.dim,
            self.depth
        )
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn fnv1a(s: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in s.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Per-stage seed derived deterministically from the global seed, so any
/// stage can be re-run in isolation with identical results.
pub fn stage_seed(global: u64, stage: &str) -> u64 {
    splitmix64(global ^ fnv1a(stage))
}
