//! Item-KNN rating prediction and top-N recommendation.
//!
//! A user's rating of a fresh item is predicted from the ratings of their
//! most cosine-similar rated items: sum of similarity-weighted ratings over
//! the sum of absolute similarities. The absolute value in the denominator
//! is kept exactly as defined, so negative similarities can push
//! predictions outside the neighbors' rating range; that is documented
//! behaviour, not clipped.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embed::EmbeddingMatrix;

use super::{cosine_similarity, EvalError, EvalReport, MetricSeries};

/// (user, item, rating) triples with a per-user index. (user, item) pairs
/// are unique; duplicates are a load error.
#[derive(Debug, Clone, Default)]
pub struct RatingsDataset {
    entries: Vec<(String, String, f64)>,
    by_user: BTreeMap<String, Vec<usize>>,
}

impl RatingsDataset {
    pub fn new(entries: Vec<(String, String, f64)>) -> Result<Self, EvalError> {
        let mut by_user: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut seen: BTreeSet<(&str, &str)> = BTreeSet::new();
        for (idx, (user, item, rating)) in entries.iter().enumerate() {
            if !rating.is_finite() {
                return Err(EvalError::InvalidParameter(format!(
                    "non-finite rating for ({user}, {item})"
                )));
            }
            if !seen.insert((user, item)) {
                return Err(EvalError::InvalidParameter(format!(
                    "duplicate rating for ({user}, {item})"
                )));
            }
            by_user.entry(user.clone()).or_default().push(idx);
        }
        Ok(RatingsDataset { entries, by_user })
    }

    /// Reads `user_id<tab>item_iri<tab>rating` lines.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, EvalError> {
        let mut entries = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx as u64 + 1;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (user, item, rating) = match (
                fields.next(),
                fields.next(),
                fields.next(),
                fields.next(),
            ) {
                (Some(u), Some(i), Some(r), None) => (u, i, r),
                _ => {
                    return Err(EvalError::Format {
                        line: line_no,
                        message: "expected three tab-separated fields".into(),
                    })
                }
            };
            let rating: f64 = rating.parse().map_err(|_| EvalError::Format {
                line: line_no,
                message: format!("bad rating `{rating}`"),
            })?;
            entries.push((user.to_owned(), item.to_owned(), rating));
        }
        RatingsDataset::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Users in sorted order.
    pub fn users(&self) -> impl Iterator<Item = &str> {
        self.by_user.keys().map(String::as_str)
    }

    /// A user's (item, rating) pairs in input order.
    pub fn user_ratings(&self, user: &str) -> Vec<(&str, f64)> {
        self.by_user
            .get(user)
            .map(|indices| {
                indices
                    .iter()
                    .map(|&i| (self.entries[i].1.as_str(), self.entries[i].2))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// All distinct item IRIs in sorted order.
    pub fn items(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.entries.iter().map(|(_, i, _)| i.as_str()).collect();
        set.into_iter().collect()
    }
}

/// Outcome of one rating prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingPrediction {
    pub value: f64,
    /// True when every neighbor similarity was zero and the user's mean
    /// rating was used instead.
    pub mean_fallback: bool,
    /// Zero-norm vectors encountered while scoring (treated as similarity 0).
    pub undefined_similarities: usize,
}

/// Similarity-weighted rating over the `neighborhood` most similar profile
/// items. The profile must be non-empty and every profile item must carry
/// an embedding vector.
fn score_against_profile(
    profile: &[(&str, f64, &[f64])],
    item_vector: &[f64],
    neighborhood: usize,
) -> RatingPrediction {
    let mut undefined = 0usize;
    let mut scored: Vec<(&str, f64, f64)> = profile
        .iter()
        .map(|&(item, rating, vector)| {
            let sim = match cosine_similarity(vector, item_vector) {
                Some(s) => s,
                None => {
                    undefined += 1;
                    0.0
                }
            };
            (item, rating, sim)
        })
        .collect();
    // Most similar first; ties resolve by item IRI for determinism.
    scored.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(b.0)));
    scored.truncate(neighborhood.min(scored.len()));

    let numerator: f64 = scored.iter().map(|(_, r, s)| s * r).sum();
    let denominator: f64 = scored.iter().map(|(_, _, s)| s.abs()).sum();
    if denominator == 0.0 {
        let mean = profile.iter().map(|(_, r, _)| r).sum::<f64>() / profile.len() as f64;
        return RatingPrediction {
            value: mean,
            mean_fallback: true,
            undefined_similarities: undefined,
        };
    }
    RatingPrediction {
        value: numerator / denominator,
        mean_fallback: false,
        undefined_similarities: undefined,
    }
}

/// Predicts `user`'s rating of `item` from their `neighborhood` most
/// similar rated items. Rated items without an embedding are ignored; a
/// user with none is a cold-user error, and a missing item embedding is an
/// error naming the item.
pub fn predict_rating(
    user: &str,
    item: &str,
    ratings: &RatingsDataset,
    embeddings: &EmbeddingMatrix,
    neighborhood: usize,
) -> Result<RatingPrediction, EvalError> {
    if neighborhood < 1 {
        return Err(EvalError::InvalidParameter(
            "neighborhood must be >= 1".into(),
        ));
    }
    let item_vector = embeddings
        .vector(item)
        .ok_or_else(|| EvalError::MissingEmbedding(item.to_owned()))?;
    let profile: Vec<(&str, f64, &[f64])> = ratings
        .user_ratings(user)
        .into_iter()
        .filter_map(|(rated, rating)| {
            embeddings.vector(rated).map(|vector| (rated, rating, vector))
        })
        .collect();
    if profile.is_empty() {
        return Err(EvalError::ColdUser(user.to_owned()));
    }
    Ok(score_against_profile(&profile, item_vector, neighborhood))
}

/// Top-N recommendation protocol parameters. The defaults are the declared
/// assumptions for a 1-5 rating scale: neighborhood 5, top 10, relevance at
/// 4.0, 20% per-user holdout.
#[derive(Debug, Clone)]
pub struct RecommenderConfig {
    pub neighborhood: usize,
    pub top_n: usize,
    pub relevance_threshold: f64,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for RecommenderConfig {
    fn default() -> Self {
        RecommenderConfig {
            neighborhood: 5,
            top_n: 10,
            relevance_threshold: 4.0,
            holdout_fraction: 0.2,
            seed: 1,
        }
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in s.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Per-user holdout evaluation of top-N recommendation.
///
/// For each user a seeded fraction of their rated items is hidden; every
/// item not in the visible profile is scored and the `top_n` highest form
/// the recommendation list. Precision/recall/F1 are computed against the
/// hidden items rated at or above the relevance threshold and
/// macro-averaged over users with a nonempty relevant set. Each included
/// user is one fold of the report.
pub fn evaluate_recommender(
    ratings: &RatingsDataset,
    embeddings: &EmbeddingMatrix,
    config: &RecommenderConfig,
) -> Result<EvalReport, EvalError> {
    if config.neighborhood < 1 || config.top_n < 1 {
        return Err(EvalError::InvalidParameter(
            "neighborhood and top_n must be >= 1".into(),
        ));
    }
    if !(0.0..1.0).contains(&config.holdout_fraction) {
        return Err(EvalError::InvalidParameter(
            "holdout_fraction must be in [0, 1)".into(),
        ));
    }

    let all_items = ratings.items();
    let usable_items: Vec<&str> = all_items
        .iter()
        .copied()
        .filter(|item| embeddings.vector(item).is_some())
        .collect();
    let missing_items = all_items.len() - usable_items.len();

    let mut excluded_users = 0u64;
    let mut mean_fallbacks = 0u64;
    let mut undefined = 0u64;
    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    let mut f1s = Vec::new();
    let mut included_users = Vec::new();

    for user in ratings.users() {
        // Rated items with embeddings, sorted for a stable shuffle input.
        let mut rated: Vec<(&str, f64)> = ratings
            .user_ratings(user)
            .into_iter()
            .filter(|(item, _)| embeddings.vector(item).is_some())
            .collect();
        rated.sort_by(|a, b| a.0.cmp(b.0));

        let hide = (rated.len() as f64 * config.holdout_fraction).round() as usize;
        if hide == 0 || hide >= rated.len() {
            excluded_users += 1;
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(fnv1a(user));
        rated.shuffle(&mut rng);
        let (hidden, visible) = rated.split_at(hide);

        let relevant: BTreeSet<&str> = hidden
            .iter()
            .filter(|(_, rating)| *rating >= config.relevance_threshold)
            .map(|(item, _)| *item)
            .collect();
        if relevant.is_empty() {
            excluded_users += 1;
            continue;
        }

        let profile: Vec<(&str, f64, &[f64])> = visible
            .iter()
            .map(|&(item, rating)| (item, rating, embeddings.vector(item).unwrap()))
            .collect();
        let visible_set: BTreeSet<&str> = visible.iter().map(|(item, _)| *item).collect();

        // Hidden-or-unrated candidates, scored against the visible profile.
        let mut scored: Vec<(&str, f64)> = usable_items
            .iter()
            .copied()
            .filter(|item| !visible_set.contains(item))
            .map(|item| {
                let prediction = score_against_profile(
                    &profile,
                    embeddings.vector(item).unwrap(),
                    config.neighborhood,
                );
                if prediction.mean_fallback {
                    mean_fallbacks += 1;
                }
                undefined += prediction.undefined_similarities as u64;
                (item, prediction.value)
            })
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(b.0)));
        scored.truncate(config.top_n);

        let hits = scored
            .iter()
            .filter(|(item, _)| relevant.contains(item))
            .count();
        let precision = hits as f64 / scored.len() as f64;
        let recall = hits as f64 / relevant.len() as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        precisions.push(precision);
        recalls.push(recall);
        f1s.push(f1);
        included_users.push(user.to_owned());
    }

    if included_users.is_empty() {
        return Err(EvalError::NotEnoughData {
            needed: 1,
            available: 0,
        });
    }

    Ok(EvalReport {
        task: "recommendation".into(),
        config: vec![
            ("neighborhood".into(), config.neighborhood.to_string()),
            ("top_n".into(), config.top_n.to_string()),
            (
                "relevance_threshold".into(),
                config.relevance_threshold.to_string(),
            ),
            (
                "holdout_fraction".into(),
                config.holdout_fraction.to_string(),
            ),
            ("seed".into(), config.seed.to_string()),
            ("users_included".into(), included_users.len().to_string()),
        ],
        metrics: vec![
            MetricSeries::from_folds("precision", precisions),
            MetricSeries::from_folds("recall", recalls),
            MetricSeries::from_folds("f1", f1s),
        ],
        predictions: Vec::new(),
        missing_entities: missing_items,
        counters: vec![
            ("excluded_users".into(), excluded_users),
            ("mean_fallbacks".into(), mean_fallbacks),
            ("undefined_similarities".into(), undefined),
        ],
    })
}
