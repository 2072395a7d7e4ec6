//! Entity classification and regression from embedding features.

use std::collections::BTreeMap;

use crate::embed::EmbeddingMatrix;

use super::{
    cosine_similarity, shuffled_folds, stratified_folds, EvalError, EvalReport, Label,
    LabeledEntitySet, MetricSeries, PredictionRecord,
};

struct UsableEntity<'a> {
    iri: &'a str,
    vector: &'a [f64],
    label: &'a Label,
}

/// Filters labeled entities down to those with an embedding.
fn collect_usable<'a>(
    embeddings: &'a EmbeddingMatrix,
    labels: &'a LabeledEntitySet,
) -> (Vec<UsableEntity<'a>>, usize) {
    let mut usable = Vec::with_capacity(labels.len());
    let mut missing = 0usize;
    for (iri, label) in labels.entries() {
        match embeddings.vector(iri) {
            Some(vector) => usable.push(UsableEntity {
                iri,
                vector,
                label,
            }),
            None => missing += 1,
        }
    }
    (usable, missing)
}

/// Indices of the `k` training entities most cosine-similar to the query,
/// ties broken by ascending training index. Undefined (zero-vector)
/// similarities count as 0 and are tallied.
fn nearest_neighbors(
    query: &[f64],
    train: &[usize],
    usable: &[UsableEntity<'_>],
    k: usize,
    undefined: &mut u64,
) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = train
        .iter()
        .map(|&idx| {
            let sim = match cosine_similarity(query, usable[idx].vector) {
                Some(s) => s,
                None => {
                    *undefined += 1;
                    0.0
                }
            };
            (idx, sim)
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k.min(scored.len()));
    scored
}

/// k-nearest-neighbor classification under stratified cross-validation.
///
/// The prediction is the majority label among the `k` cosine-nearest
/// training entities; ties break by summed similarity, then by label
/// string order. Reports per-fold and mean accuracy.
pub fn knn_classify(
    embeddings: &EmbeddingMatrix,
    labels: &LabeledEntitySet,
    k: usize,
    folds: usize,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    if k < 1 {
        return Err(EvalError::InvalidParameter("k must be >= 1".into()));
    }
    let (usable, missing) = collect_usable(embeddings, labels);

    // Class ids in first-appearance order; names sorted only for tie-breaks.
    let mut class_ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut class_of = Vec::with_capacity(usable.len());
    for entity in &usable {
        let Label::Categorical(name) = entity.label else {
            return Err(EvalError::InvalidParameter(
                "classification needs categorical labels".into(),
            ));
        };
        let next = class_ids.len();
        class_of.push(*class_ids.entry(name).or_insert(next));
    }
    if class_ids.len() < 2 {
        return Err(EvalError::TooFewClasses);
    }

    let assignment = stratified_folds(&class_of, folds, seed)?;
    let mut undefined = 0u64;
    let mut per_fold = Vec::with_capacity(folds);
    let mut predictions = Vec::with_capacity(usable.len());

    for fold in 0..folds {
        let train: Vec<usize> = (0..usable.len()).filter(|i| assignment[*i] != fold).collect();
        let test: Vec<usize> = (0..usable.len()).filter(|i| assignment[*i] == fold).collect();
        let mut correct = 0usize;
        for &t in &test {
            let neighbors = nearest_neighbors(usable[t].vector, &train, &usable, k, &mut undefined);
            // Votes and summed similarity per label, keyed by label string
            // so equal-vote ties resolve to the smallest label.
            let mut votes: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
            for &(idx, sim) in &neighbors {
                let Label::Categorical(name) = usable[idx].label else {
                    unreachable!("validated above");
                };
                let entry = votes.entry(name).or_insert((0, 0.0));
                entry.0 += 1;
                entry.1 += sim;
            }
            let mut best: Option<(&str, usize, f64)> = None;
            for (name, (count, sum)) in votes {
                let better = match best {
                    None => true,
                    Some((_, bc, bs)) => count > bc || (count == bc && sum > bs),
                };
                if better {
                    best = Some((name, count, sum));
                }
            }
            let predicted = best.map(|(name, _, _)| name.to_owned()).unwrap_or_default();
            if Label::Categorical(predicted.clone()) == *usable[t].label {
                correct += 1;
            }
            predictions.push(PredictionRecord {
                entity: usable[t].iri.to_owned(),
                fold,
                predicted: Label::Categorical(predicted),
                actual: usable[t].label.clone(),
            });
        }
        per_fold.push(if test.is_empty() {
            0.0
        } else {
            correct as f64 / test.len() as f64
        });
    }

    Ok(EvalReport {
        task: labels.task.clone(),
        config: vec![
            ("learner".into(), "knn-classify".into()),
            ("k".into(), k.to_string()),
            ("folds".into(), folds.to_string()),
            ("seed".into(), seed.to_string()),
        ],
        metrics: vec![MetricSeries::from_folds("accuracy", per_fold)],
        predictions,
        missing_entities: missing,
        counters: vec![("undefined_similarities".into(), undefined)],
    })
}

fn numeric_targets(usable: &[UsableEntity<'_>]) -> Result<Vec<f64>, EvalError> {
    usable
        .iter()
        .map(|e| match e.label {
            Label::Numeric(v) => Ok(*v),
            Label::Categorical(_) => Err(EvalError::InvalidParameter(
                "regression needs numeric labels".into(),
            )),
        })
        .collect()
}

fn rmse(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

/// k-nearest-neighbor regression: the prediction is the mean target of the
/// `k` cosine-nearest training entities (averaged in ascending training
/// index order). Metric is per-fold RMSE.
pub fn knn_regress(
    embeddings: &EmbeddingMatrix,
    labels: &LabeledEntitySet,
    k: usize,
    folds: usize,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    if k < 1 {
        return Err(EvalError::InvalidParameter("k must be >= 1".into()));
    }
    let (usable, missing) = collect_usable(embeddings, labels);
    let targets = numeric_targets(&usable)?;
    let assignment = shuffled_folds(usable.len(), folds, seed)?;

    let mut undefined = 0u64;
    let mut per_fold = Vec::with_capacity(folds);
    let mut predictions = Vec::with_capacity(usable.len());

    for fold in 0..folds {
        let train: Vec<usize> = (0..usable.len()).filter(|i| assignment[*i] != fold).collect();
        let test: Vec<usize> = (0..usable.len()).filter(|i| assignment[*i] == fold).collect();
        let mut errors = Vec::with_capacity(test.len());
        for &t in &test {
            let mut neighbors =
                nearest_neighbors(usable[t].vector, &train, &usable, k, &mut undefined);
            neighbors.sort_by_key(|&(idx, _)| idx);
            let predicted =
                neighbors.iter().map(|&(idx, _)| targets[idx]).sum::<f64>() / neighbors.len() as f64;
            errors.push(predicted - targets[t]);
            predictions.push(PredictionRecord {
                entity: usable[t].iri.to_owned(),
                fold,
                predicted: Label::Numeric(predicted),
                actual: usable[t].label.clone(),
            });
        }
        per_fold.push(rmse(&errors));
    }

    Ok(EvalReport {
        task: labels.task.clone(),
        config: vec![
            ("learner".into(), "knn-regress".into()),
            ("k".into(), k.to_string()),
            ("folds".into(), folds.to_string()),
            ("seed".into(), seed.to_string()),
        ],
        metrics: vec![MetricSeries::from_folds("rmse", per_fold)],
        predictions,
        missing_entities: missing,
        counters: vec![("undefined_similarities".into(), undefined)],
    })
}

/// Least squares with an optional ridge term on embedding features plus an
/// unpenalized intercept, solved by normal equations with a Cholesky
/// factorization. Returns coefficients with the intercept last.
pub fn fit_ridge(rows: &[&[f64]], targets: &[f64], l2: f64) -> Result<Vec<f64>, EvalError> {
    assert_eq!(rows.len(), targets.len());
    if rows.is_empty() {
        return Err(EvalError::NotEnoughData {
            needed: 1,
            available: 0,
        });
    }
    if l2 < 0.0 {
        return Err(EvalError::InvalidParameter("l2 must be >= 0".into()));
    }
    let d = rows[0].len() + 1; // intercept column appended
    let feature = |row: &[f64], j: usize| if j < row.len() { row[j] } else { 1.0 };

    // A = X'X + l2*I (intercept unpenalized), b = X'y.
    let mut a = vec![0.0f64; d * d];
    let mut b = vec![0.0f64; d];
    for (row, &y) in rows.iter().zip(targets) {
        for i in 0..d {
            let xi = feature(row, i);
            b[i] += xi * y;
            for j in 0..=i {
                a[i * d + j] += xi * feature(row, j);
            }
        }
    }
    for i in 0..d - 1 {
        a[i * d + i] += l2;
    }

    // Lower Cholesky in place.
    let max_diag = (0..d).map(|i| a[i * d + i]).fold(0.0f64, f64::max);
    let pivot_floor = max_diag * 1e-13;
    let mut l = vec![0.0f64; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i * d + j];
            for k in 0..j {
                sum -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(sum > pivot_floor) {
                    return Err(EvalError::SingularSystem);
                }
                l[i * d + i] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }

    // Forward then backward substitution.
    let mut y = vec![0.0f64; d];
    for i in 0..d {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * d + k] * y[k];
        }
        y[i] = sum / l[i * d + i];
    }
    let mut x = vec![0.0f64; d];
    for i in (0..d).rev() {
        let mut sum = y[i];
        for k in i + 1..d {
            sum -= l[k * d + i] * x[k];
        }
        x[i] = sum / l[i * d + i];
    }
    Ok(x)
}

/// Cross-validated linear regression on embedding features. Metric is
/// per-fold RMSE; a singular system with `l2 = 0` is an error advising a
/// positive ridge term.
pub fn linear_regression(
    embeddings: &EmbeddingMatrix,
    labels: &LabeledEntitySet,
    folds: usize,
    seed: u64,
    l2: f64,
) -> Result<EvalReport, EvalError> {
    let (usable, missing) = collect_usable(embeddings, labels);
    let targets = numeric_targets(&usable)?;
    let assignment = shuffled_folds(usable.len(), folds, seed)?;

    let mut per_fold = Vec::with_capacity(folds);
    let mut predictions = Vec::with_capacity(usable.len());
    for fold in 0..folds {
        let train: Vec<usize> = (0..usable.len()).filter(|i| assignment[*i] != fold).collect();
        let test: Vec<usize> = (0..usable.len()).filter(|i| assignment[*i] == fold).collect();
        let rows: Vec<&[f64]> = train.iter().map(|&i| usable[i].vector).collect();
        let y: Vec<f64> = train.iter().map(|&i| targets[i]).collect();
        let coeffs = fit_ridge(&rows, &y, l2)?;

        let mut errors = Vec::with_capacity(test.len());
        for &t in &test {
            let x = usable[t].vector;
            let predicted = x
                .iter()
                .zip(&coeffs)
                .map(|(xi, wi)| xi * wi)
                .sum::<f64>()
                + coeffs[coeffs.len() - 1];
            errors.push(predicted - targets[t]);
            predictions.push(PredictionRecord {
                entity: usable[t].iri.to_owned(),
                fold,
                predicted: Label::Numeric(predicted),
                actual: usable[t].label.clone(),
            });
        }
        per_fold.push(rmse(&errors));
    }

    Ok(EvalReport {
        task: labels.task.clone(),
        config: vec![
            ("learner".into(), "linear-regression".into()),
            ("folds".into(), folds.to_string()),
            ("seed".into(), seed.to_string()),
            ("l2".into(), l2.to_string()),
        ],
        metrics: vec![MetricSeries::from_folds("rmse", per_fold)],
        predictions,
        missing_entities: missing,
        counters: Vec::new(),
    })
}
