//! Acceptance suite: one test per pipeline-level correctness criterion,
//! each printing a `ACCEPTANCE <n> PASS` line (visible with
//! `cargo test --test acceptance -- --nocapture`).

use std::io::Cursor;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use kgwe_core::{
    build_vocab, clickstream_weights, evaluate_recommender, generate_walks, knn_classify,
    knn_regress, pagerank, parse_clickstream, parse_ntriples, predict_rating, save_embeddings,
    train_cbow, train_skipgram, uniform_weights, ClickstreamOptions, CumulativeSampler,
    EmbeddingMatrix, KnowledgeGraph, Label, LabeledEntitySet, ParseOptions, RatingsDataset,
    RecommenderConfig, Token, TrainConfig, TrainMode, WalkConfig,
};

fn parse(text: &str) -> KnowledgeGraph {
    parse_ntriples(Cursor::new(text.as_bytes().to_vec()), &ParseOptions::default())
        .unwrap()
        .0
}

fn pass(number: usize, description: &str, started: Instant) {
    println!(
        "ACCEPTANCE {number:2} PASS: {description} ({:.2?})",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------
// 1. Weighted edge selection: empirical frequencies and goodness of fit.
// ---------------------------------------------------------------------

#[test]
fn acceptance_01_sampler_frequencies_and_chi_square() {
    let started = Instant::now();

    // Fixture: sources with out-degrees 2..5 under assorted positive
    // weights, including the canonical {1, 3} vertex.
    let mut triples = String::new();
    let mut clicks = String::new();
    let weight_rows: &[&[u64]] = &[
        &[1, 3],
        &[2, 1, 1],
        &[5, 1, 2, 2],
        &[1, 1, 1, 1, 1],
        &[10, 1],
        &[3, 4, 5],
    ];
    for (s, row) in weight_rows.iter().enumerate() {
        for (t, &count) in row.iter().enumerate() {
            triples.push_str(&format!(
                "<http://ex/s{s}> <http://ex/p> <http://ex/s{s}t{t}> .\n"
            ));
            clicks.push_str(&format!("s{s}\ts{s}t{t}\tlink\t{count}\n"));
        }
    }
    let graph = parse(&triples);
    let (table, _) = parse_clickstream(Cursor::new(clicks.into_bytes())).unwrap();
    let options = ClickstreamOptions {
        entity_prefix: "http://ex/".to_owned(),
        smoothing: 0.0,
        decode_titles: false,
    };
    let (weights, _) = clickstream_weights(&graph, &table, &options).unwrap();
    let sampler = CumulativeSampler::build(&graph, &weights).unwrap();

    // {1, 3} vertex: 100000 seeded draws within ±0.01 of {0.25, 0.75}.
    let v0 = graph.resolve("http://ex/s0").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(271828);
    let draws = 100_000usize;
    let mut hits = [0u64; 2];
    for _ in 0..draws {
        hits[sampler.select_edge(v0, rng.gen::<f64>()).unwrap()] += 1;
    }
    let f0 = hits[0] as f64 / draws as f64;
    let f1 = hits[1] as f64 / draws as f64;
    assert!((f0 - 0.25).abs() < 0.01, "frequency {f0} vs 0.25");
    assert!((f1 - 0.75).abs() < 0.01, "frequency {f1} vs 0.75");

    // Pooled chi-square goodness of fit across every fixture vertex.
    let mut statistic = 0.0f64;
    let mut degrees = 0usize;
    for (s, row) in weight_rows.iter().enumerate() {
        let v = graph.resolve(&format!("http://ex/s{s}")).unwrap();
        let probs = weights.probabilities(v).unwrap();
        let per_vertex = 20_000usize;
        let mut observed = vec![0u64; row.len()];
        for _ in 0..per_vertex {
            observed[sampler.select_edge(v, rng.gen::<f64>()).unwrap()] += 1;
        }
        for (k, &o) in observed.iter().enumerate() {
            let expected = probs[k] * per_vertex as f64;
            statistic += (o as f64 - expected).powi(2) / expected;
        }
        degrees += row.len() - 1;
    }
    let critical = ChiSquared::new(degrees as f64).unwrap().inverse_cdf(0.999);
    assert!(
        statistic < critical,
        "chi-square {statistic:.3} >= critical {critical:.3} at {degrees} df"
    );

    assert!(started.elapsed() < Duration::from_secs(5), "over budget");
    pass(1, "edge sampler matches its transition probabilities", started);
}

// ---------------------------------------------------------------------
// 2. Walk shape: alternation, budget, and the deterministic chain trace.
// ---------------------------------------------------------------------

#[test]
fn acceptance_02_walk_shape_invariants() {
    let started = Instant::now();

    let check_corpus = |graph: &KnowledgeGraph, depth: usize, n: usize, seed: u64| {
        let weights = uniform_weights(graph);
        let config = WalkConfig::new(depth, n, seed).unwrap();
        let corpus = generate_walks(graph, &weights, &config).unwrap();
        assert_eq!(corpus.len(), graph.entity_count() * n);
        for walk in corpus.walks() {
            assert!(walk.len() <= 1 + depth);
            for (i, token) in walk.iter().enumerate() {
                match token {
                    Token::Entity(_) => assert_eq!(i % 2, 0, "entity off-position"),
                    Token::Predicate(_) => assert_eq!(i % 2, 1, "predicate off-position"),
                }
            }
        }
        corpus
    };

    // Mixed fixture with sinks and branching.
    let mixed = parse(
        "<http://ex/a> <http://ex/p> <http://ex/b> .\n\
         <http://ex/a> <http://ex/q> <http://ex/c> .\n\
         <http://ex/b> <http://ex/p> <http://ex/sink> .\n\
         <http://ex/c> <http://ex/p> <http://ex/a> .\n",
    );
    for depth in [1, 2, 4, 7] {
        check_corpus(&mixed, depth, 10, 5);
    }

    // Chain (cycle) graph: out-degree 1 everywhere, so a depth-4 walk is
    // exactly v0 p v1 p v2: five tokens.
    let chain = parse(
        "<http://ex/v0> <http://ex/p> <http://ex/v1> .\n\
         <http://ex/v1> <http://ex/p> <http://ex/v2> .\n\
         <http://ex/v2> <http://ex/p> <http://ex/v3> .\n\
         <http://ex/v3> <http://ex/p> <http://ex/v0> .\n",
    );
    let corpus = check_corpus(&chain, 4, 5, 9);
    for walk in corpus.walks() {
        assert_eq!(walk.len(), 5, "chain walk must use its full budget");
    }

    pass(2, "walks alternate, respect the budget, and trace chains", started);
}

// ---------------------------------------------------------------------
// 3. Uniform weights and an empty smoothed clickstream walk identically.
// ---------------------------------------------------------------------

#[test]
fn acceptance_03_uniform_equivalence() {
    let started = Instant::now();

    let mut triples = String::new();
    for i in 0..30u32 {
        triples.push_str(&format!(
            "<http://ex/n{}> <http://ex/p> <http://ex/n{}> .\n",
            i,
            (i * 7 + 3) % 30
        ));
        triples.push_str(&format!(
            "<http://ex/n{}> <http://ex/q> <http://ex/n{}> .\n",
            i,
            (i * 11 + 5) % 30
        ));
    }
    let graph = parse(&triples);

    let uniform = uniform_weights(&graph);
    let (smoothed, coverage) = clickstream_weights(
        &graph,
        &kgwe_core::ClickstreamTable::default(),
        &ClickstreamOptions {
            entity_prefix: "http://ex/".to_owned(),
            smoothing: 1.0,
            decode_titles: false,
        },
    )
    .unwrap();
    assert_eq!(coverage.matched_edges, 0);

    let config = WalkConfig::new(4, 50, 20_240_101).unwrap();
    let mut bytes_uniform = Vec::new();
    let mut bytes_smoothed = Vec::new();
    generate_walks(&graph, &uniform, &config)
        .unwrap()
        .write(&graph, &mut bytes_uniform)
        .unwrap();
    generate_walks(&graph, &smoothed, &config)
        .unwrap()
        .write(&graph, &mut bytes_smoothed)
        .unwrap();
    assert!(!bytes_uniform.is_empty());
    assert_eq!(bytes_uniform, bytes_smoothed);

    pass(3, "empty clickstream with smoothing reproduces uniform walks", started);
}

// ---------------------------------------------------------------------
// 4. PageRank against a dense power-iteration oracle.
// ---------------------------------------------------------------------

#[test]
fn acceptance_04_pagerank_oracle() {
    let started = Instant::now();

    let six = parse(
        "<http://ex/a> <http://ex/p> <http://ex/b> .\n\
         <http://ex/a> <http://ex/q> <http://ex/b> .\n\
         <http://ex/a> <http://ex/p> <http://ex/c> .\n\
         <http://ex/b> <http://ex/p> <http://ex/d> .\n\
         <http://ex/c> <http://ex/p> <http://ex/d> .\n\
         <http://ex/d> <http://ex/p> <http://ex/a> .\n\
         <http://ex/d> <http://ex/p> <http://ex/e> .\n\
         <http://ex/e> <http://ex/p> <http://ex/f> .\n\
         <http://ex/f> <http://ex/q> <http://ex/a> .\n\
         <http://ex/b> <http://ex/p> <http://ex/a> .\n",
    );
    assert_eq!(six.entity_count(), 6);
    let scores = pagerank(&six, 0.85, 1e-12, 500).unwrap();

    // Dense oracle: explicit row-stochastic matrix with uniform dangling
    // patching, iterated to the same tolerance.
    let n = six.entity_count();
    let mut p = vec![vec![0.0f64; n]; n];
    for v in six.entity_ids() {
        let mut targets: Vec<usize> = six
            .out_edges(v)
            .unwrap()
            .iter()
            .map(|e| e.target.index())
            .collect();
        targets.sort_unstable();
        targets.dedup();
        if targets.is_empty() {
            for j in 0..n {
                p[v.index()][j] = 1.0 / n as f64;
            }
        } else {
            for &j in &targets {
                p[v.index()][j] = 1.0 / targets.len() as f64;
            }
        }
    }
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..500 {
        let mut y = vec![0.15 / n as f64; n];
        for j in 0..n {
            for i in 0..n {
                y[j] += 0.85 * x[i] * p[i][j];
            }
        }
        let diff: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
        x = y;
        if diff < 1e-12 {
            break;
        }
    }
    for (got, want) in scores.scores().iter().zip(&x) {
        assert!((got - want).abs() < 1e-8, "score {got} vs oracle {want}");
    }

    let sum: f64 = scores.scores().iter().sum();
    assert!((sum - 1.0).abs() <= 1e-9, "scores sum to {sum}");

    let cycle = parse(
        "<http://ex/a> <http://ex/p> <http://ex/b> .\n\
         <http://ex/b> <http://ex/p> <http://ex/c> .\n\
         <http://ex/c> <http://ex/p> <http://ex/a> .\n",
    );
    let cycle_scores = pagerank(&cycle, 0.85, 1e-12, 500).unwrap();
    let first = cycle_scores.scores()[0];
    for &s in cycle_scores.scores() {
        assert!((s - first).abs() < 1e-12, "cycle scores diverge");
    }

    pass(4, "PageRank matches the dense oracle and sums to one", started);
}

// ---------------------------------------------------------------------
// 5. Gradient checks for both training modes.
// ---------------------------------------------------------------------

#[test]
fn acceptance_05_gradient_checks() {
    let started = Instant::now();
    let dim = 4;
    let vocab_size = 5;
    let eps = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(314159);

    let rel_err = |analytic: f64, numeric: f64| -> f64 {
        (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
    };

    // SkipGram instance: one hidden vector scored against a positive and
    // several negative output rows; the loss is the sum of pair losses.
    let sg_loss = |hidden: &[f64], outputs: &[Vec<f64>], labels: &[bool]| -> f64 {
        outputs
            .iter()
            .zip(labels)
            .map(|(o, &l)| kgwe_core::embed::log_logistic_loss(hidden, o, l).0)
            .sum()
    };

    for _ in 0..100 {
        let hidden: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let outputs: Vec<Vec<f64>> = (0..vocab_size)
            .map(|_| (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let labels: Vec<bool> = (0..vocab_size).map(|i| i == 0).collect();

        // Analytic gradients assembled from the per-pair coefficients.
        let mut grad_hidden = vec![0.0; dim];
        let mut grad_outputs = vec![vec![0.0; dim]; vocab_size];
        for (t, output) in outputs.iter().enumerate() {
            let (_, coeff) = kgwe_core::embed::log_logistic_loss(&hidden, output, labels[t]);
            for k in 0..dim {
                grad_hidden[k] += -coeff * output[k];
                grad_outputs[t][k] = -coeff * hidden[k];
            }
        }

        for k in 0..dim {
            let mut hi = hidden.clone();
            let mut lo = hidden.clone();
            hi[k] += eps;
            lo[k] -= eps;
            let numeric = (sg_loss(&hi, &outputs, &labels) - sg_loss(&lo, &outputs, &labels))
                / (2.0 * eps);
            assert!(
                rel_err(grad_hidden[k], numeric) < 1e-4,
                "skipgram hidden grad: analytic {} vs numeric {numeric}",
                grad_hidden[k]
            );
        }
        for t in 0..vocab_size {
            for k in 0..dim {
                let mut hi = outputs.clone();
                let mut lo = outputs.clone();
                hi[t][k] += eps;
                lo[t][k] -= eps;
                let numeric =
                    (sg_loss(&hidden, &hi, &labels) - sg_loss(&hidden, &lo, &labels)) / (2.0 * eps);
                assert!(
                    rel_err(grad_outputs[t][k], numeric) < 1e-4,
                    "skipgram output grad: analytic {} vs numeric {numeric}",
                    grad_outputs[t][k]
                );
            }
        }
    }

    // CBOW instance: the hidden vector is the mean of the context rows, so
    // each context row owns a 1/m share of the hidden gradient.
    let cbow_loss = |contexts: &[Vec<f64>], outputs: &[Vec<f64>], labels: &[bool]| -> f64 {
        let m = contexts.len() as f64;
        let mut hidden = vec![0.0; dim];
        for c in contexts {
            for k in 0..dim {
                hidden[k] += c[k] / m;
            }
        }
        outputs
            .iter()
            .zip(labels)
            .map(|(o, &l)| kgwe_core::embed::log_logistic_loss(&hidden, o, l).0)
            .sum()
    };

    for _ in 0..100 {
        let m = rng.gen_range(1..=3usize);
        let contexts: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let outputs: Vec<Vec<f64>> = (0..vocab_size)
            .map(|_| (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let labels: Vec<bool> = (0..vocab_size).map(|i| i == 0).collect();

        let mut hidden = vec![0.0; dim];
        for c in &contexts {
            for k in 0..dim {
                hidden[k] += c[k] / m as f64;
            }
        }
        let mut grad_hidden = vec![0.0; dim];
        for (t, output) in outputs.iter().enumerate() {
            let (_, coeff) = kgwe_core::embed::log_logistic_loss(&hidden, output, labels[t]);
            for k in 0..dim {
                grad_hidden[k] += -coeff * output[k];
            }
        }

        for (c, _) in contexts.iter().enumerate() {
            for k in 0..dim {
                let mut hi = contexts.clone();
                let mut lo = contexts.clone();
                hi[c][k] += eps;
                lo[c][k] -= eps;
                let numeric = (cbow_loss(&hi, &outputs, &labels)
                    - cbow_loss(&lo, &outputs, &labels))
                    / (2.0 * eps);
                let analytic = grad_hidden[k] / m as f64;
                assert!(
                    rel_err(analytic, numeric) < 1e-4,
                    "cbow context grad: analytic {analytic} vs numeric {numeric}"
                );
            }
        }
    }

    assert!(started.elapsed() < Duration::from_secs(10), "over budget");
    pass(5, "analytic gradients match central finite differences", started);
}

// ---------------------------------------------------------------------
// 6. Single-worker training determinism, byte for byte.
// ---------------------------------------------------------------------

#[test]
fn acceptance_06_training_determinism() {
    let started = Instant::now();

    let corpus: Vec<Vec<String>> = (0..80usize)
        .map(|i| {
            vec![
                format!("e{}", i % 9),
                format!("p{}", i % 2),
                format!("e{}", (i * 4 + 1) % 9),
                format!("p{}", (i + 1) % 2),
                format!("e{}", (i * 7 + 2) % 9),
            ]
        })
        .collect();
    let vocab = build_vocab(&corpus, 1);

    for mode in [TrainMode::SkipGram, TrainMode::Cbow] {
        let mut config = TrainConfig::new(mode);
        config.dimension = 16;
        config.epochs = 3;
        config.seed = 99;
        config.workers = 1;
        config.ns_table_size = 100_000;

        let train = |c: &TrainConfig| match mode {
            TrainMode::SkipGram => train_skipgram(&corpus, &vocab, c).unwrap(),
            TrainMode::Cbow => train_cbow(&corpus, &vocab, c).unwrap(),
        };
        let mut first = Vec::new();
        let mut second = Vec::new();
        save_embeddings(&train(&config).embeddings, &mut first).unwrap();
        save_embeddings(&train(&config).embeddings, &mut second).unwrap();
        assert_eq!(first, second, "{mode} runs differ");
    }

    pass(6, "identical configs produce byte-identical embedding files", started);
}

// ---------------------------------------------------------------------
// 7. Rating prediction closed forms and the constant-rating invariant.
// ---------------------------------------------------------------------

#[test]
fn acceptance_07_rating_prediction_exactness() {
    let started = Instant::now();

    let angled = |cos_value: f64| -> Vec<f64> {
        let angle = cos_value.acos();
        vec![angle.cos(), angle.sin()]
    };

    // cos {0.5, 0.25} with ratings {4, 2}: (0.5*4 + 0.25*2) / 0.75 = 10/3.
    let emb = EmbeddingMatrix::from_vectors(
        vec!["i".into(), "j1".into(), "j2".into()],
        vec![vec![1.0, 0.0], angled(0.5), angled(0.25)],
    )
    .unwrap();
    let ratings = RatingsDataset::new(vec![
        ("u".into(), "j1".into(), 4.0),
        ("u".into(), "j2".into(), 2.0),
    ])
    .unwrap();
    let prediction = predict_rating("u", "i", &ratings, &emb, 5).unwrap();
    assert!((prediction.value - 10.0 / 3.0).abs() < 1e-12);

    // Single rated item: the prediction is that item's rating.
    let single = RatingsDataset::new(vec![("u".into(), "j1".into(), 4.0)]).unwrap();
    let prediction = predict_rating("u", "i", &single, &emb, 5).unwrap();
    assert!((prediction.value - 4.0).abs() < 1e-12);

    // 1000 randomized trials: nonnegative coordinates give nonnegative
    // similarities, so a constant rating must reproduce itself exactly and
    // varied ratings stay inside the neighbors' range.
    let mut rng = ChaCha8Rng::seed_from_u64(161803);
    for trial in 0..1000 {
        let items = rng.gen_range(2..7usize);
        let dim = rng.gen_range(2..5usize);
        let mut tokens = vec!["target".to_owned()];
        let mut vectors = vec![(0..dim).map(|_| rng.gen::<f64>() + 0.01).collect::<Vec<f64>>()];
        for j in 0..items {
            tokens.push(format!("it{j}"));
            vectors.push((0..dim).map(|_| rng.gen::<f64>() + 0.01).collect());
        }
        let emb = EmbeddingMatrix::from_vectors(tokens, vectors).unwrap();

        let constant = 1.0 + rng.gen::<f64>() * 4.0;
        let rows: Vec<(String, String, f64)> = (0..items)
            .map(|j| ("u".to_owned(), format!("it{j}"), constant))
            .collect();
        let ratings = RatingsDataset::new(rows).unwrap();
        let neighborhood = rng.gen_range(1..=items);
        let prediction =
            predict_rating("u", "target", &ratings, &emb, neighborhood).unwrap();
        assert!(
            (prediction.value - constant).abs() < 1e-12,
            "trial {trial}: constant {constant} gave {}",
            prediction.value
        );

        let varied: Vec<(String, String, f64)> = (0..items)
            .map(|j| ("v".to_owned(), format!("it{j}"), 1.0 + rng.gen::<f64>() * 4.0))
            .collect();
        let bounds = (
            varied.iter().map(|r| r.2).fold(f64::INFINITY, f64::min),
            varied.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max),
        );
        let ratings = RatingsDataset::new(varied).unwrap();
        let prediction = predict_rating("v", "target", &ratings, &emb, items).unwrap();
        assert!(
            prediction.value >= bounds.0 - 1e-12 && prediction.value <= bounds.1 + 1e-12,
            "trial {trial}: {} outside [{}, {}]",
            prediction.value,
            bounds.0,
            bounds.1
        );
    }

    pass(7, "rating predictions match closed forms to 1e-12", started);
}

// ---------------------------------------------------------------------
// 8. kNN and linear regression against independent oracles.
// ---------------------------------------------------------------------

/// Plain-loop cosine, independent of the library's implementation.
fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[test]
fn acceptance_08_evaluator_oracles() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(577215);

    // 40-entity fixture: random vectors, two class labels, numeric targets.
    let n = 40usize;
    let dim = 6usize;
    let vectors: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
        .collect();
    let tokens: Vec<String> = (0..n).map(|i| format!("http://ex/e{i}")).collect();
    let emb = EmbeddingMatrix::from_vectors(tokens.clone(), vectors.clone()).unwrap();

    let class_entries: Vec<(String, Label)> = (0..n)
        .map(|i| {
            let class = if vectors[i][0] + vectors[i][1] > 0.0 { "hi" } else { "lo" };
            (tokens[i].clone(), Label::Categorical(class.to_owned()))
        })
        .collect();
    let class_labels = LabeledEntitySet::new("fixture", class_entries.clone());

    let k = 3;
    let folds = 5;
    let report = knn_classify(&emb, &class_labels, k, folds, 4242).unwrap();
    assert_eq!(report.predictions.len(), n);

    // Fold of every entity, recovered from the report.
    let fold_of = |entity: &str| -> usize {
        report
            .predictions
            .iter()
            .find(|p| p.entity == entity)
            .unwrap()
            .fold
    };

    for record in &report.predictions {
        let query = vectors[tokens.iter().position(|t| *t == record.entity).unwrap()].as_slice();
        // Brute force: score every training entity, take the k best.
        let mut scored: Vec<(usize, f64)> = (0..n)
            .filter(|&i| fold_of(&tokens[i]) != record.fold)
            .map(|i| (i, oracle_cosine(query, &vectors[i])))
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        scored.truncate(k);
        let mut votes: std::collections::BTreeMap<&str, (usize, f64)> = Default::default();
        for &(i, sim) in &scored {
            let Label::Categorical(name) = &class_entries[i].1 else {
                unreachable!()
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
        assert_eq!(
            record.predicted,
            Label::Categorical(best.unwrap().0.to_owned()),
            "classification mismatch for {}",
            record.entity
        );
    }

    // Regression: same fixture with numeric targets.
    let reg_entries: Vec<(String, Label)> = (0..n)
        .map(|i| (tokens[i].clone(), Label::Numeric(vectors[i][2] * 10.0)))
        .collect();
    let reg_labels = LabeledEntitySet::new("fixture", reg_entries.clone());
    let report = knn_regress(&emb, &reg_labels, k, folds, 4242).unwrap();
    for record in &report.predictions {
        let fold_of = |entity: &str| -> usize {
            report
                .predictions
                .iter()
                .find(|p| p.entity == entity)
                .unwrap()
                .fold
        };
        let query = vectors[tokens.iter().position(|t| *t == record.entity).unwrap()].as_slice();
        let mut scored: Vec<(usize, f64)> = (0..n)
            .filter(|&i| fold_of(&tokens[i]) != record.fold)
            .map(|i| (i, oracle_cosine(query, &vectors[i])))
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        scored.truncate(k);
        let mut neighbor_indices: Vec<usize> = scored.iter().map(|&(i, _)| i).collect();
        neighbor_indices.sort_unstable();
        let expected = neighbor_indices
            .iter()
            .map(|&i| match reg_entries[i].1 {
                Label::Numeric(v) => v,
                _ => unreachable!(),
            })
            .sum::<f64>()
            / neighbor_indices.len() as f64;
        match record.predicted {
            Label::Numeric(got) => assert_eq!(got, expected, "regression mismatch"),
            _ => unreachable!(),
        }
    }

    // Linear regression coefficients vs an SVD pseudoinverse oracle on a
    // random 30 x 8 system.
    let rows_owned: Vec<Vec<f64>> = (0..30)
        .map(|_| (0..8).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
        .collect();
    let y: Vec<f64> = (0..30).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
    let rows: Vec<&[f64]> = rows_owned.iter().map(Vec::as_slice).collect();
    let coeffs = kgwe_core::eval::fit_ridge(&rows, &y, 0.0).unwrap();

    let mut design = nalgebra::DMatrix::<f64>::zeros(30, 9);
    for (i, row) in rows_owned.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            design[(i, j)] = v;
        }
        design[(i, 8)] = 1.0;
    }
    let svd = design.svd(true, true);
    let pinv = svd.pseudo_inverse(1e-12).unwrap();
    let oracle = pinv * nalgebra::DVector::from_vec(y);
    for (got, want) in coeffs.iter().zip(oracle.iter()) {
        assert!(
            (got - want).abs() < 1e-8,
            "coefficient {got} vs pseudoinverse {want}"
        );
    }

    pass(8, "kNN and least squares match independent oracles", started);
}

// ---------------------------------------------------------------------
// 9. Clickstream weighting beats uniform walks on planted communities.
// ---------------------------------------------------------------------

/// Two 100-node communities. Every node links to `intra` random nodes of
/// its own community and `inter` of the other, so unbiased walks mix
/// across the boundary; clickstream counts sit only on intra edges.
fn community_fixture(
    intra: usize,
    inter: usize,
    seed: u64,
) -> (KnowledgeGraph, kgwe_core::ClickstreamTable, LabeledEntitySet) {
    let per = 100usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triples = String::new();
    let mut clicks = String::new();
    let name = |community: usize, i: usize| -> String {
        format!("{}{}", if community == 0 { "A" } else { "B" }, i)
    };
    for community in 0..2 {
        for i in 0..per {
            let mut targets = std::collections::BTreeSet::new();
            while targets.len() < intra {
                let j = rng.gen_range(0..per);
                if j != i {
                    targets.insert(j);
                }
            }
            for &j in &targets {
                triples.push_str(&format!(
                    "<http://ex/r/{}> <http://ex/p/link> <http://ex/r/{}> .\n",
                    name(community, i),
                    name(community, j)
                ));
                clicks.push_str(&format!(
                    "{}\t{}\tlink\t200\n",
                    name(community, i),
                    name(community, j)
                ));
            }
            let mut cross = std::collections::BTreeSet::new();
            while cross.len() < inter {
                cross.insert(rng.gen_range(0..per));
            }
            for &j in &cross {
                triples.push_str(&format!(
                    "<http://ex/r/{}> <http://ex/p/link> <http://ex/r/{}> .\n",
                    name(community, i),
                    name(1 - community, j)
                ));
            }
        }
    }
    let graph = parse(&triples);
    let (table, _) = parse_clickstream(Cursor::new(clicks.into_bytes())).unwrap();
    let entries = (0..2)
        .flat_map(|community| {
            (0..per).map(move |i| {
                (
                    format!("http://ex/r/{}", name(community, i)),
                    Label::Categorical(if community == 0 { "A" } else { "B" }.to_owned()),
                )
            })
        })
        .collect();
    (graph, table, LabeledEntitySet::new("communities", entries))
}

#[test]
fn acceptance_09_clickstream_beats_uniform_on_planted_communities() {
    let started = Instant::now();

    let (graph, clicks, labels) = community_fixture(3, 5, 12345);
    let uniform = uniform_weights(&graph);
    let (weighted, _) = clickstream_weights(
        &graph,
        &clicks,
        &ClickstreamOptions {
            entity_prefix: "http://ex/r/".to_owned(),
            smoothing: 1.0,
            decode_titles: false,
        },
    )
    .unwrap();

    let accuracy = |weights: &kgwe_core::EdgeWeightTable, seed: u64| -> f64 {
        let walk_config = WalkConfig::new(4, 20, seed).unwrap();
        let corpus = generate_walks(&graph, weights, &walk_config).unwrap();
        let sentences = corpus.token_strings(&graph);
        let vocab = build_vocab(&sentences, 1);
        let mut train_config = TrainConfig::new(TrainMode::SkipGram);
        train_config.dimension = 32;
        train_config.epochs = 3;
        train_config.seed = seed;
        train_config.ns_table_size = 1_000_000;
        let trained = train_skipgram(&sentences, &vocab, &train_config).unwrap();
        let report = knn_classify(&trained.embeddings, &labels, 5, 10, 777).unwrap();
        report.metrics[0].aggregate
    };

    let seeds = [1u64, 2, 3, 4, 5];
    let mut uniform_sum = 0.0;
    let mut weighted_sum = 0.0;
    for &seed in &seeds {
        uniform_sum += accuracy(&uniform, seed);
        weighted_sum += accuracy(&weighted, seed);
    }
    let uniform_mean = uniform_sum / seeds.len() as f64;
    let weighted_mean = weighted_sum / seeds.len() as f64;
    println!(
        "    community classification: clickstream {weighted_mean:.4} vs uniform {uniform_mean:.4}"
    );
    assert!(
        weighted_mean > uniform_mean,
        "clickstream {weighted_mean} did not beat uniform {uniform_mean}"
    );

    assert!(started.elapsed() < Duration::from_secs(120), "over budget");
    pass(9, "clickstream-weighted walks classify communities better", started);
}

// ---------------------------------------------------------------------
// Cross-cutting sanity: the recommender protocol is self-consistent on a
// small end-to-end run (exercised fully by the CLI smoke elsewhere).
// ---------------------------------------------------------------------

#[test]
fn recommender_aggregate_is_mean_of_user_folds() {
    let emb = EmbeddingMatrix::from_vectors(
        (0..6).map(|i| format!("it{i}")).collect(),
        vec![
            vec![1.0, 0.0],
            vec![0.9, 0.1],
            vec![0.8, -0.1],
            vec![0.0, 1.0],
            vec![0.1, 0.9],
            vec![-0.1, 0.8],
        ],
    )
    .unwrap();
    let mut rows = Vec::new();
    for u in 0..4 {
        for i in 0..6 {
            if (u + i) % 2 == 0 {
                rows.push((format!("u{u}"), format!("it{i}"), 2.0 + ((u + i) % 4) as f64));
            }
        }
    }
    let ratings = RatingsDataset::new(rows).unwrap();
    let config = RecommenderConfig {
        neighborhood: 2,
        top_n: 2,
        relevance_threshold: 3.0,
        holdout_fraction: 0.4,
        seed: 6,
    };
    if let Ok(report) = evaluate_recommender(&ratings, &emb, &config) {
        for metric in &report.metrics {
            let mean: f64 = metric.per_fold.iter().sum::<f64>() / metric.per_fold.len() as f64;
            assert!((metric.aggregate - mean).abs() < 1e-15);
        }
    }
}
