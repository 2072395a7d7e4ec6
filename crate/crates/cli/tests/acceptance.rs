//! CLI-level acceptance: the end-to-end pipeline smoke run, exit codes,
//! and reproducibility of persisted artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn kgwe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kgwe"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    kgwe().args(args).output().expect("spawning kgwe")
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

// ---------------------------------------------------------------------
// 10. Pipeline smoke on the bundled fixture.
// ---------------------------------------------------------------------

#[test]
fn acceptance_10_pipeline_smoke() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let output = run(&[
        "pipeline",
        "--graph",
        fixture("smoke.nt").to_str().unwrap(),
        "--strategy",
        "uniform",
        "--labels",
        fixture("smoke_labels.tsv").to_str().unwrap(),
        "--ratings",
        fixture("smoke_ratings.tsv").to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_success(&output);

    let stem = "uniform_sg_200w_200v_4d";
    for artifact in [
        format!("{stem}.walks.txt"),
        format!("{stem}.embeddings.txt"),
        format!("{stem}.manifest.json"),
        format!("{stem}.ml_knn.tsv"),
        format!("{stem}.rec.tsv"),
        format!("{stem}.config.json"),
        "graph_stats.json".to_owned(),
    ] {
        let path = dir.path().join(&artifact);
        assert!(path.exists(), "missing artifact {artifact}");
        assert!(
            artifact.ends_with("walks.txt") || fs::metadata(&path).unwrap().len() > 0,
            "empty artifact {artifact}"
        );
    }

    // Manifest lists every stage with checksummed outputs.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join(format!("{stem}.manifest.json"))).unwrap())
            .unwrap();
    let stages: Vec<&str> = manifest["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        stages,
        vec!["parse-graph", "weights", "walk", "train", "eval-ml", "eval-rec"]
    );
    for stage in manifest["stages"].as_array().unwrap() {
        for artifact in stage["outputs"].as_array().unwrap() {
            assert_eq!(artifact["sha256"].as_str().unwrap().len(), 64);
        }
    }

    assert!(
        started.elapsed() < Duration::from_secs(30),
        "pipeline smoke took {:?}",
        started.elapsed()
    );
    println!(
        "ACCEPTANCE 10 PASS: pipeline smoke emits corpus, embeddings, manifest, and reports ({:.2?})",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------
// Exit codes.
// ---------------------------------------------------------------------

#[test]
fn clickstream_strategy_without_path_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(&[
        "walk",
        "--graph",
        fixture("smoke.nt").to_str().unwrap(),
        "--strategy",
        "clickstream",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("--clickstream"));
}

#[test]
fn missing_required_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(&["walk", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("--graph"));
}

#[test]
fn unknown_strategy_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(&[
        "walk",
        "--graph",
        fixture("smoke.nt").to_str().unwrap(),
        "--strategy",
        "bogus",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn stage_failure_exits_1_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(&[
        "pipeline",
        "--graph",
        "/nonexistent/graph.nt",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("parse-graph"),
        "diagnostic must name the stage: {stderr}"
    );
}

// ---------------------------------------------------------------------
// Reproducibility of persisted artifacts.
// ---------------------------------------------------------------------

#[test]
fn identical_configs_give_byte_identical_embeddings() {
    let run_pipeline = |out: &Path| {
        let output = run(&[
            "pipeline",
            "--graph",
            fixture("smoke.nt").to_str().unwrap(),
            "--walks-per-vertex",
            "30",
            "--dim",
            "32",
            "--epochs",
            "2",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_success(&output);
        fs::read(out.join("uniform_sg_30w_32v_4d.embeddings.txt")).unwrap()
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    assert_eq!(run_pipeline(dir_a.path()), run_pipeline(dir_b.path()));
}

#[test]
fn train_stage_reruns_identically_from_the_persisted_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(&[
        "pipeline",
        "--graph",
        fixture("smoke.nt").to_str().unwrap(),
        "--walks-per-vertex",
        "30",
        "--dim",
        "32",
        "--epochs",
        "2",
        "--seed",
        "11",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_success(&output);
    let pipeline_embeddings = fs::read(dir.path().join("uniform_sg_30w_32v_4d.embeddings.txt")).unwrap();

    // Re-run training in isolation from the corpus the pipeline wrote,
    // with the same global seed; the embedding file must match.
    let rerun_dir = tempfile::tempdir().unwrap();
    let output = run(&[
        "train",
        "--corpus",
        dir.path().join("uniform_sg_30w_32v_4d.walks.txt").to_str().unwrap(),
        "--dim",
        "32",
        "--epochs",
        "2",
        "--seed",
        "11",
        "--out",
        rerun_dir.path().to_str().unwrap(),
    ]);
    assert_success(&output);
    let standalone = fs::read(rerun_dir.path().join("emb_sg_32v.txt")).unwrap();
    assert_eq!(pipeline_embeddings, standalone);
}

// ---------------------------------------------------------------------
// Config file and flag precedence.
// ---------------------------------------------------------------------

#[test]
fn flags_override_config_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.json");
    fs::write(
        &config_path,
        r#"{"walks_per_vertex": 3, "depth": 2, "dim": 16, "epochs": 1}"#,
    )
    .unwrap();

    let output = run(&[
        "pipeline",
        "--config",
        config_path.to_str().unwrap(),
        "--graph",
        fixture("smoke.nt").to_str().unwrap(),
        "--walks-per-vertex",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_success(&output);

    // The flag wins over the file, the file wins over the default.
    let walks = fs::read_to_string(dir.path().join("uniform_sg_2w_16v_2d.walks.txt")).unwrap();
    assert_eq!(walks.lines().count(), 23 * 2, "23 entities x 2 walks");

    let echo: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("uniform_sg_2w_16v_2d.config.json")).unwrap())
            .unwrap();
    assert_eq!(echo["walks_per_vertex"], 2);
    assert_eq!(echo["depth"], 2);
    assert_eq!(echo["dim"], 16);
    assert_eq!(echo["seed"], 42);
}

#[test]
fn standalone_stages_produce_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let output = run(&[
        "parse-graph",
        "--graph",
        fixture("smoke.nt").to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_success(&output);
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("graph_stats.json")).unwrap())
            .unwrap();
    assert_eq!(stats["entities"], 23);
    assert_eq!(stats["edges"], 48); // 50 triples, 2 with literal objects

    let output = run(&[
        "weights",
        "--graph",
        fixture("smoke.nt").to_str().unwrap(),
        "--strategy",
        "pagerank",
        "--out",
        out,
    ]);
    assert_success(&output);
    let weights = fs::read_to_string(dir.path().join("weights_pagerank.tsv")).unwrap();
    assert_eq!(weights.lines().count(), 48);

    let output = run(&[
        "walk",
        "--graph",
        fixture("smoke.nt").to_str().unwrap(),
        "--strategy",
        "pred-freq",
        "--depth",
        "4",
        "--walks-per-vertex",
        "5",
        "--out",
        out,
    ]);
    assert_success(&output);
    let corpus_path = dir.path().join("predfreq_5w_4d.walks.txt");
    assert_eq!(
        fs::read_to_string(&corpus_path).unwrap().lines().count(),
        23 * 5
    );

    let output = run(&[
        "train",
        "--corpus",
        corpus_path.to_str().unwrap(),
        "--dim",
        "16",
        "--mode",
        "cbow",
        "--epochs",
        "2",
        "--out",
        out,
    ]);
    assert_success(&output);
    let embeddings_path = dir.path().join("emb_cbow_16v.txt");
    assert!(embeddings_path.exists());

    let output = run(&[
        "eval-ml",
        "--embeddings",
        embeddings_path.to_str().unwrap(),
        "--labels",
        fixture("smoke_labels.tsv").to_str().unwrap(),
        "--task",
        "classify",
        "--folds",
        "3",
        "--out",
        out,
    ]);
    assert_success(&output);
    let report = fs::read_to_string(dir.path().join("eval_ml_knn.tsv")).unwrap();
    assert!(report.contains("accuracy\tmean\t"));

    let output = run(&[
        "eval-rec",
        "--embeddings",
        embeddings_path.to_str().unwrap(),
        "--ratings",
        fixture("smoke_ratings.tsv").to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_success(&output);
    let report = fs::read_to_string(dir.path().join("eval_rec.tsv")).unwrap();
    assert!(report.contains("precision\tmean\t"));
    assert!(report.contains("f1\tmean\t"));
}

#[test]
fn eval_ml_regress_runs_both_learners() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    // Build small embeddings first.
    let output = run(&[
        "walk",
        "--graph",
        fixture("smoke.nt").to_str().unwrap(),
        "--depth",
        "4",
        "--walks-per-vertex",
        "10",
        "--out",
        out,
    ]);
    assert_success(&output);
    let output = run(&[
        "train",
        "--corpus",
        dir.path().join("uniform_10w_4d.walks.txt").to_str().unwrap(),
        "--dim",
        "8",
        "--epochs",
        "2",
        "--out",
        out,
    ]);
    assert_success(&output);

    // Numeric labels over the same entities.
    let labels_path = dir.path().join("targets.tsv");
    let mut labels = String::new();
    for i in 1..=6 {
        labels.push_str(&format!("http://ex/r/Band{i}\t{}\n", i as f64));
        labels.push_str(&format!("http://ex/r/Album{i}\t{}\n", i as f64 + 0.5));
        labels.push_str(&format!("http://ex/r/City{i}\t{}\n", 10.0 - i as f64));
    }
    fs::write(&labels_path, labels).unwrap();

    let output = run(&[
        "eval-ml",
        "--embeddings",
        dir.path().join("emb_sg_8v.txt").to_str().unwrap(),
        "--labels",
        labels_path.to_str().unwrap(),
        "--task",
        "regress",
        "--folds",
        "3",
        "--l2",
        "0.1",
        "--out",
        out,
    ]);
    assert_success(&output);
    assert!(dir.path().join("eval_ml_knn.tsv").exists());
    assert!(dir.path().join("eval_ml_linreg.tsv").exists());
}
