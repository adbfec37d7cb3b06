//! End-to-end runs through the config/runner layer and the binary:
//! smoke tests, output files, exit codes, and byte-level determinism.

use std::fs;
use std::path::Path;
use std::process::Command;

use fusenet_cli::config::load_config;
use fusenet_cli::runner::run;

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn tiny_autoencoder_config(out_dir: &Path, mode: &str, seed: u64) -> String {
    format!(
        r#"{{
            "task": "autoencoder",
            "seed": {seed},
            "output_dir": "{}",
            "datasets": {{"synthetic": {{
                "kind": "teacher_net",
                "clusters": [
                    {{"members": [0, 1], "teacher_seed": 101, "perturbation_std": 0.02}},
                    {{"members": [2, 3], "teacher_seed": 909, "perturbation_std": 0.02}}
                ],
                "samples_per_dataset": 60,
                "test_samples": 20,
                "noise_std": 0.05,
                "input_dim": 2
            }}}},
            "network": {{"dims": [4, 8, 4], "activations": ["tanh", "identity"], "loss": "reconstruction"}},
            "train": {{"mode": "{mode}", "lambda": 10.0, "lr": 0.003, "batch_size": 16,
                       "sweeps_per_irls_iter": 2, "init_sweeps": 3, "max_irls_iters": 6,
                       "baseline_epochs": 8}}
        }}"#,
        out_dir.display()
    )
}

#[test]
fn isolated_smoke_run_improves_train_loss() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config_path = write_config(dir.path(), &tiny_autoencoder_config(&out, "isolated", 3));
    let config = load_config(&config_path).unwrap();
    let summary = run(&config).unwrap();
    assert_eq!(summary.n_datasets, 4);
    assert!(out.join("metrics.csv").exists());
    assert!(out.join("summary.json").exists());
    // No fusion outputs for baselines.
    assert!(!out.join("weights.json").exists());

    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next().unwrap(), "#schema=1");
    let header = lines.next().unwrap();
    assert!(header.starts_with("iteration,sgd_steps,consistency_loss,delta,train_loss_0"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    let first: f64 = rows[0].split(',').nth(4).unwrap().parse().unwrap();
    let last: f64 = rows[rows.len() - 1].split(',').nth(4).unwrap().parse().unwrap();
    assert!(last < first, "train loss did not trend down: {first} -> {last}");

    // Record counts in the summary match the generated data.
    for count in &summary.record_counts {
        assert_eq!(count.train, 60);
        assert_eq!(count.test, 20);
        assert_eq!(count.total, 80);
    }
}

/// Minimal DOT reader for the emitted files: node ids and undirected edges.
fn parse_dot(text: &str) -> (Vec<usize>, Vec<(usize, usize)>) {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('n') {
            if let Some((a, b)) = rest.split_once(" -- n") {
                let a: usize = a.trim().parse().unwrap();
                let b: usize = b.split_whitespace().next().unwrap().parse().unwrap();
                edges.push((a, b));
            } else if rest.contains("[label=") {
                let id: usize = rest.split_whitespace().next().unwrap().parse().unwrap();
                nodes.push(id);
            }
        }
    }
    (nodes, edges)
}

fn components(n: usize, edges: &[(usize, usize)]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for &(a, b) in edges {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        parent[ra] = rb;
    }
    (0..n)
        .map(|x| find(&mut parent, x))
        .collect::<std::collections::BTreeSet<_>>()
        .len()
}

#[test]
fn joint_run_emits_weights_and_parseable_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config_path =
        write_config(dir.path(), &tiny_autoencoder_config(&out, "joint_robust", 4));
    let config = load_config(&config_path).unwrap();
    let summary = run(&config).unwrap();
    assert!(out.join("weights.json").exists());
    assert!(out.join("sharing_l1.dot").exists());
    assert!(summary.consistency_loss.is_some());
    assert!(summary.delta.is_some());

    let dot = fs::read_to_string(out.join("sharing_l1.dot")).unwrap();
    let (nodes, edges) = parse_dot(&dot);
    assert_eq!(nodes.len(), 4);
    for &(a, b) in &edges {
        assert!(a < 4 && b < 4 && a != b);
    }
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.lines().count() >= 3);
}

#[test]
fn identical_seeds_give_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let config_path =
            write_config(dir.path(), &tiny_autoencoder_config(out, "joint_robust", 9));
        let config = load_config(&config_path).unwrap();
        run(&config).unwrap();
    }
    let metrics_a = fs::read(out_a.join("metrics.csv")).unwrap();
    let metrics_b = fs::read(out_b.join("metrics.csv")).unwrap();
    assert_eq!(metrics_a, metrics_b);
    let dot_a = fs::read(out_a.join("sharing_l1.dot")).unwrap();
    let dot_b = fs::read(out_b.join("sharing_l1.dot")).unwrap();
    assert_eq!(dot_a, dot_b);
    let weights_a = fs::read(out_a.join("weights.json")).unwrap();
    let weights_b = fs::read(out_b.join("weights.json")).unwrap();
    assert_eq!(weights_a, weights_b);
}

#[test]
fn different_seeds_change_the_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out, seed) in [(&out_a, 1u64), (&out_b, 2u64)] {
        let config_path =
            write_config(dir.path(), &tiny_autoencoder_config(out, "isolated", seed));
        run(&load_config(&config_path).unwrap()).unwrap();
    }
    assert_ne!(
        fs::read(out_a.join("metrics.csv")).unwrap(),
        fs::read(out_b.join("metrics.csv")).unwrap()
    );
}

#[test]
fn divergent_run_leaves_no_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let body = tiny_autoencoder_config(&out, "joint_robust", 5).replace("0.003", "50.0");
    let config_path = write_config(dir.path(), &body);
    let config = load_config(&config_path).unwrap();
    let err = run(&config).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
    assert!(!out.join("summary.json").exists());
}

#[test]
fn convex_task_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let body = format!(
        r#"{{
            "task": "svm_joint",
            "seed": 6,
            "output_dir": "{}",
            "datasets": {{"synthetic": {{
                "kind": "gaussian_blobs",
                "clusters": [{{"members": [0, 1], "teacher_seed": 5, "perturbation_std": 0.05}}],
                "samples_per_dataset": 40,
                "test_samples": 20,
                "noise_std": 0.1,
                "input_dim": 2
            }}}},
            "convex": {{"lambda": 0.05, "mu": 0.5, "gamma": 0.0, "lr": 0.1, "max_iters": 800, "tol": 1e-12}}
        }}"#,
        out.display()
    );
    let config_path = write_config(dir.path(), &body);
    let config = load_config(&config_path).unwrap();
    let summary = run(&config).unwrap();
    assert!(summary.objective.is_some());
    assert_eq!(summary.final_test_accuracy.len(), 2);
    // Separable-ish blobs: the joint SVMs should classify well above chance.
    for acc in summary.final_test_accuracy.iter().flatten() {
        assert!(*acc > 0.7, "accuracy {acc}");
    }
    assert!(out.join("metrics.csv").exists());
    assert!(out.join("summary.json").exists());
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fusenet"))
}

#[test]
fn binary_exit_codes_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config_path = write_config(dir.path(), &tiny_autoencoder_config(&out, "isolated", 7));

    let ok = binary().arg("validate").arg(&config_path).output().unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));

    let missing = binary()
        .arg("run")
        .arg(dir.path().join("nope.json"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    // Nothing was created for the invalid config.
    assert!(!out.exists());

    let bad_json = write_config(dir.path(), "{ not json");
    let parse = binary().arg("validate").arg(&bad_json).output().unwrap();
    assert_eq!(parse.status.code(), Some(1));
}

#[test]
fn binary_seed_env_override_matches_explicit_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out_env = dir.path().join("env");
    let out_explicit = dir.path().join("explicit");

    let config_env = write_config(dir.path(), &tiny_autoencoder_config(&out_env, "isolated", 1));
    let status = binary()
        .arg("run")
        .arg(&config_env)
        .env("FUSENET_SEED", "42")
        .status()
        .unwrap();
    assert!(status.success());

    let config_explicit = dir.path().join("explicit.json");
    fs::write(
        &config_explicit,
        tiny_autoencoder_config(&out_explicit, "isolated", 42),
    )
    .unwrap();
    let status = binary().arg("run").arg(&config_explicit).status().unwrap();
    assert!(status.success());

    assert_eq!(
        fs::read(out_env.join("metrics.csv")).unwrap(),
        fs::read(out_explicit.join("metrics.csv")).unwrap()
    );
}

#[test]
fn graph_subcommand_rebuilds_dot_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config_path =
        write_config(dir.path(), &tiny_autoencoder_config(&out, "joint_robust", 8));
    run(&load_config(&config_path).unwrap()).unwrap();

    let regraphed = dir.path().join("regraphed");
    let status = binary()
        .arg("graph")
        .arg(out.join("weights.json"))
        .arg("--k")
        .arg("1")
        .arg("--out-dir")
        .arg(&regraphed)
        .arg("--names")
        .arg("a,b,c,d")
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(regraphed.join("sharing_l1.dot")).unwrap();
    assert!(text.contains("[label=\"a\"]"));
    let (nodes, edges) = parse_dot(&text);
    assert_eq!(nodes.len(), 4);
    // k = 1 keeps at most one mutual partner each.
    assert!(edges.len() <= 2);

    // The inverse-distance metric is accepted too.
    let status = binary()
        .arg("graph")
        .arg(out.join("weights.json"))
        .arg("--metric")
        .arg("inverse_distance")
        .arg("--out-dir")
        .arg(dir.path().join("inv"))
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn two_planted_cliques_appear_as_two_dot_components() {
    // Moderately sized two-cluster run; the emitted graph should split into
    // the planted components.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let body = format!(
        r#"{{
            "task": "autoencoder",
            "seed": 12,
            "output_dir": "{}",
            "datasets": {{"synthetic": {{
                "kind": "teacher_net",
                "clusters": [
                    {{"members": [0, 1], "teacher_seed": 101, "perturbation_std": 0.02}},
                    {{"members": [2, 3], "teacher_seed": 909, "perturbation_std": 0.02}}
                ],
                "samples_per_dataset": 200,
                "test_samples": 40,
                "noise_std": 0.05,
                "input_dim": 2
            }}}},
            "network": {{"dims": [4, 8, 4], "activations": ["tanh", "identity"], "loss": "reconstruction"}},
            "train": {{"mode": "joint_robust", "lambda": 10.0, "lr": 0.003, "batch_size": 32,
                       "sweeps_per_irls_iter": 4, "init_sweeps": 3, "max_irls_iters": 10}},
            "graph_k": 1
        }}"#,
        out.display()
    );
    let config_path = write_config(dir.path(), &body);
    run(&load_config(&config_path).unwrap()).unwrap();
    let text = fs::read_to_string(out.join("sharing_l1.dot")).unwrap();
    let (nodes, edges) = parse_dot(&text);
    assert_eq!(nodes.len(), 4);
    assert_eq!(
        components(4, &edges),
        2,
        "expected the two planted cliques, got edges {edges:?}"
    );
    for &(a, b) in &edges {
        assert_eq!((a < 2), (b < 2), "edge ({a}, {b}) crosses the clusters");
    }
}
