//! Experiment orchestration: builds datasets, dispatches on task and mode,
//! and emits metrics.csv, the weights snapshot, sharing graphs, and
//! summary.json (written last, as the completion certificate).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use fusenet::convex::{
    logreg_joint_train, logreg_objective, svm_joint_train, svm_objective, ConvexConfig,
    ConvexTrace, LabeledSet, LinearModel,
};
use fusenet::fusion::{pair_distances, PairTensor};
use fusenet::graph::{build_graph, export_dot};
use fusenet::network::Dataset;
use fusenet::trainer::{irls_train, train_baseline, TrainHistory, TrainMode};

use crate::config::{DataConfig, ExperimentConfig, FileSource, Task};
use crate::data::{load_csv, load_idx, split_train_test};
use crate::synth::generate_synthetic;
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordCount {
    pub id: usize,
    pub train: usize,
    pub test: usize,
    pub total: usize,
}

/// Final experiment summary; its presence in the output directory certifies a
/// completed run. Wall-clock timings live here, not in metrics.csv, so the
/// metric files stay byte-identical across reruns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub task: String,
    pub mode: String,
    pub seed: u64,
    pub n_datasets: usize,
    pub iterations: usize,
    pub record_counts: Vec<RecordCount>,
    pub final_train_loss: Vec<f64>,
    pub final_test_loss: Vec<Option<f64>>,
    pub final_test_accuracy: Vec<Option<f64>>,
    pub consistency_loss: Option<f64>,
    pub delta: Option<f64>,
    /// Final joint objective (convex tasks only).
    pub objective: Option<f64>,
    pub elapsed_seconds: f64,
    pub per_iteration_seconds: Vec<f64>,
    pub outputs: Vec<String>,
}

/// Snapshot of the final fusion state, re-loadable by the `graph` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightsSnapshot {
    pub n: usize,
    pub layer_pairs: usize,
    pub sigma: Vec<f64>,
    /// weights[l][i][j]
    pub weights: Vec<Vec<Vec<f64>>>,
    /// distances[l][i][j]
    pub distances: Vec<Vec<Vec<f64>>>,
}

impl WeightsSnapshot {
    fn from_tensors(sigma: &[f64], weights: &PairTensor, distances: &PairTensor) -> Self {
        WeightsSnapshot {
            n: weights.n(),
            layer_pairs: weights.layers(),
            sigma: sigma.to_vec(),
            weights: (0..weights.layers()).map(|l| weights.slice(l)).collect(),
            distances: (0..distances.layers()).map(|l| distances.slice(l)).collect(),
        }
    }
}

/// Builds all datasets named by the configuration.
pub fn build_datasets(config: &ExperimentConfig) -> CliResult<Vec<Dataset>> {
    match &config.datasets {
        DataConfig::Files(sources) => {
            let mut datasets = Vec::with_capacity(sources.len());
            for (id, source) in sources.iter().enumerate() {
                let (mut dataset, fraction) = match source {
                    FileSource::Csv {
                        path,
                        label_column,
                        test_fraction,
                    } => (load_csv(path, *label_column, id)?, *test_fraction),
                    FileSource::Idx {
                        images,
                        labels,
                        test_fraction,
                    } => (load_idx(images, labels.as_deref(), id)?, *test_fraction),
                };
                if fraction > 0.0 {
                    split_train_test(&mut dataset, fraction, config.seed);
                }
                datasets.push(dataset);
            }
            Ok(datasets)
        }
        DataConfig::Synthetic(spec) => {
            let (record_dim, n_classes) = match config.task {
                Task::Classification | Task::Autoencoder => {
                    let net = config
                        .network
                        .as_ref()
                        .ok_or_else(|| CliError::Config("network section required".into()))?
                        .to_spec()?;
                    (net.input_dim(), net.output_dim())
                }
                Task::SvmJoint | Task::LogregJoint => (spec.input_dim, 2),
            };
            generate_synthetic(spec, config.task, record_dim, n_classes, config.seed)
        }
    }
}

fn format_opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes metrics.csv: the schema line, a header row, and one row per
/// completed iteration. No wall-clock values appear here; identical seeded
/// runs produce byte-identical files.
fn write_metrics_csv(path: &Path, n: usize, rows: &[MetricsRow]) -> CliResult<()> {
    let mut out = String::from("#schema=1\n");
    out.push_str("iteration,sgd_steps,consistency_loss,delta");
    for prefix in ["train_loss", "test_loss", "test_acc"] {
        for i in 0..n {
            out.push_str(&format!(",{prefix}_{i}"));
        }
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}",
            row.iteration,
            row.sgd_steps.map(|s| s.to_string()).unwrap_or_default(),
            format_opt(row.consistency_loss),
            format_opt(row.delta)
        ));
        for value in row
            .train_loss
            .iter()
            .map(|&v| Some(v))
            .chain(row.test_loss.iter().copied())
            .chain(row.test_accuracy.iter().copied())
        {
            out.push(',');
            out.push_str(&format_opt(value));
        }
        out.push('\n');
    }
    fs::write(path, out)
        .map_err(|err| CliError::Runtime(format!("cannot write {}: {err}", path.display())))
}

struct MetricsRow {
    iteration: usize,
    sgd_steps: Option<usize>,
    consistency_loss: Option<f64>,
    delta: Option<f64>,
    train_loss: Vec<f64>,
    test_loss: Vec<Option<f64>>,
    test_accuracy: Vec<Option<f64>>,
}

fn history_rows(history: &TrainHistory) -> Vec<MetricsRow> {
    history
        .records
        .iter()
        .map(|r| MetricsRow {
            iteration: r.iteration,
            sgd_steps: Some(r.sgd_steps),
            consistency_loss: r.consistency_loss,
            delta: r.delta,
            train_loss: r.train_loss.clone(),
            test_loss: r.test_loss.clone(),
            test_accuracy: r.test_accuracy.clone(),
        })
        .collect()
}

fn trace_rows(trace: &ConvexTrace, n: usize) -> Vec<MetricsRow> {
    trace
        .records
        .iter()
        .map(|r| MetricsRow {
            iteration: r.iteration,
            sgd_steps: None,
            consistency_loss: None,
            delta: None,
            train_loss: r.model_loss.clone(),
            test_loss: vec![None; n],
            test_accuracy: vec![None; n],
        })
        .collect()
}

/// Emits one DOT file per layer pair from the snapshot.
pub fn write_sharing_graphs(
    snapshot: &WeightsSnapshot,
    k: usize,
    metric: &str,
    names: &[String],
    out_dir: &Path,
) -> CliResult<Vec<String>> {
    let mut written = Vec::new();
    for l in 0..snapshot.layer_pairs {
        let influence: Vec<Vec<f64>> = match metric {
            "weight" => snapshot.weights[l].clone(),
            "inverse_distance" => snapshot.distances[l]
                .iter()
                .map(|row| row.iter().map(|d| 1.0 / (1.0 + d)).collect())
                .collect(),
            other => {
                return Err(CliError::Config(format!("unknown graph metric '{other}'")));
            }
        };
        let graph = build_graph(&influence, l, k);
        let text = export_dot(&graph, names);
        let name = format!("sharing_l{}.dot", l + 1);
        fs::write(out_dir.join(&name), text)
            .map_err(|err| CliError::Runtime(format!("cannot write {name}: {err}")))?;
        written.push(name);
    }
    Ok(written)
}

fn to_labeled(dataset: &Dataset, subset: &[usize]) -> CliResult<LabeledSet> {
    let labels = dataset.labels.as_ref().ok_or_else(|| {
        CliError::Config(format!("dataset {} has no labels for a convex task", dataset.id))
    })?;
    let mut rows = Vec::with_capacity(subset.len());
    let mut signed = Vec::with_capacity(subset.len());
    for &record in subset {
        rows.push(dataset.features.row(record).to_vec());
        signed.push(match labels[record] {
            0 => -1.0,
            1 => 1.0,
            other => {
                return Err(CliError::Config(format!(
                    "dataset {} record {record}: convex tasks need binary labels, got {other}",
                    dataset.id
                )));
            }
        });
    }
    Ok(LabeledSet {
        features: fusenet::numerics::Matrix::from_rows(&rows),
        labels: signed,
    })
}

type SplitMetrics = (Vec<f64>, Vec<Option<f64>>, Vec<Option<f64>>);

fn linear_metrics(models: &[LinearModel], datasets: &[Dataset]) -> CliResult<SplitMetrics> {
    let mut train_loss = Vec::new();
    let mut test_loss = Vec::new();
    let mut test_accuracy = Vec::new();
    for (model, dataset) in models.iter().zip(datasets) {
        let eval = |subset: &[usize]| -> CliResult<(f64, f64)> {
            let set = to_labeled(dataset, subset)?;
            let mut loss = 0.0;
            let mut correct = 0usize;
            for record in 0..set.n_records() {
                let score = model.score(set.features.row(record));
                let y = set.labels[record];
                loss += (1.0 - y * score).max(0.0);
                if (score >= 0.0 && y > 0.0) || (score < 0.0 && y < 0.0) {
                    correct += 1;
                }
            }
            Ok((
                loss / set.n_records() as f64,
                correct as f64 / set.n_records() as f64,
            ))
        };
        let (loss, _) = eval(&dataset.train_idx)?;
        train_loss.push(loss);
        if dataset.test_idx.is_empty() {
            test_loss.push(None);
            test_accuracy.push(None);
        } else {
            let (loss, acc) = eval(&dataset.test_idx)?;
            test_loss.push(Some(loss));
            test_accuracy.push(Some(acc));
        }
    }
    Ok((train_loss, test_loss, test_accuracy))
}

/// Runs the configured experiment and writes all outputs under
/// `config.output_dir`. Nothing is written until the configuration and
/// datasets have validated.
pub fn run(config: &ExperimentConfig) -> CliResult<RunSummary> {
    config.validate()?;
    let started = Instant::now();
    let datasets = build_datasets(config)?;
    let n = datasets.len();
    let names = config.dataset_names(n);
    if names.len() != n {
        return Err(CliError::Config(format!("{} names for {n} datasets", names.len())));
    }
    let record_counts: Vec<RecordCount> = datasets
        .iter()
        .map(|d| RecordCount {
            id: d.id,
            train: d.train_idx.len(),
            test: d.test_idx.len(),
            total: d.n_records(),
        })
        .collect();

    let mut summary = RunSummary {
        task: format!("{:?}", config.task).to_lowercase(),
        mode: if config.task.is_network() {
            config.train.mode.clone()
        } else {
            "convex".into()
        },
        seed: config.seed,
        n_datasets: n,
        iterations: 0,
        record_counts,
        final_train_loss: Vec::new(),
        final_test_loss: Vec::new(),
        final_test_accuracy: Vec::new(),
        consistency_loss: None,
        delta: None,
        objective: None,
        elapsed_seconds: 0.0,
        per_iteration_seconds: Vec::new(),
        outputs: Vec::new(),
    };

    match config.task {
        Task::Classification | Task::Autoencoder => {
            let spec = config
                .network
                .as_ref()
                .expect("validated above")
                .to_spec()?;
            for dataset in &datasets {
                dataset.validate_for(&spec)?;
            }
            let train_cfg = config.train.to_train_config(config.seed)?;
            fs::create_dir_all(&config.output_dir).map_err(|err| {
                CliError::Runtime(format!(
                    "cannot create {}: {err}",
                    config.output_dir.display()
                ))
            })?;
            let (ensemble, history, fusion) = match train_cfg.mode {
                TrainMode::JointRobust => {
                    let (ensemble, history, state) = irls_train(&spec, &datasets, &train_cfg)?;
                    (ensemble, history, Some(state))
                }
                _ => {
                    let (ensemble, history) = train_baseline(&spec, &datasets, &train_cfg)?;
                    (ensemble, history, None)
                }
            };
            write_metrics_csv(
                &config.output_dir.join("metrics.csv"),
                n,
                &history_rows(&history),
            )?;
            summary.outputs.push("metrics.csv".into());
            if let Some(state) = &fusion {
                let distances = pair_distances(&ensemble);
                let snapshot =
                    WeightsSnapshot::from_tensors(&state.sigma, &state.weights, &distances);
                let json = serde_json::to_string_pretty(&snapshot)
                    .map_err(|err| CliError::Runtime(err.to_string()))?;
                fs::write(config.output_dir.join("weights.json"), json)
                    .map_err(|err| CliError::Runtime(err.to_string()))?;
                summary.outputs.push("weights.json".into());
                let dots = write_sharing_graphs(
                    &snapshot,
                    config.graph_k,
                    &config.graph_metric,
                    &names,
                    &config.output_dir,
                )?;
                summary.outputs.extend(dots);
            }
            if let Some(last) = history.records.last() {
                summary.iterations = last.iteration;
                summary.final_train_loss = last.train_loss.clone();
                summary.final_test_loss = last.test_loss.clone();
                summary.final_test_accuracy = last.test_accuracy.clone();
                summary.consistency_loss = last.consistency_loss;
                summary.delta = last.delta;
            }
            summary.per_iteration_seconds =
                history.records.iter().map(|r| r.elapsed).collect();
        }
        Task::SvmJoint | Task::LogregJoint => {
            let train_sets: Vec<LabeledSet> = datasets
                .iter()
                .map(|d| to_labeled(d, &d.train_idx))
                .collect::<CliResult<_>>()?;
            let convex_cfg: ConvexConfig = config.convex.to_convex_config()?;
            fs::create_dir_all(&config.output_dir).map_err(|err| {
                CliError::Runtime(format!(
                    "cannot create {}: {err}",
                    config.output_dir.display()
                ))
            })?;
            let (models, trace, objective) = match config.task {
                Task::SvmJoint => {
                    let (models, trace) = svm_joint_train(&train_sets, &convex_cfg)?;
                    let objective = svm_objective(&models, &train_sets, &convex_cfg)?;
                    (models, trace, objective)
                }
                Task::LogregJoint => {
                    let (models, trace) = logreg_joint_train(&train_sets, &convex_cfg)?;
                    let objective = logreg_objective(&models, &train_sets, &convex_cfg, true)?;
                    (models, trace, objective)
                }
                _ => unreachable!(),
            };
            write_metrics_csv(
                &config.output_dir.join("metrics.csv"),
                n,
                &trace_rows(&trace, n),
            )?;
            summary.outputs.push("metrics.csv".into());
            let (train_loss, test_loss, test_accuracy) = linear_metrics(&models, &datasets)?;
            summary.iterations = trace.records.last().map(|r| r.iteration).unwrap_or(0);
            summary.final_train_loss = train_loss;
            summary.final_test_loss = test_loss;
            summary.final_test_accuracy = test_accuracy;
            summary.objective = Some(objective);
        }
    }

    summary.elapsed_seconds = started.elapsed().as_secs_f64();
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|err| CliError::Runtime(err.to_string()))?;
    fs::write(config.output_dir.join("summary.json"), json)
        .map_err(|err| CliError::Runtime(err.to_string()))?;
    summary.outputs.push("summary.json".into());
    Ok(summary)
}

/// Re-derives DOT files from a weights snapshot (the `graph` subcommand).
pub fn regraph(
    snapshot_path: &Path,
    k: usize,
    metric: &str,
    names: Option<Vec<String>>,
    out_dir: &Path,
) -> CliResult<Vec<String>> {
    let text = fs::read_to_string(snapshot_path).map_err(|err| {
        CliError::Config(format!("cannot read {}: {err}", snapshot_path.display()))
    })?;
    let snapshot: WeightsSnapshot = serde_json::from_str(&text).map_err(|err| {
        CliError::Config(format!("cannot parse {}: {err}", snapshot_path.display()))
    })?;
    let names = match names {
        Some(names) => {
            if names.len() != snapshot.n {
                return Err(CliError::Config(format!(
                    "{} names for {} datasets",
                    names.len(),
                    snapshot.n
                )));
            }
            names
        }
        None => (0..snapshot.n).map(|i| format!("ds{i}")).collect(),
    };
    fs::create_dir_all(out_dir)
        .map_err(|err| CliError::Runtime(format!("cannot create {}: {err}", out_dir.display())))?;
    write_sharing_graphs(&snapshot, k, metric, &names, out_dir)
}

/// Output directory override used by the `run --output-dir` flag.
pub fn with_output_dir(mut config: ExperimentConfig, dir: Option<PathBuf>) -> ExperimentConfig {
    if let Some(dir) = dir {
        config.output_dir = dir;
    }
    config
}
