//! Synthetic dataset generation with planted cluster structure.
//!
//! `teacher_net` plants one hidden generator network per cluster; each member
//! dataset samples records from its own lightly perturbed copy of the cluster
//! teacher, so datasets in one cluster share a generative law while clusters
//! differ substantially. `gaussian_blobs` does the analogue with linear
//! separators for the convex tasks. Everything is a deterministic function of
//! the spec and the master seed.

use serde::{Deserialize, Serialize};

use fusenet::network::{
    forward, Activation, Dataset, LayerParams, LossKind, NetworkSpec, ParamEnsemble,
};
use fusenet::numerics::{child_seed, Matrix, Rng};

use crate::config::Task;
use crate::{CliError, CliResult};

const PERTURB_STREAM: u64 = 0xA000_0000;
const RECORD_STREAM: u64 = 0xB000_0000;
const MASK_STREAM: u64 = 0xC000_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    TeacherNet,
    GaussianBlobs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub members: Vec<usize>,
    pub teacher_seed: u64,
    pub perturbation_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub clusters: Vec<ClusterSpec>,
    pub samples_per_dataset: usize,
    pub test_samples: usize,
    pub noise_std: f64,
    /// Latent dimension for teacher_net generation; feature dimension for
    /// gaussian_blobs and for classification teachers.
    pub input_dim: usize,
    /// Completion-task corruption: each input coordinate is zeroed with this
    /// probability, while the reconstruction target stays uncorrupted.
    #[serde(default)]
    pub mask_fraction: Option<f64>,
}

impl SyntheticSpec {
    pub fn dataset_count(&self) -> usize {
        self.clusters.iter().map(|c| c.members.len()).sum()
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.clusters.is_empty() {
            return Err(CliError::Config("synthetic spec has no clusters".into()));
        }
        if self.samples_per_dataset == 0 {
            return Err(CliError::Config("samples_per_dataset must be >= 1".into()));
        }
        if self.input_dim == 0 {
            return Err(CliError::Config("input_dim must be >= 1".into()));
        }
        if self.noise_std < 0.0 {
            return Err(CliError::Config("noise_std must be >= 0".into()));
        }
        if let Some(fraction) = self.mask_fraction {
            if !(0.0..1.0).contains(&fraction) {
                return Err(CliError::Config("mask_fraction must lie in [0, 1)".into()));
            }
            if self.kind != SyntheticKind::TeacherNet {
                return Err(CliError::Config(
                    "mask_fraction applies to teacher_net generation only".into(),
                ));
            }
        }
        let n = self.dataset_count();
        let mut seen = vec![false; n];
        for cluster in &self.clusters {
            if cluster.perturbation_std < 0.0 {
                return Err(CliError::Config("perturbation_std must be >= 0".into()));
            }
            for &id in &cluster.members {
                if id >= n || seen[id] {
                    return Err(CliError::Config(format!(
                        "dataset ids must cover 0..{n} exactly once (id {id})"
                    )));
                }
                seen[id] = true;
            }
        }
        Ok(())
    }
}

/// The architecture of the hidden generator networks.
fn teacher_spec(input_dim: usize, out_dim: usize) -> NetworkSpec {
    let hidden = (2 * input_dim).max(8);
    NetworkSpec::from_dims(
        &[input_dim, hidden, out_dim],
        &[Activation::Tanh, Activation::Identity],
        LossKind::Reconstruction,
    )
    .expect("teacher dims are valid by construction")
}

/// A member's generator: the cluster teacher with per-entry Gaussian
/// perturbation drawn from the member's own stream.
fn member_teacher_params(
    spec: &NetworkSpec,
    cluster: &ClusterSpec,
    id: usize,
    master_seed: u64,
) -> Vec<LayerParams> {
    let teacher = ParamEnsemble::init_gaussian(spec, &[cluster.teacher_seed]);
    let mut params = teacher.network(0).to_vec();
    if cluster.perturbation_std > 0.0 {
        let mut rng = Rng::new(child_seed(master_seed, PERTURB_STREAM + id as u64));
        for layer in &mut params {
            for w in layer.weights.as_mut_slice() {
                *w += rng.normal(0.0, cluster.perturbation_std);
            }
            for b in &mut layer.bias {
                *b += rng.normal(0.0, cluster.perturbation_std);
            }
        }
    }
    params
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap()
}

/// Generates every dataset described by the spec.
///
/// `record_dim` is the feature dimension the experiment expects and
/// `n_classes` the label count for labeled tasks. Teacher generators map a
/// latent Gaussian to records (autoencoder) or features to logits
/// (classification); blobs label Gaussian features by a perturbed linear
/// separator.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    task: Task,
    record_dim: usize,
    n_classes: usize,
    master_seed: u64,
) -> CliResult<Vec<Dataset>> {
    spec.validate()?;
    let n = spec.dataset_count();
    let total = spec.samples_per_dataset + spec.test_samples;
    let mut datasets: Vec<Option<Dataset>> = (0..n).map(|_| None).collect();
    match (spec.kind, task) {
        (SyntheticKind::TeacherNet, Task::Autoencoder) => {
            let t_spec = teacher_spec(spec.input_dim, record_dim);
            for cluster in &spec.clusters {
                for &id in &cluster.members {
                    let params = member_teacher_params(&t_spec, cluster, id, master_seed);
                    let mut rng = Rng::new(child_seed(master_seed, RECORD_STREAM + id as u64));
                    let mut rows = Vec::with_capacity(total);
                    for _ in 0..total {
                        let z: Vec<f64> =
                            (0..spec.input_dim).map(|_| rng.normal(0.0, 1.0)).collect();
                        let (mut out, _) = forward(&t_spec, &params, &z);
                        for v in &mut out {
                            *v += rng.normal(0.0, spec.noise_std);
                        }
                        rows.push(out);
                    }
                    let mut dataset = finish_dataset(id, rows, None, spec);
                    if let Some(fraction) = spec.mask_fraction {
                        // A separate stream keeps record values comparable
                        // with and without masking.
                        let mut mask_rng =
                            Rng::new(child_seed(master_seed, MASK_STREAM + id as u64));
                        let mut mask = Matrix::zeros(total, record_dim);
                        for value in mask.as_mut_slice() {
                            *value = if mask_rng.next_f64() < fraction { 0.0 } else { 1.0 };
                        }
                        dataset.mask = Some(mask);
                    }
                    datasets[id] = Some(dataset);
                }
            }
        }
        (SyntheticKind::TeacherNet, Task::Classification) => {
            if spec.input_dim != record_dim {
                return Err(CliError::Config(format!(
                    "classification teachers need input_dim == network input dim ({} vs {record_dim})",
                    spec.input_dim
                )));
            }
            let t_spec = teacher_spec(record_dim, n_classes);
            for cluster in &spec.clusters {
                for &id in &cluster.members {
                    let params = member_teacher_params(&t_spec, cluster, id, master_seed);
                    let mut rng = Rng::new(child_seed(master_seed, RECORD_STREAM + id as u64));
                    let mut rows = Vec::with_capacity(total);
                    let mut labels = Vec::with_capacity(total);
                    for _ in 0..total {
                        let x: Vec<f64> =
                            (0..record_dim).map(|_| rng.normal(0.0, 1.0)).collect();
                        let (mut logits, _) = forward(&t_spec, &params, &x);
                        for v in &mut logits {
                            *v += rng.normal(0.0, spec.noise_std);
                        }
                        labels.push(argmax(&logits));
                        rows.push(x);
                    }
                    datasets[id] = Some(finish_dataset(id, rows, Some(labels), spec));
                }
            }
        }
        (SyntheticKind::GaussianBlobs, Task::Classification)
        | (SyntheticKind::GaussianBlobs, Task::SvmJoint)
        | (SyntheticKind::GaussianBlobs, Task::LogregJoint) => {
            if n_classes != 2 {
                return Err(CliError::Config(
                    "gaussian_blobs generates binary labels".into(),
                ));
            }
            for cluster in &spec.clusters {
                let mut seed_rng = Rng::new(cluster.teacher_seed);
                let mut separator: Vec<f64> = (0..spec.input_dim)
                    .map(|_| seed_rng.normal(0.0, 1.0))
                    .collect();
                let bias = seed_rng.normal(0.0, 0.2);
                // Unit-scale separator so noise_std is comparable across dims.
                let norm = separator.iter().map(|v| v * v).sum::<f64>().sqrt();
                for v in &mut separator {
                    *v /= norm.max(1e-12);
                }
                for &id in &cluster.members {
                    let mut member = separator.clone();
                    let mut member_bias = bias;
                    if cluster.perturbation_std > 0.0 {
                        let mut rng =
                            Rng::new(child_seed(master_seed, PERTURB_STREAM + id as u64));
                        for v in &mut member {
                            *v += rng.normal(0.0, cluster.perturbation_std);
                        }
                        member_bias += rng.normal(0.0, cluster.perturbation_std);
                    }
                    let mut rng = Rng::new(child_seed(master_seed, RECORD_STREAM + id as u64));
                    let mut rows = Vec::with_capacity(total);
                    let mut labels = Vec::with_capacity(total);
                    for _ in 0..total {
                        let x: Vec<f64> =
                            (0..spec.input_dim).map(|_| rng.normal(0.0, 1.0)).collect();
                        let score: f64 = member.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>()
                            + member_bias
                            + rng.normal(0.0, spec.noise_std);
                        labels.push(if score > 0.0 { 1 } else { 0 });
                        rows.push(x);
                    }
                    datasets[id] = Some(finish_dataset(id, rows, Some(labels), spec));
                }
            }
        }
        (kind, task) => {
            return Err(CliError::Config(format!(
                "synthetic kind {kind:?} does not provide data for task {task:?}"
            )));
        }
    }
    Ok(datasets.into_iter().map(Option::unwrap).collect())
}

fn finish_dataset(
    id: usize,
    rows: Vec<Vec<f64>>,
    labels: Option<Vec<usize>>,
    spec: &SyntheticSpec,
) -> Dataset {
    let mut dataset = Dataset::from_features(id, Matrix::from_rows(&rows), labels);
    dataset.train_idx = (0..spec.samples_per_dataset).collect();
    dataset.test_idx =
        (spec.samples_per_dataset..spec.samples_per_dataset + spec.test_samples).collect();
    dataset
}

/// Convenience spec with two planted clusters of equal size.
pub fn two_cluster_spec(
    members_per_cluster: usize,
    samples: usize,
    test_samples: usize,
    input_dim: usize,
    noise_std: f64,
    perturbation_std: f64,
) -> SyntheticSpec {
    SyntheticSpec {
        kind: SyntheticKind::TeacherNet,
        clusters: vec![
            ClusterSpec {
                members: (0..members_per_cluster).collect(),
                teacher_seed: 101,
                perturbation_std,
            },
            ClusterSpec {
                members: (members_per_cluster..2 * members_per_cluster).collect(),
                teacher_seed: 909,
                perturbation_std,
            },
        ],
        samples_per_dataset: samples,
        test_samples,
        noise_std,
        input_dim,
        mask_fraction: None,
    }
}
