//! Experiment configuration: a single JSON document selecting the task, the
//! data sources, the network architecture, and the training knobs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fusenet::network::{Activation, LossKind, NetworkSpec};
use fusenet::trainer::{TrainConfig, TrainMode};

use crate::synth::SyntheticSpec;
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Autoencoder,
    SvmJoint,
    LogregJoint,
}

impl Task {
    pub fn is_network(self) -> bool {
        matches!(self, Task::Classification | Task::Autoencoder)
    }
}

/// One file-backed dataset source.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum FileSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        label_column: Option<usize>,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
    Idx {
        images: PathBuf,
        #[serde(default)]
        labels: Option<PathBuf>,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
}

fn default_test_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum DataConfig {
    Files(Vec<FileSource>),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Dim chain: `[8, 16, 8]` gives layers 8->16 and 16->8.
    pub dims: Vec<usize>,
    pub activations: Vec<String>,
    pub loss: String,
}

impl NetworkConfig {
    pub fn to_spec(&self) -> CliResult<NetworkSpec> {
        let activations: Vec<Activation> = self
            .activations
            .iter()
            .map(|name| match name.as_str() {
                "relu" => Ok(Activation::Relu),
                "tanh" => Ok(Activation::Tanh),
                "sigmoid" => Ok(Activation::Sigmoid),
                "identity" => Ok(Activation::Identity),
                other => Err(CliError::Config(format!("unknown activation '{other}'"))),
            })
            .collect::<CliResult<_>>()?;
        let loss = match self.loss.as_str() {
            "cross_entropy" => LossKind::CrossEntropy,
            "reconstruction" => LossKind::Reconstruction,
            other => {
                return Err(CliError::Config(format!("unknown loss '{other}'")));
            }
        };
        NetworkSpec::from_dims(&self.dims, &activations, loss).map_err(CliError::from)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub mode: String,
    pub lambda: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub inner_epochs_per_sweep: usize,
    pub sweeps_per_irls_iter: usize,
    pub max_irls_iters: usize,
    pub delta_tol: f64,
    pub init_sweeps: usize,
    pub init_rel_tol: f64,
    pub baseline_epochs: usize,
    pub pretrain_epochs: Option<usize>,
    pub jacobi: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            mode: "joint_robust".into(),
            lambda: d.lambda,
            lr: d.lr,
            batch_size: d.batch_size,
            inner_epochs_per_sweep: d.inner_epochs_per_sweep,
            sweeps_per_irls_iter: d.sweeps_per_irls_iter,
            max_irls_iters: d.max_irls_iters,
            delta_tol: d.delta_tol,
            init_sweeps: d.init_sweeps,
            init_rel_tol: d.init_rel_tol,
            baseline_epochs: d.baseline_epochs,
            pretrain_epochs: d.pretrain_epochs,
            jacobi: d.jacobi,
        }
    }
}

impl TrainSection {
    pub fn mode(&self) -> CliResult<TrainMode> {
        match self.mode.as_str() {
            "joint_robust" => Ok(TrainMode::JointRobust),
            "isolated" => Ok(TrainMode::Isolated),
            "l2_reg" => Ok(TrainMode::L2Reg),
            "shareall" => Ok(TrainMode::Shareall),
            "pretrain_finetune" => Ok(TrainMode::PretrainFinetune),
            other => Err(CliError::Config(format!("unknown train mode '{other}'"))),
        }
    }

    pub fn to_train_config(&self, seed: u64) -> CliResult<TrainConfig> {
        let cfg = TrainConfig {
            mode: self.mode()?,
            lambda: self.lambda,
            lr: self.lr,
            batch_size: self.batch_size,
            inner_epochs_per_sweep: self.inner_epochs_per_sweep,
            sweeps_per_irls_iter: self.sweeps_per_irls_iter,
            max_irls_iters: self.max_irls_iters,
            delta_tol: self.delta_tol,
            init_sweeps: self.init_sweeps,
            init_rel_tol: self.init_rel_tol,
            baseline_epochs: self.baseline_epochs,
            pretrain_epochs: self.pretrain_epochs,
            jacobi: self.jacobi,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvexSection {
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    pub lr: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for ConvexSection {
    fn default() -> Self {
        let d = fusenet::convex::ConvexConfig::default();
        ConvexSection {
            lambda: d.lambda,
            mu: d.mu,
            gamma: d.gamma,
            lr: d.lr,
            max_iters: d.max_iters,
            tol: d.tol,
        }
    }
}

impl ConvexSection {
    pub fn to_convex_config(&self) -> CliResult<fusenet::convex::ConvexConfig> {
        let cfg = fusenet::convex::ConvexConfig {
            lambda: self.lambda,
            mu: self.mu,
            gamma: self.gamma,
            lr: self.lr,
            max_iters: self.max_iters,
            tol: self.tol,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_graph_k() -> usize {
    3
}

fn default_graph_metric() -> String {
    "weight".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub datasets: DataConfig,
    /// Dataset display names (defaults to ds0, ds1, ...).
    #[serde(default)]
    pub names: Option<Vec<String>>,
    #[serde(default)]
    pub network: Option<NetworkConfig>,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub convex: ConvexSection,
    /// Mutual top-k size for the sharing graphs.
    #[serde(default = "default_graph_k")]
    pub graph_k: usize,
    /// "weight" ranks neighbors by final influence weight,
    /// "inverse_distance" by closeness of the layer-pair parameters.
    #[serde(default = "default_graph_metric")]
    pub graph_metric: String,
}

/// Reads and validates a configuration file. The `FUSENET_SEED` environment
/// variable, when set, overrides the configured seed.
pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|err| CliError::Config(format!("cannot read {}: {err}", path.display())))?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|err| CliError::Config(format!("cannot parse {}: {err}", path.display())))?;
    if let Ok(value) = std::env::var("FUSENET_SEED") {
        config.seed = value.parse().map_err(|_| {
            CliError::Config(format!("FUSENET_SEED must be an unsigned integer, got '{value}'"))
        })?;
    }
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    /// Structural checks that need no file I/O beyond existence tests.
    pub fn validate(&self) -> CliResult<()> {
        let n = match &self.datasets {
            DataConfig::Files(sources) => {
                if sources.is_empty() {
                    return Err(CliError::Config("no dataset sources".into()));
                }
                for source in sources {
                    let (path, fraction) = match source {
                        FileSource::Csv { path, test_fraction, .. } => (path, *test_fraction),
                        FileSource::Idx { images, test_fraction, .. } => (images, *test_fraction),
                    };
                    if !path.exists() {
                        return Err(CliError::Config(format!(
                            "dataset file {} does not exist",
                            path.display()
                        )));
                    }
                    if let FileSource::Idx { labels: Some(labels), .. } = source {
                        if !labels.exists() {
                            return Err(CliError::Config(format!(
                                "label file {} does not exist",
                                labels.display()
                            )));
                        }
                    }
                    if !(0.0..1.0).contains(&fraction) {
                        return Err(CliError::Config(
                            "test_fraction must lie in [0, 1)".into(),
                        ));
                    }
                }
                sources.len()
            }
            DataConfig::Synthetic(spec) => {
                spec.validate()?;
                spec.dataset_count()
            }
        };
        if let Some(names) = &self.names {
            if names.len() != n {
                return Err(CliError::Config(format!(
                    "{} names for {} datasets",
                    names.len(),
                    n
                )));
            }
        }
        if self.task.is_network() {
            let network = self.network.as_ref().ok_or_else(|| {
                CliError::Config("network section required for network tasks".into())
            })?;
            let spec = network.to_spec()?;
            match self.task {
                Task::Classification => {
                    if spec.loss != LossKind::CrossEntropy {
                        return Err(CliError::Config(
                            "classification task needs loss = cross_entropy".into(),
                        ));
                    }
                }
                Task::Autoencoder => {
                    if spec.loss != LossKind::Reconstruction {
                        return Err(CliError::Config(
                            "autoencoder task needs loss = reconstruction".into(),
                        ));
                    }
                    if spec.input_dim() != spec.output_dim() {
                        return Err(CliError::Config(
                            "autoencoder input and output dims must match".into(),
                        ));
                    }
                }
                _ => unreachable!(),
            }
            self.train.mode()?;
            self.train.to_train_config(self.seed)?;
        } else {
            self.convex.to_convex_config()?;
        }
        match self.graph_metric.as_str() {
            "weight" | "inverse_distance" => {}
            other => {
                return Err(CliError::Config(format!("unknown graph metric '{other}'")));
            }
        }
        Ok(())
    }

    pub fn dataset_names(&self, n: usize) -> Vec<String> {
        match &self.names {
            Some(names) => names.clone(),
            None => (0..n).map(|i| format!("ds{i}")).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    // load_config reads FUSENET_SEED; tests touching the environment must
    // not interleave.
    static ENV_LOCK: Mutex<()> = Mutex::new(());

    fn minimal_config(dir: &Path) -> String {
        format!(
            r#"{{
                "task": "autoencoder",
                "seed": 5,
                "output_dir": "{}",
                "datasets": {{"synthetic": {{
                    "kind": "teacher_net",
                    "clusters": [{{"members": [0, 1], "teacher_seed": 3, "perturbation_std": 0.05}}],
                    "samples_per_dataset": 20,
                    "test_samples": 5,
                    "noise_std": 0.05,
                    "input_dim": 2
                }}}},
                "network": {{"dims": [4, 6, 4], "activations": ["tanh", "identity"], "loss": "reconstruction"}}
            }}"#,
            dir.display()
        )
    }

    #[test]
    fn parses_minimal_config_with_defaults() {
        let _guard = ENV_LOCK.lock().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        fs::write(&path, minimal_config(dir.path())).unwrap();
        let config = load_config(&path).unwrap();
        assert_eq!(config.seed, 5);
        assert_eq!(config.train.lambda, 10.0);
        assert_eq!(config.graph_k, 3);
        assert!(config.validate().is_ok());
    }

    #[test]
    fn seed_env_var_overrides_config() {
        let _guard = ENV_LOCK.lock().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        fs::write(&path, minimal_config(dir.path())).unwrap();
        std::env::set_var("FUSENET_SEED", "777");
        let config = load_config(&path);
        std::env::remove_var("FUSENET_SEED");
        assert_eq!(config.unwrap().seed, 777);
    }

    #[test]
    fn missing_file_source_is_a_config_error() {
        let _guard = ENV_LOCK.lock().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            r#"{{
                "task": "autoencoder",
                "seed": 1,
                "output_dir": "{}",
                "datasets": {{"files": [{{"csv": {{"path": "/nonexistent/file.csv"}}}}]}},
                "network": {{"dims": [2, 2], "activations": ["identity"], "loss": "reconstruction"}}
            }}"#,
            dir.path().display()
        );
        let path = dir.path().join("config.json");
        fs::write(&path, text).unwrap();
        let err = load_config(&path).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("does not exist"));
    }

    #[test]
    fn classification_task_requires_cross_entropy() {
        let _guard = ENV_LOCK.lock().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let text = minimal_config(dir.path()).replace("\"autoencoder\"", "\"classification\"");
        let path = dir.path().join("config.json");
        fs::write(&path, text).unwrap();
        let err = load_config(&path).unwrap_err();
        assert!(err.to_string().contains("cross_entropy"));
    }
}
