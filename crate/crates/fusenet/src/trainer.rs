//! The full joint-training pipeline: squared-norm initialization, the
//! reweighting/optimization alternation, block-coordinate descent over
//! networks, and the baseline training modes.
//!
//! The coupled objective is
//!
//! ```text
//! sum_i f_i(theta_i) +
//!     2 * lambda * sum_{i<j} sum_pairs rho(||pair_ij diff||, sigma_l)
//! ```
//!
//! The factor 2 keeps `lambda` on the same scale as the ordered-double-sum
//! convention (every unordered pair counted twice), so the default
//! `lambda = 10` behaves the same as in that convention. Reweighting replaces
//! the robust norm by `w * distance^2`, which regroups into per-layer
//! quadratic pulls (see [`crate::fusion::layer_pull_coeffs`]); each network is
//! then trained in turn against the weighted average of the others.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fusion::{
    self, coeffs_from_weights, pair_distances, robust_norm, FusionState, PairTensor,
};
use crate::network::{
    accuracy, sgd_epoch, task_loss, Dataset, LayerPull, LossKind, NetworkSpec, ParamEnsemble,
};
use crate::numerics::{child_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    JointRobust,
    Isolated,
    L2Reg,
    Shareall,
    PretrainFinetune,
}

/// Knobs for joint and baseline training. `Default` gives the values used
/// throughout the experiments.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub mode: TrainMode,
    /// Fusion strength. Internally every unordered pair is counted twice, so
    /// this matches the ordered-pair convention.
    pub lambda: f64,
    pub lr: f64,
    pub batch_size: usize,
    /// Epochs of SGD per network within one sweep.
    pub inner_epochs_per_sweep: usize,
    /// Block-coordinate sweeps per reweighting iteration.
    pub sweeps_per_irls_iter: usize,
    pub max_irls_iters: usize,
    /// Stop reweighting once the largest weight change falls below this.
    pub delta_tol: f64,
    /// Cap on initialization sweeps.
    pub init_sweeps: usize,
    /// Relative objective change below which initialization stops early.
    pub init_rel_tol: f64,
    /// Epoch budget for the baseline modes.
    pub baseline_epochs: usize,
    /// Pretrain share of `baseline_epochs` for pretrain-finetune; the rest is
    /// per-dataset fine-tuning. `None` splits 50/50.
    pub pretrain_epochs: Option<usize>,
    /// Freeze anchors at sweep start and update networks independently (and
    /// in parallel). Off by default: the sequential in-order updates follow
    /// the one-network-at-a-time scheme.
    pub jacobi: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::JointRobust,
            lambda: 10.0,
            lr: 1e-2,
            batch_size: 32,
            inner_epochs_per_sweep: 1,
            sweeps_per_irls_iter: 1,
            max_irls_iters: 12,
            delta_tol: 1e-2,
            init_sweeps: 20,
            init_rel_tol: 1e-3,
            baseline_epochs: 32,
            pretrain_epochs: None,
            jacobi: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::InvalidConfig("lambda must be >= 0".into()));
        }
        if self.delta_tol <= 0.0 {
            return Err(Error::InvalidConfig("delta_tol must be > 0".into()));
        }
        if self.max_irls_iters < 1 {
            return Err(Error::InvalidConfig("max_irls_iters must be >= 1".into()));
        }
        if self.lr < 0.0 {
            return Err(Error::InvalidConfig("lr must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.inner_epochs_per_sweep == 0 || self.sweeps_per_irls_iter == 0 {
            return Err(Error::InvalidConfig(
                "epochs per sweep and sweeps per iteration must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Coupling applied to each unordered pair (doubled single-pair lambda).
    fn coupling(&self) -> f64 {
        2.0 * self.lambda
    }

    /// Seed of the parameter-initialization stream for dataset `id`.
    pub fn init_seed(&self, id: usize) -> u64 {
        child_seed(self.seed, 2 * id as u64)
    }

    /// Seed of the batch-shuffling stream for dataset `id`.
    pub fn shuffle_seed(&self, id: usize) -> u64 {
        child_seed(self.seed, 2 * id as u64 + 1)
    }
}

/// Metrics captured after one completed iteration (or epoch, for baselines).
#[derive(Debug, Clone)]
pub struct IterRecord {
    /// 0 is the initialization phase; reweighting iterations count from 1.
    pub iteration: usize,
    /// Cumulative SGD steps across all networks.
    pub sgd_steps: usize,
    pub train_loss: Vec<f64>,
    pub test_loss: Vec<Option<f64>>,
    pub test_accuracy: Vec<Option<f64>>,
    pub consistency_loss: Option<f64>,
    pub delta: Option<f64>,
    /// Seconds since training started. Diagnostic only; kept out of the
    /// deterministic metric files.
    pub elapsed: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub records: Vec<IterRecord>,
    pub final_weights: Option<PairTensor>,
}

/// Objective values logged around block-coordinate sweeps.
#[derive(Debug, Clone)]
pub struct SweepLog {
    /// Joint objective before the first sweep and after each sweep.
    pub objectives: Vec<f64>,
    pub sgd_steps: usize,
}

/// Pull strength and anchor vector for network `i`, layer `l`: the
/// coefficient-weighted average of the other networks' layer parameters.
/// Returns `None` when every coefficient is zero (no coupling for this
/// layer).
pub fn anchor(
    ensemble: &ParamEnsemble,
    coeffs: &PairTensor,
    i: usize,
    l: usize,
) -> Option<(f64, Vec<f64>)> {
    let n = ensemble.n();
    let strength: f64 = (0..n).filter(|&j| j != i).map(|j| coeffs.get(i, j, l)).sum();
    if strength <= 0.0 {
        return None;
    }
    // Normalizing the coefficients first keeps a single contributor's anchor
    // exactly equal to that network's layer (c / c == 1).
    let mut anchor_vec = vec![0.0; ensemble.network(i)[l].flat_len()];
    for j in 0..n {
        if j == i {
            continue;
        }
        let c = coeffs.get(i, j, l);
        if c == 0.0 {
            continue;
        }
        let share = c / strength;
        for (slot, v) in anchor_vec.iter_mut().zip(ensemble.layer_flat(j, l)) {
            *slot += share * v;
        }
    }
    Some((strength, anchor_vec))
}

fn build_pulls(
    ensemble: &ParamEnsemble,
    coeffs: &PairTensor,
    i: usize,
    coupling: f64,
) -> Option<Vec<Option<LayerPull>>> {
    if coupling == 0.0 || ensemble.n() < 2 {
        return None;
    }
    Some(
        (0..ensemble.spec().layer_count())
            .map(|l| {
                anchor(ensemble, coeffs, i, l).map(|(strength, anchor)| LayerPull {
                    strength: coupling * strength,
                    anchor,
                })
            })
            .collect(),
    )
}

/// The weighted joint objective: summed full-batch train losses plus the
/// pairwise per-layer quadratic coupling.
pub fn weighted_joint_objective(
    datasets: &[Dataset],
    ensemble: &ParamEnsemble,
    coeffs: &PairTensor,
    coupling: f64,
) -> Result<f64> {
    let spec = ensemble.spec();
    let mut total = 0.0;
    for (i, dataset) in datasets.iter().enumerate() {
        total += task_loss(spec, ensemble.network(i), dataset, &dataset.train_idx)?;
    }
    if coupling > 0.0 {
        for i in 0..ensemble.n() {
            for j in (i + 1)..ensemble.n() {
                for l in 0..spec.layer_count() {
                    let c = coeffs.get(i, j, l);
                    if c > 0.0 {
                        total += coupling
                            * c
                            * ensemble.network(i)[l].sq_distance(&ensemble.network(j)[l]);
                    }
                }
            }
        }
    }
    Ok(total)
}

/// Runs `sweeps` block-coordinate sweeps of the weighted joint problem.
///
/// Each sweep visits networks in order. In the default sequential mode the
/// anchors for network `i` are rebuilt from the other networks' current
/// parameters; in Jacobi mode all anchors are frozen at sweep start and the
/// per-network updates run in parallel. The joint objective is logged before
/// the first sweep and after each sweep.
pub fn solve_weighted_joint(
    datasets: &[Dataset],
    ensemble: &mut ParamEnsemble,
    coeffs: &PairTensor,
    cfg: &TrainConfig,
    shuffle_rngs: &mut [Rng],
    sweeps: usize,
) -> Result<SweepLog> {
    assert_eq!(datasets.len(), ensemble.n(), "one dataset per network");
    assert_eq!(shuffle_rngs.len(), ensemble.n(), "one rng per network");
    let coupling = cfg.coupling();
    let spec = ensemble.spec().clone();
    let initial = weighted_joint_objective(datasets, ensemble, coeffs, coupling)?;
    let mut log = SweepLog {
        objectives: vec![initial],
        sgd_steps: 0,
    };
    let guard = 1e3 * initial.max(1.0);
    for _ in 0..sweeps {
        if cfg.jacobi {
            let snapshot = ensemble.clone();
            let updates: Vec<Result<(Vec<crate::network::LayerParams>, Rng, usize)>> = (0
                ..ensemble.n())
                .into_par_iter()
                .map(|i| {
                    let mut params = snapshot.network(i).to_vec();
                    let mut rng = shuffle_rngs[i].clone();
                    let pulls = build_pulls(&snapshot, coeffs, i, coupling);
                    let mut steps = 0;
                    for _ in 0..cfg.inner_epochs_per_sweep {
                        steps += sgd_epoch(
                            &spec,
                            &mut params,
                            &datasets[i],
                            cfg.lr,
                            cfg.batch_size,
                            &mut rng,
                            pulls.as_deref(),
                        )?;
                    }
                    Ok((params, rng, steps))
                })
                .collect();
            for (i, update) in updates.into_iter().enumerate() {
                let (params, rng, steps) = update?;
                *ensemble.network_mut(i) = params;
                shuffle_rngs[i] = rng;
                log.sgd_steps += steps;
            }
        } else {
            for i in 0..ensemble.n() {
                let pulls = build_pulls(ensemble, coeffs, i, coupling);
                let mut params = std::mem::take(ensemble.network_mut(i));
                for _ in 0..cfg.inner_epochs_per_sweep {
                    let stepped = sgd_epoch(
                        &spec,
                        &mut params,
                        &datasets[i],
                        cfg.lr,
                        cfg.batch_size,
                        &mut shuffle_rngs[i],
                        pulls.as_deref(),
                    );
                    match stepped {
                        Ok(steps) => log.sgd_steps += steps,
                        Err(err) => {
                            *ensemble.network_mut(i) = params;
                            return Err(err);
                        }
                    }
                }
                *ensemble.network_mut(i) = params;
            }
        }
        let objective = weighted_joint_objective(datasets, ensemble, coeffs, coupling)?;
        log.objectives.push(objective);
        if objective > guard {
            return Err(Error::Diverged(format!(
                "joint objective grew from {initial:.6e} to {objective:.6e}; lower the learning rate"
            )));
        }
    }
    Ok(log)
}

fn fresh_ensemble_and_rngs(
    spec: &NetworkSpec,
    datasets: &[Dataset],
    cfg: &TrainConfig,
) -> (ParamEnsemble, Vec<Rng>) {
    let init_seeds: Vec<u64> = datasets.iter().map(|d| cfg.init_seed(d.id)).collect();
    let ensemble = ParamEnsemble::init_gaussian(spec, &init_seeds);
    let rngs = datasets
        .iter()
        .map(|d| Rng::new(cfg.shuffle_seed(d.id)))
        .collect();
    (ensemble, rngs)
}

fn validate_inputs(spec: &NetworkSpec, datasets: &[Dataset], cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    spec.validate()?;
    if datasets.is_empty() {
        return Err(Error::InvalidConfig("no datasets".into()));
    }
    let mut ids: Vec<usize> = datasets.iter().map(|d| d.id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != datasets.len() {
        return Err(Error::InvalidConfig("dataset ids must be unique".into()));
    }
    for dataset in datasets {
        dataset.validate_for(spec)?;
        if dataset.train_idx.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "dataset {} has an empty train split",
                dataset.id
            )));
        }
    }
    Ok(())
}

/// Runs the initialization sweeps (all pair weights one) on `ensemble`,
/// stopping early once the relative objective change drops below
/// `cfg.init_rel_tol`. Returns the sweep count and SGD steps taken.
fn l2_phase(
    datasets: &[Dataset],
    ensemble: &mut ParamEnsemble,
    cfg: &TrainConfig,
    rngs: &mut [Rng],
    max_sweeps: usize,
    early_stop: bool,
) -> Result<(usize, usize)> {
    let layer_pairs = ensemble.spec().layer_count().saturating_sub(1).max(1);
    let ones = PairTensor::filled(ensemble.n(), layer_pairs, 1.0);
    let coeffs = coeffs_from_weights(&ones);
    let mut steps = 0;
    let mut sweeps_run = 0;
    let mut previous: Option<f64> = None;
    for _ in 0..max_sweeps {
        let log = solve_weighted_joint(datasets, ensemble, &coeffs, cfg, rngs, 1)?;
        steps += log.sgd_steps;
        sweeps_run += 1;
        let after = *log.objectives.last().unwrap();
        if early_stop {
            let before = previous.unwrap_or(log.objectives[0]);
            if (before - after).abs() <= cfg.init_rel_tol * before.abs().max(1.0) {
                break;
            }
        }
        previous = Some(after);
    }
    Ok((sweeps_run, steps))
}

/// Initialization: solve the joint problem with the robust norm replaced by
/// the squared norm (all pair weights one), starting from per-dataset
/// Gaussian parameters.
pub fn init_l2(
    spec: &NetworkSpec,
    datasets: &[Dataset],
    cfg: &TrainConfig,
) -> Result<ParamEnsemble> {
    validate_inputs(spec, datasets, cfg)?;
    let (mut ensemble, mut rngs) = fresh_ensemble_and_rngs(spec, datasets, cfg);
    l2_phase(
        datasets,
        &mut ensemble,
        cfg,
        &mut rngs,
        cfg.init_sweeps,
        true,
    )?;
    Ok(ensemble)
}

#[allow(clippy::too_many_arguments)]
fn record_metrics(
    spec: &NetworkSpec,
    datasets: &[Dataset],
    ensemble: &ParamEnsemble,
    sigma: Option<&[f64]>,
    iteration: usize,
    sgd_steps: usize,
    delta: Option<f64>,
    started: Instant,
) -> Result<IterRecord> {
    let mut train_loss = Vec::with_capacity(datasets.len());
    let mut test_loss = Vec::with_capacity(datasets.len());
    let mut test_accuracy = Vec::with_capacity(datasets.len());
    for (i, dataset) in datasets.iter().enumerate() {
        train_loss.push(task_loss(spec, ensemble.network(i), dataset, &dataset.train_idx)?);
        if dataset.test_idx.is_empty() {
            test_loss.push(None);
            test_accuracy.push(None);
        } else {
            test_loss.push(Some(task_loss(
                spec,
                ensemble.network(i),
                dataset,
                &dataset.test_idx,
            )?));
            test_accuracy.push(match spec.loss {
                LossKind::CrossEntropy => Some(accuracy(
                    spec,
                    ensemble.network(i),
                    dataset,
                    &dataset.test_idx,
                )?),
                LossKind::Reconstruction => None,
            });
        }
    }
    let consistency = sigma.map(|s| fusion::consistency_loss(ensemble, s));
    Ok(IterRecord {
        iteration,
        sgd_steps,
        train_loss,
        test_loss,
        test_accuracy,
        consistency_loss: consistency,
        delta,
        elapsed: started.elapsed().as_secs_f64(),
    })
}

/// The full robust joint-training loop.
///
/// Initializes with the squared-norm problem, estimates the per-layer-pair
/// scales from that solution, then alternates reweighting and weighted solves
/// until the weights stop moving (or the iteration budget runs out).
pub fn irls_train(
    spec: &NetworkSpec,
    datasets: &[Dataset],
    cfg: &TrainConfig,
) -> Result<(ParamEnsemble, TrainHistory, FusionState)> {
    if cfg.mode != TrainMode::JointRobust {
        return Err(Error::InvalidConfig(
            "irls_train requires mode = joint_robust".into(),
        ));
    }
    validate_inputs(spec, datasets, cfg)?;
    if spec.layer_count() < 2 {
        return Err(Error::InvalidConfig(
            "layer-pair fusion needs at least two layers".into(),
        ));
    }
    let started = Instant::now();
    let n = datasets.len();
    let layer_pairs = spec.layer_count() - 1;
    let (mut ensemble, mut rngs) = fresh_ensemble_and_rngs(spec, datasets, cfg);
    let (_, mut total_steps) = l2_phase(
        datasets,
        &mut ensemble,
        cfg,
        &mut rngs,
        cfg.init_sweeps,
        true,
    )?;

    let floor = fusion::sigma_floor(&ensemble);
    let sigma = if n >= 2 {
        fusion::estimate_sigma(&pair_distances(&ensemble), floor)
    } else {
        vec![floor; layer_pairs]
    };

    let mut history = TrainHistory::default();
    history.records.push(record_metrics(
        spec,
        datasets,
        &ensemble,
        Some(&sigma),
        0,
        total_steps,
        None,
        started,
    )?);

    let mut state = FusionState::initial(n, layer_pairs, sigma.clone());
    for iteration in 1..=cfg.max_irls_iters {
        let table = pair_distances(&ensemble);
        let weights = fusion::compute_weights(&table, &sigma);
        #[cfg(debug_assertions)]
        verify_splitting_identity(&table, &weights, &sigma);
        let delta = state.advance(weights);
        let coeffs = coeffs_from_weights(&state.weights);
        let log = solve_weighted_joint(
            datasets,
            &mut ensemble,
            &coeffs,
            cfg,
            &mut rngs,
            cfg.sweeps_per_irls_iter,
        )?;
        total_steps += log.sgd_steps;
        history.records.push(record_metrics(
            spec,
            datasets,
            &ensemble,
            Some(&sigma),
            iteration,
            total_steps,
            Some(delta),
            started,
        )?);
        if delta <= cfg.delta_tol {
            break;
        }
    }
    history.final_weights = Some(state.weights.clone());
    Ok((ensemble, history, state))
}

/// The reweighting surrogate agrees with the robust term exactly at the point
/// where the weights were computed: `w * d^2 == rho(d, sigma)`.
#[cfg(debug_assertions)]
fn verify_splitting_identity(table: &PairTensor, weights: &PairTensor, sigma: &[f64]) {
    let mut surrogate = 0.0;
    let mut robust = 0.0;
    for (l, &sig) in sigma.iter().enumerate() {
        for i in 0..table.n() {
            for j in (i + 1)..table.n() {
                let d = table.get(i, j, l);
                surrogate += weights.get(i, j, l) * d * d;
                robust += robust_norm(d, sig);
            }
        }
    }
    debug_assert!(
        (surrogate - robust).abs() <= 1e-9 * robust.abs().max(1.0),
        "splitting identity violated: {surrogate} vs {robust}"
    );
}

fn union_of_train_splits(spec: &NetworkSpec, datasets: &[Dataset]) -> Dataset {
    let dim = spec.input_dim();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut masks: Vec<Vec<f64>> = Vec::new();
    let any_mask = datasets.iter().any(|d| d.mask.is_some());
    for dataset in datasets {
        for &record in &dataset.train_idx {
            rows.push(dataset.features.row(record).to_vec());
            if let Some(l) = &dataset.labels {
                labels.push(l[record]);
            }
            if any_mask {
                masks.push(match &dataset.mask {
                    Some(m) => m.row(record).to_vec(),
                    None => vec![1.0; dim],
                });
            }
        }
    }
    let features = crate::numerics::Matrix::from_rows(&rows);
    let label_vec = match spec.loss {
        LossKind::CrossEntropy => Some(labels),
        LossKind::Reconstruction => None,
    };
    let mut union = Dataset::from_features(0, features, label_vec);
    if any_mask {
        union.mask = Some(crate::numerics::Matrix::from_rows(&masks));
    }
    union
}

/// Trains with one of the four baseline modes.
///
/// * isolated: every network trained independently.
/// * l2_reg: the squared-norm coupled problem run for the full budget.
/// * shareall: one parameter set trained on the union of the train splits,
///   replicated per dataset in the returned ensemble.
/// * pretrain_finetune: shareall first, then per-dataset fine-tuning.
pub fn train_baseline(
    spec: &NetworkSpec,
    datasets: &[Dataset],
    cfg: &TrainConfig,
) -> Result<(ParamEnsemble, TrainHistory)> {
    validate_inputs(spec, datasets, cfg)?;
    let started = Instant::now();
    let mut history = TrainHistory::default();
    match cfg.mode {
        TrainMode::JointRobust => Err(Error::InvalidConfig(
            "train_baseline cannot run joint_robust; use irls_train".into(),
        )),
        TrainMode::Isolated => {
            let (mut ensemble, mut rngs) = fresh_ensemble_and_rngs(spec, datasets, cfg);
            let mut steps = 0;
            for epoch in 1..=cfg.baseline_epochs {
                for (i, dataset) in datasets.iter().enumerate() {
                    steps += sgd_epoch(
                        spec,
                        ensemble.network_mut(i),
                        dataset,
                        cfg.lr,
                        cfg.batch_size,
                        &mut rngs[i],
                        None,
                    )?;
                }
                history.records.push(record_metrics(
                    spec, datasets, &ensemble, None, epoch, steps, None, started,
                )?);
            }
            Ok((ensemble, history))
        }
        TrainMode::L2Reg => {
            let (mut ensemble, mut rngs) = fresh_ensemble_and_rngs(spec, datasets, cfg);
            let layer_pairs = spec.layer_count().saturating_sub(1).max(1);
            let ones = PairTensor::filled(ensemble.n(), layer_pairs, 1.0);
            let coeffs = coeffs_from_weights(&ones);
            let mut steps = 0;
            for epoch in 1..=cfg.baseline_epochs {
                let log =
                    solve_weighted_joint(datasets, &mut ensemble, &coeffs, cfg, &mut rngs, 1)?;
                steps += log.sgd_steps;
                history.records.push(record_metrics(
                    spec, datasets, &ensemble, None, epoch, steps, None, started,
                )?);
            }
            Ok((ensemble, history))
        }
        TrainMode::Shareall => {
            let (shared, _, mut history) =
                train_shared(spec, datasets, cfg, cfg.baseline_epochs, started)?;
            let replicated = vec![shared; datasets.len()];
            let ensemble = ParamEnsemble::from_params(spec, replicated);
            history.final_weights = None;
            Ok((ensemble, history))
        }
        TrainMode::PretrainFinetune => {
            let pretrain = cfg
                .pretrain_epochs
                .unwrap_or(cfg.baseline_epochs / 2)
                .min(cfg.baseline_epochs);
            let finetune = cfg.baseline_epochs - pretrain;
            let (shared, mut steps, mut history) =
                train_shared(spec, datasets, cfg, pretrain, started)?;
            let mut ensemble =
                ParamEnsemble::from_params(spec, vec![shared; datasets.len()]);
            let mut rngs: Vec<Rng> = datasets
                .iter()
                .map(|d| Rng::new(cfg.shuffle_seed(d.id)))
                .collect();
            for epoch in 1..=finetune {
                for (i, dataset) in datasets.iter().enumerate() {
                    steps += sgd_epoch(
                        spec,
                        ensemble.network_mut(i),
                        dataset,
                        cfg.lr,
                        cfg.batch_size,
                        &mut rngs[i],
                        None,
                    )?;
                }
                history.records.push(record_metrics(
                    spec,
                    datasets,
                    &ensemble,
                    None,
                    pretrain + epoch,
                    steps,
                    None,
                    started,
                )?);
            }
            Ok((ensemble, history))
        }
    }
}

/// Trains a single parameter set on the union of all train splits, recording
/// per-dataset metrics with the shared parameters each epoch.
fn train_shared(
    spec: &NetworkSpec,
    datasets: &[Dataset],
    cfg: &TrainConfig,
    epochs: usize,
    started: Instant,
) -> Result<(Vec<crate::network::LayerParams>, usize, TrainHistory)> {
    let union = union_of_train_splits(spec, datasets);
    let mut params =
        ParamEnsemble::init_gaussian(spec, &[cfg.init_seed(union.id)]).network(0).to_vec();
    let mut rng = Rng::new(cfg.shuffle_seed(union.id));
    let mut history = TrainHistory::default();
    let mut steps = 0;
    for epoch in 1..=epochs {
        steps += sgd_epoch(
            spec,
            &mut params,
            &union,
            cfg.lr,
            cfg.batch_size,
            &mut rng,
            None,
        )?;
        let ensemble = ParamEnsemble::from_params(spec, vec![params.clone(); datasets.len()]);
        history.records.push(record_metrics(
            spec, datasets, &ensemble, None, epoch, steps, None, started,
        )?);
    }
    Ok((params, steps, history))
}
