//! Joint linear models for the homogeneous case: several SVMs fused by a
//! squared-norm penalty on weight differences, and several logistic
//! regressions fused by an L1 penalty (optionally augmented with a smooth
//! squared-norm term).
//!
//! Biases are excluded from every penalty; only the weight vectors are
//! regularized and fused.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// One linear model `(w, b)` per dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

/// Feature records with labels in {-1, +1}.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub features: Matrix,
    pub labels: Vec<f64>,
}

impl LabeledSet {
    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.features.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} records",
                self.labels.len(),
                self.features.rows()
            )));
        }
        for (record, &y) in self.labels.iter().enumerate() {
            if y != 1.0 && y != -1.0 {
                return Err(Error::InvalidConfig(format!(
                    "record {record}: label {y} is not in {{-1, +1}}"
                )));
            }
        }
        Ok(())
    }

    pub fn n_records(&self) -> usize {
        self.features.rows()
    }
}

#[derive(Debug, Clone)]
pub struct ConvexConfig {
    /// Per-model squared-norm strength.
    pub lambda: f64,
    /// Fusion strength on pairwise weight differences.
    pub mu: f64,
    /// Smooth augmentation strength (logistic-regression fusion only).
    pub gamma: f64,
    pub lr: f64,
    pub max_iters: usize,
    /// Relative objective change below which the outer loop stops.
    pub tol: f64,
}

impl Default for ConvexConfig {
    fn default() -> Self {
        ConvexConfig {
            lambda: 1e-2,
            mu: 1.0,
            gamma: 0.1,
            lr: 1e-2,
            max_iters: 2000,
            tol: 1e-10,
        }
    }
}

impl ConvexConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || self.mu < 0.0 || self.gamma < 0.0 {
            return Err(Error::InvalidConfig(
                "lambda, mu, gamma must be >= 0".into(),
            ));
        }
        if self.lr <= 0.0 {
            return Err(Error::InvalidConfig("lr must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

fn validate_data(data: &[LabeledSet]) -> Result<usize> {
    let dim = data
        .first()
        .map(|d| d.features.cols())
        .ok_or_else(|| Error::InvalidConfig("no datasets".into()))?;
    for set in data {
        set.validate()?;
        if set.features.cols() != dim {
            return Err(Error::DimensionMismatch(
                "all datasets must share one feature dimension".into(),
            ));
        }
    }
    Ok(dim)
}

fn validate_problem(models: &[LinearModel], data: &[LabeledSet]) -> Result<usize> {
    if models.len() != data.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} models for {} datasets",
            models.len(),
            data.len()
        )));
    }
    let dim = validate_data(data)?;
    for model in models {
        if model.weights.len() != dim {
            return Err(Error::DimensionMismatch(
                "model dimension does not match data".into(),
            ));
        }
    }
    Ok(dim)
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn stable_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Joint soft-margin SVM objective in its unconstrained hinge form:
/// per-record slacks at their minimal feasible values.
pub fn svm_objective(
    models: &[LinearModel],
    data: &[LabeledSet],
    cfg: &ConvexConfig,
) -> Result<f64> {
    validate_problem(models, data)?;
    let mut total = 0.0;
    for (model, set) in models.iter().zip(data) {
        for record in 0..set.n_records() {
            let margin = set.labels[record] * model.score(set.features.row(record));
            total += (1.0 - margin).max(0.0);
        }
        total += cfg.lambda * sq_norm(&model.weights);
    }
    for i in 0..models.len() {
        for j in (i + 1)..models.len() {
            total += cfg.mu * sq_distance(&models[i].weights, &models[j].weights);
        }
    }
    Ok(total)
}

/// Joint squared-sigmoid logistic objective with L1 fusion; `augmented` adds
/// the smooth squared-norm fusion term scaled by gamma.
pub fn logreg_objective(
    models: &[LinearModel],
    data: &[LabeledSet],
    cfg: &ConvexConfig,
    augmented: bool,
) -> Result<f64> {
    validate_problem(models, data)?;
    let mut total = 0.0;
    for (model, set) in models.iter().zip(data) {
        for record in 0..set.n_records() {
            let s = stable_sigmoid(model.score(set.features.row(record)));
            let target = (1.0 + set.labels[record]) / 2.0;
            total += (s - target) * (s - target);
        }
        total += cfg.lambda * sq_norm(&model.weights);
    }
    for i in 0..models.len() {
        for j in (i + 1)..models.len() {
            total += cfg.mu * l1_distance(&models[i].weights, &models[j].weights);
            if augmented {
                total += cfg.gamma * sq_distance(&models[i].weights, &models[j].weights);
            }
        }
    }
    Ok(total)
}

/// One sampled point along convex training.
#[derive(Debug, Clone)]
pub struct ConvexRecord {
    pub iteration: usize,
    /// Full joint objective at this iterate.
    pub objective: f64,
    /// Mean per-record data loss of each model (no penalties).
    pub model_loss: Vec<f64>,
}

/// Objective values sampled along training, for metric emission. Always
/// includes the starting point and the final iterate.
#[derive(Debug, Clone, Default)]
pub struct ConvexTrace {
    pub records: Vec<ConvexRecord>,
}

fn svm_mean_losses(models: &[LinearModel], data: &[LabeledSet]) -> Vec<f64> {
    models
        .iter()
        .zip(data)
        .map(|(model, set)| svm_model_objective(model, set, 0.0) / set.n_records() as f64)
        .collect()
}

fn logreg_mean_losses(models: &[LinearModel], data: &[LabeledSet]) -> Vec<f64> {
    models
        .iter()
        .zip(data)
        .map(|(model, set)| {
            let mut total = 0.0;
            for record in 0..set.n_records() {
                let s = stable_sigmoid(model.score(set.features.row(record)));
                let target = (1.0 + set.labels[record]) / 2.0;
                total += (s - target) * (s - target);
            }
            total / set.n_records() as f64
        })
        .collect()
}

/// Exact minimizer of
/// `sum_i ||w_i - v_i||^2 / (2 step) + mu sum_{i<j} ||w_i - w_j||^2`:
/// shrink every v_i toward the mean. Unconditionally stable in mu, which a
/// plain explicit gradient on the fusion term is not.
fn prox_pairwise_sq(weights: &mut [Vec<f64>], step: f64, mu: f64) {
    let m = weights.len();
    if m < 2 || mu == 0.0 {
        return;
    }
    let dim = weights[0].len();
    let mut mean = vec![0.0; dim];
    for w in weights.iter() {
        for (s, v) in mean.iter_mut().zip(w) {
            *s += v;
        }
    }
    for s in &mut mean {
        *s /= m as f64;
    }
    let shrink = 2.0 * step * mu;
    let denom = 1.0 + shrink * m as f64;
    for w in weights.iter_mut() {
        for (v, mbar) in w.iter_mut().zip(&mean) {
            *v = (*v + shrink * m as f64 * mbar) / denom;
        }
    }
}

fn hinge_subgradient(
    model: &LinearModel,
    set: &LabeledSet,
    lambda: f64,
) -> (Vec<f64>, f64) {
    let dim = model.weights.len();
    let mut gw = vec![0.0; dim];
    for (g, w) in gw.iter_mut().zip(&model.weights) {
        *g = 2.0 * lambda * w;
    }
    let mut gb = 0.0;
    for record in 0..set.n_records() {
        let x = set.features.row(record);
        let y = set.labels[record];
        if y * model.score(x) < 1.0 {
            for (g, v) in gw.iter_mut().zip(x) {
                *g -= y * v;
            }
            gb -= y;
        }
    }
    (gw, gb)
}

/// One model's own share of the SVM objective: its hinge sum plus penalty.
fn svm_model_objective(model: &LinearModel, set: &LabeledSet, lambda: f64) -> f64 {
    let mut total = 0.0;
    for record in 0..set.n_records() {
        let margin = set.labels[record] * model.score(set.features.row(record));
        total += (1.0 - margin).max(0.0);
    }
    total + lambda * sq_norm(&model.weights)
}

/// Trains the joint SVMs: subgradient steps of size `lr / sqrt(t)` on the
/// hinge and squared-norm terms, with the pairwise fusion term handled by its
/// exact proximal map each iteration. Starts from zero models, runs the full
/// iteration budget, and returns the best-objective iterate.
///
/// With `mu == 0` the models never interact, so the best iterate is tracked
/// per model and the result is identical to training each dataset alone.
pub fn svm_joint_train(
    data: &[LabeledSet],
    cfg: &ConvexConfig,
) -> Result<(Vec<LinearModel>, ConvexTrace)> {
    cfg.validate()?;
    let m = data.len();
    let dim = validate_data(data)?;
    let decoupled = cfg.mu == 0.0 || m < 2;
    let mut models: Vec<LinearModel> = vec![LinearModel::zeros(dim); m];
    let mut best = models.clone();
    let mut best_objective = svm_objective(&models, data, cfg)?;
    let mut best_per_model: Vec<f64> = models
        .iter()
        .zip(data)
        .map(|(model, set)| svm_model_objective(model, set, cfg.lambda))
        .collect();
    let initial = best_objective;
    let guard = 1e3 * initial.max(1.0);
    let mut trace = ConvexTrace::default();
    trace.records.push(ConvexRecord {
        iteration: 0,
        objective: best_objective,
        model_loss: svm_mean_losses(&models, data),
    });
    let stride = (cfg.max_iters / 100).max(1);

    for t in 1..=cfg.max_iters {
        let step = cfg.lr / (t as f64).sqrt();
        for (model, set) in models.iter_mut().zip(data) {
            let (gw, gb) = hinge_subgradient(model, set, cfg.lambda);
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= step * g;
            }
            model.bias -= step * gb;
        }
        if !decoupled {
            let mut weights: Vec<Vec<f64>> =
                models.iter().map(|mo| mo.weights.clone()).collect();
            prox_pairwise_sq(&mut weights, step, cfg.mu);
            for (model, w) in models.iter_mut().zip(weights) {
                model.weights = w;
            }
        }
        let objective = svm_objective(&models, data, cfg)?;
        if !objective.is_finite() || objective > guard {
            return Err(Error::Diverged(format!(
                "SVM objective reached {objective:.6e} from {initial:.6e}; lower the learning rate"
            )));
        }
        if decoupled {
            for ((model, set), (best_value, best_model)) in models
                .iter()
                .zip(data)
                .zip(best_per_model.iter_mut().zip(best.iter_mut()))
            {
                let value = svm_model_objective(model, set, cfg.lambda);
                if value < *best_value {
                    *best_value = value;
                    *best_model = model.clone();
                }
            }
            best_objective = svm_objective(&best, data, cfg)?;
        } else if objective < best_objective {
            best_objective = objective;
            best = models.clone();
        }
        if t % stride == 0 || t == cfg.max_iters {
            trace.records.push(ConvexRecord {
                iteration: t,
                objective: best_objective,
                model_loss: svm_mean_losses(&best, data),
            });
        }
    }
    Ok((best, trace))
}

/// Soft-threshold `value` toward zero by `threshold`.
fn soft(value: f64, threshold: f64) -> f64 {
    if value > threshold {
        value - threshold
    } else if value < -threshold {
        value + threshold
    } else {
        0.0
    }
}

/// Trains the joint logistic regressions.
///
/// Each cycle visits every model in turn and takes one gradient step on its
/// smooth terms (data term, squared-norm penalty, gamma augmentation) with
/// the others fixed, then applies the soft-threshold proximal map of the L1
/// fusion term pair by pair: each pair's difference is shrunk coordinatewise
/// by `2 * lr * mu` with the pair mean preserved. Shrinking the difference
/// rather than clamping one side toward the other lets a fused pair keep
/// moving jointly under its combined data gradients; fused coordinates still
/// land exactly on a shared value, which is what the L1 penalty is for.
pub fn logreg_joint_train(
    data: &[LabeledSet],
    cfg: &ConvexConfig,
) -> Result<(Vec<LinearModel>, ConvexTrace)> {
    cfg.validate()?;
    let dim = validate_data(data)?;
    let m = data.len();
    let mut models: Vec<LinearModel> = vec![LinearModel::zeros(dim); m];
    let mut objective = logreg_objective(&models, data, cfg, true)?;
    let initial = objective;
    let guard = 1e3 * initial.max(1.0);
    let mut best = models.clone();
    let mut best_objective = objective;
    let mut trace = ConvexTrace::default();
    trace.records.push(ConvexRecord {
        iteration: 0,
        objective,
        model_loss: logreg_mean_losses(&models, data),
    });
    let stride = (cfg.max_iters / 200).max(1);

    for cycle in 1..=cfg.max_iters {
        for i in 0..m {
            let set = &data[i];
            let mut gw = vec![0.0; dim];
            let mut gb = 0.0;
            for record in 0..set.n_records() {
                let x = set.features.row(record);
                let s = stable_sigmoid(models[i].score(x));
                let target = (1.0 + set.labels[record]) / 2.0;
                let factor = 2.0 * (s - target) * s * (1.0 - s);
                for (g, v) in gw.iter_mut().zip(x) {
                    *g += factor * v;
                }
                gb += factor;
            }
            for (g, w) in gw.iter_mut().zip(&models[i].weights) {
                *g += 2.0 * cfg.lambda * w;
            }
            if cfg.gamma > 0.0 {
                for p in 0..m {
                    if p == i {
                        continue;
                    }
                    for ((g, wi), wp) in gw
                        .iter_mut()
                        .zip(&models[i].weights)
                        .zip(&models[p].weights)
                    {
                        *g += 2.0 * cfg.gamma * (wi - wp);
                    }
                }
            }
            for (w, g) in models[i].weights.iter_mut().zip(&gw) {
                *w -= cfg.lr * g;
            }
            models[i].bias -= cfg.lr * gb;
        }
        if cfg.mu > 0.0 && m >= 2 {
            let threshold = 2.0 * cfg.lr * cfg.mu;
            for i in 0..m {
                for j in (i + 1)..m {
                    let (left, right) = models.split_at_mut(j);
                    for (wi, wj) in left[i].weights.iter_mut().zip(&mut right[0].weights) {
                        let mean = (*wi + *wj) / 2.0;
                        let half = soft(*wi - *wj, threshold) / 2.0;
                        *wi = mean + half;
                        *wj = mean - half;
                    }
                }
            }
        }
        let next = logreg_objective(&models, data, cfg, true)?;
        if !next.is_finite() || next > guard {
            return Err(Error::Diverged(format!(
                "logistic objective reached {next:.6e} from {initial:.6e}; lower the learning rate"
            )));
        }
        if next < best_objective {
            best_objective = next;
            best = models.clone();
        }
        if cycle % stride == 0 || cycle == cfg.max_iters {
            trace.records.push(ConvexRecord {
                iteration: cycle,
                objective: next,
                model_loss: logreg_mean_losses(&models, data),
            });
        }
        let change = (objective - next).abs();
        objective = next;
        if change <= cfg.tol * objective.abs().max(1.0) {
            trace.records.push(ConvexRecord {
                iteration: cycle,
                objective: next,
                model_loss: logreg_mean_losses(&models, data),
            });
            break;
        }
    }
    Ok((best, trace))
}
