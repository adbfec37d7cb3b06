//! Minimal feed-forward networks with hand-derived backpropagation.
//!
//! One [`NetworkSpec`] describes the shared architecture; a [`ParamEnsemble`]
//! holds one parameter set per dataset. Losses cover classification
//! (cross-entropy over softmax logits) and reconstruction (squared error of an
//! auto-encoder, optionally with masked inputs for completion tasks).
//!
//! Gradients are exact and checked against the central-difference oracle in
//! [`crate::numerics::fd_gradient`]; there is no autodiff here.

use crate::error::{Error, Result};
use crate::numerics::{gaussian_fill, Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => stable_sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z` whose output was `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

fn stable_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    Reconstruction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// Shared architecture of every network in an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
    pub loss: LossKind,
}

impl NetworkSpec {
    /// Builds a spec from a dim chain, e.g. `[8, 16, 8]` gives layers
    /// `8->16` and `16->8`. Conformance between consecutive layers holds by
    /// construction.
    pub fn from_dims(dims: &[usize], activations: &[Activation], loss: LossKind) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidConfig(
                "network needs at least one layer (two dims)".into(),
            ));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::InvalidConfig(format!(
                "expected {} activations for {} layers, got {}",
                dims.len() - 1,
                dims.len() - 1,
                activations.len()
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(pair, &activation)| LayerSpec {
                in_dim: pair[0],
                out_dim: pair[1],
                activation,
            })
            .collect();
        let spec = NetworkSpec { layers, loss };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidConfig("network has no layers".into()));
        }
        for layer in &self.layers {
            if layer.in_dim == 0 || layer.out_dim == 0 {
                return Err(Error::InvalidConfig("layer dims must be positive".into()));
            }
        }
        for (l, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} out_dim {} does not match layer {} in_dim {}",
                    l,
                    pair[0].out_dim,
                    l + 1,
                    pair[1].in_dim
                )));
            }
        }
        Ok(())
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// Flat parameter count of layer `l` (weights then bias).
    pub fn layer_flat_len(&self, l: usize) -> usize {
        let layer = &self.layers[l];
        layer.out_dim * layer.in_dim + layer.out_dim
    }

    pub fn total_flat_len(&self) -> usize {
        (0..self.layer_count()).map(|l| self.layer_flat_len(l)).sum()
    }
}

/// Weights and bias of one layer. The flat view is weights (row-major)
/// followed by bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(layer: &LayerSpec) -> Self {
        LayerParams {
            weights: Matrix::zeros(layer.out_dim, layer.in_dim),
            bias: vec![0.0; layer.out_dim],
        }
    }

    pub fn flat_len(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.flat_len());
        flat.extend_from_slice(self.weights.as_slice());
        flat.extend_from_slice(&self.bias);
        flat
    }

    pub fn copy_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.flat_len(), "flat view length mismatch");
        let nw = self.weights.as_slice().len();
        self.weights.as_mut_slice().copy_from_slice(&flat[..nw]);
        self.bias.copy_from_slice(&flat[nw..]);
    }

    pub fn unflatten(layer: &LayerSpec, flat: &[f64]) -> Self {
        let mut out = LayerParams::zeros(layer);
        out.copy_from_flat(flat);
        out
    }

    /// `self += scale * other`, entrywise over weights and bias.
    pub fn add_scaled(&mut self, other: &LayerParams, scale: f64) {
        for (w, g) in self
            .weights
            .as_mut_slice()
            .iter_mut()
            .zip(other.weights.as_slice())
        {
            *w += scale * g;
        }
        for (b, g) in self.bias.iter_mut().zip(&other.bias) {
            *b += scale * g;
        }
    }

    pub fn sq_distance(&self, other: &LayerParams) -> f64 {
        let mut sum = 0.0;
        for (a, b) in self
            .weights
            .as_slice()
            .iter()
            .zip(other.weights.as_slice())
        {
            let d = a - b;
            sum += d * d;
        }
        for (a, b) in self.bias.iter().zip(&other.bias) {
            let d = a - b;
            sum += d * d;
        }
        sum
    }

    pub fn sq_norm(&self) -> f64 {
        self.weights.as_slice().iter().map(|x| x * x).sum::<f64>()
            + self.bias.iter().map(|x| x * x).sum::<f64>()
    }

    pub fn all_finite(&self) -> bool {
        self.weights.all_finite() && self.bias.iter().all(|x| x.is_finite())
    }
}

/// Per-dataset, per-layer parameters: the optimization variable of joint
/// training. Every network shares the same [`NetworkSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEnsemble {
    spec: NetworkSpec,
    params: Vec<Vec<LayerParams>>,
}

impl ParamEnsemble {
    /// One network per seed; weights ~ normal(0, 1/in_dim), bias 0.
    pub fn init_gaussian(spec: &NetworkSpec, seeds: &[u64]) -> Self {
        let params = seeds
            .iter()
            .map(|&seed| {
                let mut rng = Rng::new(seed);
                spec.layers
                    .iter()
                    .map(|layer| {
                        let mut p = LayerParams::zeros(layer);
                        let std = 1.0 / (layer.in_dim as f64).sqrt();
                        gaussian_fill(&mut rng, &mut p.weights, 0.0, std);
                        p
                    })
                    .collect()
            })
            .collect();
        ParamEnsemble {
            spec: spec.clone(),
            params,
        }
    }

    pub fn from_params(spec: &NetworkSpec, params: Vec<Vec<LayerParams>>) -> Self {
        for network in &params {
            assert_eq!(network.len(), spec.layer_count(), "layer count mismatch");
            for (layer, p) in spec.layers.iter().zip(network) {
                assert_eq!(p.weights.rows(), layer.out_dim);
                assert_eq!(p.weights.cols(), layer.in_dim);
                assert_eq!(p.bias.len(), layer.out_dim);
            }
        }
        ParamEnsemble {
            spec: spec.clone(),
            params,
        }
    }

    pub fn n(&self) -> usize {
        self.params.len()
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn network(&self, i: usize) -> &[LayerParams] {
        &self.params[i]
    }

    pub fn network_mut(&mut self, i: usize) -> &mut Vec<LayerParams> {
        &mut self.params[i]
    }

    pub fn networks_mut(&mut self) -> &mut [Vec<LayerParams>] {
        &mut self.params
    }

    pub fn layer_flat(&self, i: usize, l: usize) -> Vec<f64> {
        self.params[i][l].flatten()
    }

    /// Mean over networks of the full flattened parameter norm.
    pub fn mean_param_norm(&self) -> f64 {
        if self.params.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .params
            .iter()
            .map(|network| {
                network
                    .iter()
                    .map(LayerParams::sq_norm)
                    .sum::<f64>()
                    .sqrt()
            })
            .sum();
        total / self.params.len() as f64
    }
}

/// Labeled or unlabeled feature records for one task.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub id: usize,
    pub features: Matrix,
    /// Class labels; present exactly when the loss is cross-entropy.
    pub labels: Option<Vec<usize>>,
    /// Optional corruption mask (1.0 = keep, 0.0 = zero out on input).
    /// Reconstruction targets stay uncorrupted.
    pub mask: Option<Matrix>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl Dataset {
    /// All records in the train split; no held-out records.
    pub fn from_features(id: usize, features: Matrix, labels: Option<Vec<usize>>) -> Self {
        let n = features.rows();
        Dataset {
            id,
            features,
            labels,
            mask: None,
            train_idx: (0..n).collect(),
            test_idx: Vec::new(),
        }
    }

    pub fn n_records(&self) -> usize {
        self.features.rows()
    }

    /// Network input for one record: the feature row with masked entries
    /// zeroed.
    pub fn model_input(&self, record: usize) -> Vec<f64> {
        let row = self.features.row(record);
        match &self.mask {
            None => row.to_vec(),
            Some(mask) => row
                .iter()
                .zip(mask.row(record))
                .map(|(x, m)| x * m)
                .collect(),
        }
    }

    pub fn validate_for(&self, spec: &NetworkSpec) -> Result<()> {
        if self.features.cols() != spec.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "dataset {} has {} features, network expects {}",
                self.id,
                self.features.cols(),
                spec.input_dim()
            )));
        }
        match spec.loss {
            LossKind::CrossEntropy => {
                let labels = self.labels.as_ref().ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "dataset {} has no labels but the loss is cross-entropy",
                        self.id
                    ))
                })?;
                if labels.len() != self.n_records() {
                    return Err(Error::DimensionMismatch(format!(
                        "dataset {}: {} labels for {} records",
                        self.id,
                        labels.len(),
                        self.n_records()
                    )));
                }
                for (record, &label) in labels.iter().enumerate() {
                    if label >= spec.output_dim() {
                        return Err(Error::LabelOutOfRange {
                            record,
                            label: label as i64,
                            classes: spec.output_dim(),
                        });
                    }
                }
            }
            LossKind::Reconstruction => {
                if self.features.cols() != spec.output_dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "reconstruction needs output dim {} == feature dim {}",
                        spec.output_dim(),
                        self.features.cols()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-layer intermediate values from a forward pass; enough for backward.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Pre-activations z_l, one per layer.
    pub pre: Vec<Vec<f64>>,
    /// Post-activations; `post[0]` is the input, `post[l]` the output of
    /// layer l.
    pub post: Vec<Vec<f64>>,
}

/// Runs the network on one input vector.
pub fn forward(spec: &NetworkSpec, params: &[LayerParams], x: &[f64]) -> (Vec<f64>, ForwardCache) {
    assert_eq!(
        x.len(),
        spec.input_dim(),
        "input length {} does not match network input dim {}",
        x.len(),
        spec.input_dim()
    );
    assert_eq!(params.len(), spec.layer_count(), "layer count mismatch");
    let mut pre = Vec::with_capacity(spec.layer_count());
    let mut post = Vec::with_capacity(spec.layer_count() + 1);
    post.push(x.to_vec());
    for (layer, p) in spec.layers.iter().zip(params) {
        let input = post.last().unwrap();
        let mut z = vec![0.0; layer.out_dim];
        for (o, zo) in z.iter_mut().enumerate() {
            let mut sum = p.bias[o];
            for (i, xi) in input.iter().enumerate() {
                sum += p.weights.get(o, i) * xi;
            }
            *zo = sum;
        }
        let a: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
        pre.push(z);
        post.push(a);
    }
    (post.last().unwrap().clone(), ForwardCache { pre, post })
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// -log softmax(logits)[label], computed with max subtraction.
fn cross_entropy_record(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    log_sum - (logits[label] - max)
}

fn checked_label(dataset: &Dataset, record: usize, classes: usize) -> Result<usize> {
    let labels = dataset.labels.as_ref().ok_or_else(|| {
        Error::InvalidConfig(format!(
            "dataset {} has no labels for classification",
            dataset.id
        ))
    })?;
    let label = labels[record];
    if label >= classes {
        return Err(Error::LabelOutOfRange {
            record,
            label: label as i64,
            classes,
        });
    }
    Ok(label)
}

/// Mean cross-entropy over `subset`.
pub fn loss_classification(
    spec: &NetworkSpec,
    params: &[LayerParams],
    dataset: &Dataset,
    subset: &[usize],
) -> Result<f64> {
    assert!(!subset.is_empty(), "loss over an empty subset");
    let classes = spec.output_dim();
    let mut total = 0.0;
    for &record in subset {
        let label = checked_label(dataset, record, classes)?;
        let (logits, _) = forward(spec, params, &dataset.model_input(record));
        total += cross_entropy_record(&logits, label);
    }
    Ok(total / subset.len() as f64)
}

/// Mean squared reconstruction error over `subset`. Inputs are masked when a
/// mask is present; the target is always the uncorrupted record.
pub fn loss_reconstruction(
    spec: &NetworkSpec,
    params: &[LayerParams],
    dataset: &Dataset,
    subset: &[usize],
) -> f64 {
    assert!(!subset.is_empty(), "loss over an empty subset");
    let mut total = 0.0;
    for &record in subset {
        let (output, _) = forward(spec, params, &dataset.model_input(record));
        let target = dataset.features.row(record);
        total += output
            .iter()
            .zip(target)
            .map(|(o, t)| (t - o) * (t - o))
            .sum::<f64>();
    }
    total / subset.len() as f64
}

/// The task loss selected by `spec.loss`.
pub fn task_loss(
    spec: &NetworkSpec,
    params: &[LayerParams],
    dataset: &Dataset,
    subset: &[usize],
) -> Result<f64> {
    match spec.loss {
        LossKind::CrossEntropy => loss_classification(spec, params, dataset, subset),
        LossKind::Reconstruction => Ok(loss_reconstruction(spec, params, dataset, subset)),
    }
}

/// Fraction of `subset` classified correctly (argmax of the logits).
pub fn accuracy(
    spec: &NetworkSpec,
    params: &[LayerParams],
    dataset: &Dataset,
    subset: &[usize],
) -> Result<f64> {
    assert!(!subset.is_empty(), "accuracy over an empty subset");
    let classes = spec.output_dim();
    let mut correct = 0usize;
    for &record in subset {
        let label = checked_label(dataset, record, classes)?;
        let (logits, _) = forward(spec, params, &dataset.model_input(record));
        let predicted = logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap();
        if predicted == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / subset.len() as f64)
}

/// Exact gradient of the task loss over `batch` with respect to every layer's
/// weights and biases (mean over the batch).
pub fn grad_task_loss(
    spec: &NetworkSpec,
    params: &[LayerParams],
    dataset: &Dataset,
    batch: &[usize],
) -> Result<Vec<LayerParams>> {
    assert!(!batch.is_empty(), "gradient over an empty batch");
    let mut grads: Vec<LayerParams> = spec.layers.iter().map(LayerParams::zeros).collect();
    for &record in batch {
        let input = dataset.model_input(record);
        let (output, cache) = forward(spec, params, &input);
        // dL/d(output) for this record.
        let mut upstream: Vec<f64> = match spec.loss {
            LossKind::CrossEntropy => {
                let label = checked_label(dataset, record, spec.output_dim())?;
                let mut g = softmax(&output);
                g[label] -= 1.0;
                g
            }
            LossKind::Reconstruction => {
                let target = dataset.features.row(record);
                output.iter().zip(target).map(|(o, t)| 2.0 * (o - t)).collect()
            }
        };
        for l in (0..spec.layer_count()).rev() {
            let layer = &spec.layers[l];
            let z = &cache.pre[l];
            let a = &cache.post[l + 1];
            let below = &cache.post[l];
            let dz: Vec<f64> = upstream
                .iter()
                .zip(z.iter().zip(a))
                .map(|(u, (&zv, &av))| u * layer.activation.derivative(zv, av))
                .collect();
            for (o, &dzo) in dz.iter().enumerate() {
                grads[l].bias[o] += dzo;
                for (i, &xi) in below.iter().enumerate() {
                    let w = grads[l].weights.get(o, i);
                    grads[l].weights.set(o, i, w + dzo * xi);
                }
            }
            if l > 0 {
                let mut next = vec![0.0; layer.in_dim];
                for (o, &dzo) in dz.iter().enumerate() {
                    for (i, slot) in next.iter_mut().enumerate() {
                        *slot += params[l].weights.get(o, i) * dzo;
                    }
                }
                upstream = next;
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grads {
        for w in g.weights.as_mut_slice() {
            *w *= scale;
        }
        for b in &mut g.bias {
            *b *= scale;
        }
    }
    Ok(grads)
}

/// A quadratic penalty `strength * ||theta_l - anchor||^2` pulling one layer
/// toward a fixed flat anchor vector. Its gradient,
/// `2 * strength * (theta_l - anchor)`, is added to the task gradient at
/// every SGD step.
#[derive(Debug, Clone)]
pub struct LayerPull {
    pub strength: f64,
    pub anchor: Vec<f64>,
}

/// One full shuffled pass over the train split.
///
/// Each step updates `theta -= lr * (task gradient + pull gradients)`. Layers
/// without a pull entry are driven by the task gradient alone, with no extra
/// arithmetic, so a run with no pulls is bitwise identical to isolated
/// training. Returns the number of SGD steps taken.
pub fn sgd_epoch(
    spec: &NetworkSpec,
    params: &mut [LayerParams],
    dataset: &Dataset,
    lr: f64,
    batch_size: usize,
    rng: &mut Rng,
    pulls: Option<&[Option<LayerPull>]>,
) -> Result<usize> {
    assert!(lr >= 0.0, "learning rate must be nonnegative");
    assert!(batch_size > 0, "batch size must be positive");
    if let Some(pulls) = pulls {
        assert_eq!(pulls.len(), spec.layer_count(), "one pull slot per layer");
    }
    let mut order = dataset.train_idx.clone();
    rng.shuffle(&mut order);
    let mut steps = 0;
    for batch in order.chunks(batch_size) {
        let mut grads = grad_task_loss(spec, params, dataset, batch)?;
        if let Some(pulls) = pulls {
            for (l, pull) in pulls.iter().enumerate() {
                let Some(pull) = pull else { continue };
                let nw = grads[l].weights.as_slice().len();
                let (anchor_w, anchor_b) = pull.anchor.split_at(nw);
                for ((g, w), a) in grads[l]
                    .weights
                    .as_mut_slice()
                    .iter_mut()
                    .zip(params[l].weights.as_slice())
                    .zip(anchor_w)
                {
                    *g += 2.0 * pull.strength * (w - a);
                }
                for ((g, b), a) in grads[l].bias.iter_mut().zip(&params[l].bias).zip(anchor_b) {
                    *g += 2.0 * pull.strength * (b - a);
                }
            }
        }
        if lr > 0.0 {
            for (p, g) in params.iter_mut().zip(&grads) {
                p.add_scaled(g, -lr);
            }
        }
        steps += 1;
        for (l, p) in params.iter().enumerate() {
            if !p.all_finite() {
                let norm = p.sq_norm().sqrt();
                return Err(Error::NonFinite(format!(
                    "parameters of layer {l} after step {steps} (norm {norm:e}); lower the learning rate"
                )));
            }
        }
    }
    Ok(steps)
}
