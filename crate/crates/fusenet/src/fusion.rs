//! Robust fusion machinery: the saturating norm, layer-pair distances, scale
//! estimation, reweighting, and the convergence statistic.
//!
//! Network parameters are compared per adjacent layer pair: the flat vectors
//! of layers l and l+1 concatenated. Penalizing concatenated pairs is what
//! keeps the sharing pattern consistent across neighboring layers. The robust
//! norm `sigma^2 x^2 / (sigma^2 + x^2)` is quadratic near zero and saturates
//! at `sigma^2`, so pairs of networks that drift far apart stop paying a
//! marginal penalty and are effectively decoupled.

use rayon::prelude::*;

use crate::network::ParamEnsemble;

/// Saturating robust norm `sigma^2 x^2 / (sigma^2 + x^2)`.
///
/// Behaves like `x^2` for `x << sigma` and tends to `sigma^2` as `x` grows.
pub fn robust_norm(x: f64, sigma: f64) -> f64 {
    debug_assert!(x >= 0.0 && sigma > 0.0);
    (sigma * sigma * x * x) / (sigma * sigma + x * x)
}

/// The reweighting factor `sigma^2 / (sigma^2 + x^2)`, in (0, 1].
///
/// Satisfies `robust_norm(x, sigma) == influence_weight(x, sigma) * x^2`,
/// which is the splitting that turns the robust problem into a sequence of
/// weighted least-squares problems.
pub fn influence_weight(distance: f64, sigma: f64) -> f64 {
    debug_assert!(distance >= 0.0 && sigma > 0.0);
    (sigma * sigma) / (sigma * sigma + distance * distance)
}

/// Symmetric per-layer table of values indexed by an unordered dataset pair.
///
/// Used for pairwise distances and influence weights (one entry per adjacent
/// layer pair) and for per-layer pull coefficients (one entry per layer).
#[derive(Debug, Clone, PartialEq)]
pub struct PairTensor {
    n: usize,
    layers: usize,
    data: Vec<f64>,
}

impl PairTensor {
    pub fn zeros(n: usize, layers: usize) -> Self {
        PairTensor {
            n,
            layers,
            data: vec![0.0; n * n * layers],
        }
    }

    pub fn filled(n: usize, layers: usize, value: f64) -> Self {
        let mut t = PairTensor::zeros(n, layers);
        for l in 0..layers {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let idx = t.index(i, j, l);
                        t.data[idx] = value;
                    }
                }
            }
        }
        t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    fn index(&self, i: usize, j: usize, l: usize) -> usize {
        debug_assert!(i < self.n && j < self.n && l < self.layers);
        (l * self.n + i) * self.n + j
    }

    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.data[self.index(i, j, l)]
    }

    /// Sets both (i, j) and (j, i).
    pub fn set_sym(&mut self, i: usize, j: usize, l: usize, value: f64) {
        let a = self.index(i, j, l);
        self.data[a] = value;
        let b = self.index(j, i, l);
        self.data[b] = value;
    }

    /// The n x n slice at layer index `l`, as nested vectors.
    pub fn slice(&self, l: usize) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j, l)).collect())
            .collect()
    }

    /// Applies `f` to every off-diagonal entry of every slice.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> PairTensor {
        let mut out = PairTensor::zeros(self.n, self.layers);
        for l in 0..self.layers {
            for i in 0..self.n {
                for j in 0..self.n {
                    if i != j {
                        let idx = out.index(i, j, l);
                        out.data[idx] = f(self.get(i, j, l));
                    }
                }
            }
        }
        out
    }
}

/// Euclidean distances between concatenated adjacent-layer parameter vectors,
/// for every unordered dataset pair and every layer pair l in 0..L-1.
pub fn pair_distances(ensemble: &ParamEnsemble) -> PairTensor {
    let n = ensemble.n();
    let layer_pairs = ensemble.spec().layer_count() - 1;
    assert!(
        layer_pairs >= 1,
        "layer-pair fusion needs a network with at least two layers"
    );
    let mut table = PairTensor::zeros(n, layer_pairs);
    let entries: Vec<(usize, usize, usize, f64)> = (0..layer_pairs)
        .flat_map(|l| (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j, l))))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(i, j, l)| {
            // || (a, b) ||^2 = ||a||^2 + ||b||^2 for the concatenated flats.
            let sq = ensemble.network(i)[l].sq_distance(&ensemble.network(j)[l])
                + ensemble.network(i)[l + 1].sq_distance(&ensemble.network(j)[l + 1]);
            (i, j, l, sq.sqrt())
        })
        .collect();
    for (i, j, l, d) in entries {
        table.set_sym(i, j, l, d);
    }
    table
}

/// Scale floor guarding against identically initialized ensembles, where the
/// raw estimate would be zero and every robust term degenerate.
pub fn sigma_floor(ensemble: &ParamEnsemble) -> f64 {
    1e-8 * (1.0 + ensemble.mean_param_norm())
}

/// Per-layer-pair scale: the mean over datasets of the distance to the
/// nearest other dataset, floored at `floor`.
pub fn estimate_sigma(table: &PairTensor, floor: f64) -> Vec<f64> {
    assert!(table.n() >= 2, "scale estimation needs at least two datasets");
    (0..table.layers())
        .map(|l| {
            let mean_nearest = (0..table.n())
                .map(|i| {
                    (0..table.n())
                        .filter(|&j| j != i)
                        .map(|j| table.get(i, j, l))
                        .fold(f64::INFINITY, f64::min)
                })
                .sum::<f64>()
                / table.n() as f64;
            mean_nearest.max(floor)
        })
        .collect()
}

/// Influence weights `sigma_l^2 / (sigma_l^2 + d_ijl^2)` for every pair.
pub fn compute_weights(table: &PairTensor, sigma: &[f64]) -> PairTensor {
    assert_eq!(sigma.len(), table.layers(), "one sigma per layer pair");
    let mut weights = PairTensor::zeros(table.n(), table.layers());
    for (l, &sig) in sigma.iter().enumerate() {
        assert!(sig > 0.0, "sigma must be positive");
        for i in 0..table.n() {
            for j in (i + 1)..table.n() {
                weights.set_sym(i, j, l, influence_weight(table.get(i, j, l), sig));
            }
        }
    }
    weights
}

/// Total robust fusion term: sum over unordered pairs and layer pairs of the
/// robust norm of the pair distance. Reported per training iteration as the
/// consistency loss.
pub fn consistency_loss(ensemble: &ParamEnsemble, sigma: &[f64]) -> f64 {
    if ensemble.n() < 2 {
        return 0.0;
    }
    let table = pair_distances(ensemble);
    assert_eq!(sigma.len(), table.layers());
    let mut total = 0.0;
    for (l, &sig) in sigma.iter().enumerate() {
        for i in 0..table.n() {
            for j in (i + 1)..table.n() {
                total += robust_norm(table.get(i, j, l), sig);
            }
        }
    }
    total
}

/// Largest absolute entrywise change between two weight tensors; the IRLS
/// stopping statistic.
pub fn max_weight_change(current: &PairTensor, previous: &PairTensor) -> f64 {
    assert_eq!(current.n(), previous.n());
    assert_eq!(current.layers(), previous.layers());
    let mut max = 0.0f64;
    for l in 0..current.layers() {
        for i in 0..current.n() {
            for j in (i + 1)..current.n() {
                max = max.max((current.get(i, j, l) - previous.get(i, j, l)).abs());
            }
        }
    }
    max
}

/// Expands per-layer-pair weights into per-layer coefficients.
///
/// Since `||(a, b)||^2 = ||a||^2 + ||b||^2`, a weighted sum over concatenated
/// pairs regroups as a per-layer sum:
/// `sum_l w_l ||pair_l diff||^2 == sum_l (w_{l-1} + w_l) ||layer_l diff||^2`
/// with w_0 = w_L = 0. Boundary layers get one contribution, interior layers
/// two.
pub fn layer_pull_coeffs(pair_weights: &[f64]) -> Vec<f64> {
    let layer_pairs = pair_weights.len();
    assert!(layer_pairs >= 1, "need at least one layer pair");
    (0..layer_pairs + 1)
        .map(|l| {
            let mut c = 0.0;
            if l > 0 {
                c += pair_weights[l - 1];
            }
            if l < layer_pairs {
                c += pair_weights[l];
            }
            c
        })
        .collect()
}

/// Per-layer coefficient tensor c_ijl built by expanding every pair's weights.
pub fn coeffs_from_weights(weights: &PairTensor) -> PairTensor {
    let n = weights.n();
    let layers = weights.layers() + 1;
    let mut coeffs = PairTensor::zeros(n, layers);
    for i in 0..n {
        for j in (i + 1)..n {
            let pair: Vec<f64> = (0..weights.layers()).map(|l| weights.get(i, j, l)).collect();
            for (l, c) in layer_pull_coeffs(&pair).into_iter().enumerate() {
                coeffs.set_sym(i, j, l, c);
            }
        }
    }
    coeffs
}

/// Per-layer-pair scales, current and previous influence weights, and the
/// iteration counter of the reweighting loop.
#[derive(Debug, Clone)]
pub struct FusionState {
    pub sigma: Vec<f64>,
    pub weights: PairTensor,
    pub prev_weights: PairTensor,
    pub iteration: usize,
}

impl FusionState {
    /// All-ones weights: the implicit weighting of the squared-norm
    /// initialization phase.
    pub fn initial(n: usize, layer_pairs: usize, sigma: Vec<f64>) -> Self {
        FusionState {
            sigma,
            weights: PairTensor::filled(n, layer_pairs, 1.0),
            prev_weights: PairTensor::filled(n, layer_pairs, 1.0),
            iteration: 0,
        }
    }

    /// Installs freshly computed weights and returns the change statistic.
    pub fn advance(&mut self, weights: PairTensor) -> f64 {
        self.prev_weights = std::mem::replace(&mut self.weights, weights);
        self.iteration += 1;
        max_weight_change(&self.weights, &self.prev_weights)
    }

    pub fn delta(&self) -> f64 {
        assert!(self.iteration >= 1, "delta is defined from iteration 1 on");
        max_weight_change(&self.weights, &self.prev_weights)
    }
}
