//! Behavior of the joint trainer: anchors, decoupling, contraction under the
//! pure pull, agreement with a closed-form coupled solve, baseline
//! equivalences, and the reweighting loop end to end.

use fusenet::fusion::{coeffs_from_weights, pair_distances, PairTensor};
use fusenet::network::{
    forward, Activation, Dataset, LossKind, NetworkSpec, ParamEnsemble,
};
use fusenet::numerics::{gaussian_fill, Matrix, Rng};
use fusenet::trainer::{
    anchor, init_l2, irls_train, solve_weighted_joint, train_baseline, weighted_joint_objective,
    TrainConfig, TrainMode,
};

fn autoencoder_spec(dims: &[usize]) -> NetworkSpec {
    let mut activations = vec![Activation::Tanh; dims.len() - 2];
    activations.push(Activation::Identity);
    NetworkSpec::from_dims(dims, &activations, LossKind::Reconstruction).unwrap()
}

/// Records drawn from a fixed random network's image: x = teacher(z) + noise.
fn teacher_records(
    teacher_spec: &NetworkSpec,
    teacher_seed: u64,
    n: usize,
    noise: f64,
    rng: &mut Rng,
) -> Matrix {
    let teacher = ParamEnsemble::init_gaussian(teacher_spec, &[teacher_seed]);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..teacher_spec.input_dim())
            .map(|_| rng.normal(0.0, 1.0))
            .collect();
        let (mut out, _) = forward(teacher_spec, teacher.network(0), &z);
        for v in &mut out {
            *v += rng.normal(0.0, noise);
        }
        rows.push(out);
    }
    Matrix::from_rows(&rows)
}

fn random_dataset(id: usize, dim: usize, n_train: usize, n_test: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut features = Matrix::zeros(n_train + n_test, dim);
    gaussian_fill(&mut rng, &mut features, 0.0, 1.0);
    let mut dataset = Dataset::from_features(id, features, None);
    dataset.train_idx = (0..n_train).collect();
    dataset.test_idx = (n_train..n_train + n_test).collect();
    dataset
}

#[test]
fn anchor_with_two_networks_is_the_other_network() {
    let spec = autoencoder_spec(&[3, 4, 3]);
    let ensemble = ParamEnsemble::init_gaussian(&spec, &[1, 2]);
    let mut coeffs = PairTensor::zeros(2, 2);
    coeffs.set_sym(0, 1, 0, 0.83);
    coeffs.set_sym(0, 1, 1, 1.4);
    for l in 0..2 {
        let (strength, vec) = anchor(&ensemble, &coeffs, 0, l).unwrap();
        assert_eq!(strength, coeffs.get(0, 1, l));
        assert_eq!(vec, ensemble.layer_flat(1, l));
    }
}

#[test]
fn anchor_with_equal_coefficients_is_the_plain_mean() {
    let spec = autoencoder_spec(&[2, 3, 2]);
    let ensemble = ParamEnsemble::init_gaussian(&spec, &[1, 2, 3, 4]);
    let coeffs = PairTensor::filled(4, 2, 0.7);
    let (strength, vec) = anchor(&ensemble, &coeffs, 1, 0).unwrap();
    assert!((strength - 3.0 * 0.7).abs() < 1e-15);
    let flats = [
        ensemble.layer_flat(0, 0),
        ensemble.layer_flat(2, 0),
        ensemble.layer_flat(3, 0),
    ];
    for (k, v) in vec.iter().enumerate() {
        let mean = (flats[0][k] + flats[1][k] + flats[2][k]) / 3.0;
        assert!((v - mean).abs() < 1e-12);
    }
}

#[test]
fn anchor_matches_weighted_average_oracle() {
    let spec = autoencoder_spec(&[2, 2, 2]);
    let ensemble = ParamEnsemble::init_gaussian(&spec, &[5, 6, 7, 8, 9]);
    let mut rng = Rng::new(31);
    let mut coeffs = PairTensor::zeros(5, 2);
    for l in 0..2 {
        for i in 0..5 {
            for j in (i + 1)..5 {
                coeffs.set_sym(i, j, l, rng.next_f64() + 0.05);
            }
        }
    }
    for i in 0..5 {
        for l in 0..2 {
            let (strength, vec) = anchor(&ensemble, &coeffs, i, l).unwrap();
            let mut expected_strength = 0.0;
            let mut expected = vec![0.0; vec.len()];
            for j in 0..5 {
                if j == i {
                    continue;
                }
                let c = coeffs.get(i, j, l);
                expected_strength += c;
                for (slot, v) in expected.iter_mut().zip(ensemble.layer_flat(j, l)) {
                    *slot += c * v;
                }
            }
            for slot in &mut expected {
                *slot /= expected_strength;
            }
            assert!((strength - expected_strength).abs() < 1e-12);
            for (a, b) in vec.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn zero_lambda_joint_run_is_bitwise_isolated() {
    let spec = autoencoder_spec(&[3, 5, 3]);
    let datasets: Vec<Dataset> = (0..3)
        .map(|i| random_dataset(i, 3, 24, 8, 500 + i as u64))
        .collect();
    let joint_cfg = TrainConfig {
        mode: TrainMode::JointRobust,
        lambda: 0.0,
        lr: 5e-3,
        batch_size: 8,
        max_irls_iters: 4,
        init_sweeps: 3,
        init_rel_tol: 0.0,
        seed: 99,
        ..TrainConfig::default()
    };
    let (joint, history, _) = irls_train(&spec, &datasets, &joint_cfg).unwrap();
    // Completed reweighting iterations tell us how many epochs each network
    // ran beyond the 3 initialization sweeps.
    let iters = history.records.last().unwrap().iteration;
    let isolated_cfg = TrainConfig {
        mode: TrainMode::Isolated,
        baseline_epochs: 3 + iters,
        ..joint_cfg.clone()
    };
    let (isolated, _) = train_baseline(&spec, &datasets, &isolated_cfg).unwrap();
    for i in 0..3 {
        for (a, b) in joint.network(i).iter().zip(isolated.network(i)) {
            for (x, y) in a.flatten().iter().zip(b.flatten()) {
                assert_eq!(x.to_bits(), y.to_bits(), "network {i} differs");
            }
        }
    }
}

#[test]
fn pure_pull_contracts_pair_distances_every_sweep() {
    // Records at the origin with zero initial biases keep every data
    // gradient at exactly zero, leaving only the quadratic coupling.
    let spec = autoencoder_spec(&[2, 3, 2]);
    let zero_data: Vec<Dataset> = (0..2)
        .map(|i| Dataset::from_features(i, Matrix::zeros(4, 2), None))
        .collect();
    let mut ensemble = ParamEnsemble::init_gaussian(&spec, &[11, 77]);
    let ones = PairTensor::filled(2, spec.layer_count() - 1, 1.0);
    let coeffs = coeffs_from_weights(&ones);
    let cfg = TrainConfig {
        lambda: 1.0,
        lr: 0.01,
        batch_size: 4,
        ..TrainConfig::default()
    };
    let mut rngs = vec![Rng::new(1), Rng::new(2)];
    let mut previous = pair_distances(&ensemble);
    for _ in 0..5 {
        solve_weighted_joint(&zero_data, &mut ensemble, &coeffs, &cfg, &mut rngs, 1).unwrap();
        let current = pair_distances(&ensemble);
        for l in 0..current.layers() {
            assert!(
                current.get(0, 1, l) < previous.get(0, 1, l),
                "pair distance at layer pair {l} did not shrink"
            );
        }
        previous = current;
    }
}

/// Gaussian elimination with partial pivoting, used only as a test oracle.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        assert!(diag.abs() > 1e-12, "singular oracle system");
        for row in (col + 1)..n {
            let factor = a[row][col] / diag;
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for k in (row + 1)..n {
            sum -= a[row][k] * x[k];
        }
        x[row] = sum / a[row][row];
    }
    x
}

#[test]
fn quadratic_toy_matches_coupled_normal_equations() {
    // One-layer linear nets with masked inputs make the whole joint objective
    // a quadratic: data terms are least squares in (W_i, b_i) and the
    // coupling is quadratic in their differences. Masking a different
    // coordinate per dataset keeps the stacked system nonsingular (each data
    // term leaves a null direction, but not the same one), and it decouples
    // per output row into a 2(d+1) x 2(d+1) linear solve.
    let d = 2;
    let n_records = 30;
    let lambda = 0.5;
    let spec = NetworkSpec::from_dims(
        &[d, d],
        &[Activation::Identity],
        LossKind::Reconstruction,
    )
    .unwrap();
    let mut datasets = Vec::new();
    for i in 0..2 {
        let mut rng = Rng::new(800 + i as u64);
        let mut rows = Vec::with_capacity(n_records);
        for _ in 0..n_records {
            let x = rng.normal(0.0, 1.0);
            let y = (0.5 + i as f64) * x + 0.3 + rng.normal(0.0, 0.1);
            rows.push(vec![x, y]);
        }
        let mut mask = Matrix::zeros(n_records, d);
        for r in 0..n_records {
            // Dataset 0 sees only x, dataset 1 only y.
            mask.set(r, i, 1.0);
        }
        let mut dataset = Dataset::from_features(i, Matrix::from_rows(&rows), None);
        dataset.mask = Some(mask);
        datasets.push(dataset);
    }

    let cfg = TrainConfig {
        lambda,
        lr: 0.02,
        batch_size: n_records,
        ..TrainConfig::default()
    };
    let mut ensemble = ParamEnsemble::init_gaussian(&spec, &[21, 22]);
    let coeffs = PairTensor::filled(2, 1, 1.0);
    let mut rngs = vec![Rng::new(5), Rng::new(6)];
    solve_weighted_joint(&datasets, &mut ensemble, &coeffs, &cfg, &mut rngs, 3000).unwrap();

    // Oracle: with u = (masked record, 1), the optimum of
    //   sum_i (1/N) sum_r ||x_r - A_i u_r||^2 + 2*lambda*||A_1 - A_2||_F^2
    // satisfies, per output row r of the stacked [a_1; a_2],
    //   [S_1^T + kI, -kI; -kI, S_2^T + kI] [a_1; a_2] = [t_1r; t_2r]
    // where S_i = (1/N) sum u u^T, T_i = (1/N) sum x u^T, k = 2*lambda.
    let coupling = 2.0 * lambda;
    let dim_u = d + 1;
    let mut s = vec![vec![vec![0.0; dim_u]; dim_u]; 2];
    let mut t = vec![vec![vec![0.0; dim_u]; d]; 2];
    for (i, dataset) in datasets.iter().enumerate() {
        for r in 0..n_records {
            let mut u = dataset.model_input(r);
            u.push(1.0);
            let x = dataset.features.row(r);
            for p in 0..dim_u {
                for q in 0..dim_u {
                    s[i][p][q] += u[p] * u[q] / n_records as f64;
                }
                for out in 0..d {
                    t[i][out][p] += x[out] * u[p] / n_records as f64;
                }
            }
        }
    }
    for out in 0..d {
        let size = 2 * dim_u;
        let mut a = vec![vec![0.0; size]; size];
        let mut rhs = vec![0.0; size];
        for p in 0..dim_u {
            for q in 0..dim_u {
                a[p][q] = s[0][q][p];
                a[dim_u + p][dim_u + q] = s[1][q][p];
            }
            a[p][p] += coupling;
            a[dim_u + p][dim_u + p] += coupling;
            a[p][dim_u + p] -= coupling;
            a[dim_u + p][p] -= coupling;
            rhs[p] = t[0][out][p];
            rhs[dim_u + p] = t[1][out][p];
        }
        let solution = solve_linear(a, rhs);
        for i in 0..2 {
            let trained = &ensemble.network(i)[0];
            for col in 0..d {
                let expected = solution[i * dim_u + col];
                let got = trained.weights.get(out, col);
                assert!(
                    (got - expected).abs() < 1e-3,
                    "net {i} W[{out}][{col}]: {got} vs {expected}"
                );
            }
            let expected_bias = solution[i * dim_u + d];
            let got_bias = trained.bias[out];
            assert!(
                (got_bias - expected_bias).abs() < 1e-3,
                "net {i} b[{out}]: {got_bias} vs {expected_bias}"
            );
        }
    }
}

#[test]
fn frozen_anchor_sweeps_preserve_symmetry_bitwise() {
    // Identical datasets, identical seeds, frozen anchors: both networks see
    // exactly the same updates, so they stay bitwise equal after every sweep.
    let spec = autoencoder_spec(&[3, 4, 3]);
    let base = random_dataset(0, 3, 16, 0, 42);
    let mut twin = base.clone();
    twin.id = 1;
    let datasets = vec![base, twin];
    let mut ensemble = ParamEnsemble::init_gaussian(&spec, &[7, 7]);
    let ones = PairTensor::filled(2, 1, 1.0);
    let coeffs = coeffs_from_weights(&ones);
    let cfg = TrainConfig {
        lambda: 2.0,
        lr: 1e-3,
        batch_size: 16,
        jacobi: true,
        ..TrainConfig::default()
    };
    let mut rngs = vec![Rng::new(3), Rng::new(3)];
    for _ in 0..4 {
        solve_weighted_joint(&datasets, &mut ensemble, &coeffs, &cfg, &mut rngs, 1).unwrap();
        for (a, b) in ensemble.network(0).iter().zip(ensemble.network(1)) {
            for (x, y) in a.flatten().iter().zip(b.flatten()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}

#[test]
fn jacobi_updates_are_permutation_equivariant() {
    let spec = autoencoder_spec(&[2, 3, 2]);
    let datasets: Vec<Dataset> = (0..3)
        .map(|i| random_dataset(i, 2, 12, 0, 900 + i as u64))
        .collect();
    let cfg = TrainConfig {
        mode: TrainMode::L2Reg,
        lambda: 1.5,
        lr: 2e-3,
        batch_size: 4,
        baseline_epochs: 5,
        jacobi: true,
        seed: 17,
        ..TrainConfig::default()
    };
    let (in_order, _) = train_baseline(&spec, &datasets, &cfg).unwrap();
    let permuted_data: Vec<Dataset> =
        vec![datasets[2].clone(), datasets[0].clone(), datasets[1].clone()];
    let (permuted, _) = train_baseline(&spec, &permuted_data, &cfg).unwrap();
    // Dataset ids travel with the data, so network k of the permuted run must
    // equal the network that trained on the same dataset in the first run.
    let back = [2usize, 0, 1];
    for (pos, &original) in back.iter().enumerate() {
        for (a, b) in permuted.network(pos).iter().zip(in_order.network(original)) {
            for (x, y) in a.flatten().iter().zip(b.flatten()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}

#[test]
fn full_batch_sweeps_never_increase_the_objective() {
    let mut rng = Rng::new(60);
    for instance in 0..5 {
        let spec = autoencoder_spec(&[3, 4, 3]);
        let datasets: Vec<Dataset> = (0..3)
            .map(|i| {
                let mut features = Matrix::zeros(10, 3);
                gaussian_fill(&mut rng, &mut features, 0.0, 1.0);
                Dataset::from_features(i, features, None)
            })
            .collect();
        let cfg = TrainConfig {
            lambda: 1.0,
            lr: 5e-3,
            batch_size: 10,
            seed: instance,
            ..TrainConfig::default()
        };
        let mut ensemble = ParamEnsemble::init_gaussian(
            &spec,
            &[instance * 3 + 1, instance * 3 + 2, instance * 3 + 3],
        );
        let ones = PairTensor::filled(3, 1, 1.0);
        let coeffs = coeffs_from_weights(&ones);
        let mut rngs: Vec<Rng> = (0..3).map(|i| Rng::new(300 + i)).collect();
        let log =
            solve_weighted_joint(&datasets, &mut ensemble, &coeffs, &cfg, &mut rngs, 10).unwrap();
        for pair in log.objectives.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-9,
                "instance {instance}: objective rose {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }
}

#[test]
fn init_solver_handles_a_single_dataset() {
    let spec = autoencoder_spec(&[2, 3, 2]);
    let datasets = vec![random_dataset(0, 2, 10, 0, 1)];
    let cfg = TrainConfig {
        lambda: 10.0,
        lr: 5e-3,
        batch_size: 5,
        init_sweeps: 4,
        seed: 2,
        ..TrainConfig::default()
    };
    // No pairs exist; the coupled solve degenerates to plain training.
    let ensemble = init_l2(&spec, &datasets, &cfg).unwrap();
    assert_eq!(ensemble.n(), 1);
}

#[test]
fn irls_with_one_dataset_degenerates_to_isolated() {
    let spec = autoencoder_spec(&[2, 3, 2]);
    let datasets = vec![random_dataset(0, 2, 10, 4, 3)];
    let cfg = TrainConfig {
        lambda: 10.0,
        lr: 5e-3,
        batch_size: 5,
        max_irls_iters: 3,
        init_sweeps: 2,
        seed: 4,
        ..TrainConfig::default()
    };
    let (ensemble, history, _) = irls_train(&spec, &datasets, &cfg).unwrap();
    assert_eq!(ensemble.n(), 1);
    for record in &history.records {
        assert_eq!(record.consistency_loss, Some(0.0));
    }
}

#[test]
fn single_cluster_weights_approach_one_and_converge() {
    // Three datasets drawn from one teacher: the influence weights should
    // climb back toward one for every pair and the weight changes settle
    // below tolerance within eight reweighting iterations.
    let record_dim = 4;
    let teacher_spec = autoencoder_spec(&[2, 6, record_dim]);
    let spec = autoencoder_spec(&[record_dim, 8, record_dim]);
    let mut rng = Rng::new(2024);
    let datasets: Vec<Dataset> = (0..3)
        .map(|i| {
            let features = teacher_records(&teacher_spec, 555, 450, 0.05, &mut rng);
            let mut dataset = Dataset::from_features(i, features, None);
            dataset.train_idx = (0..400).collect();
            dataset.test_idx = (400..450).collect();
            dataset
        })
        .collect();
    let cfg = TrainConfig {
        mode: TrainMode::JointRobust,
        lambda: 10.0,
        lr: 3e-3,
        batch_size: 32,
        sweeps_per_irls_iter: 5,
        init_sweeps: 3,
        max_irls_iters: 8,
        seed: 7,
        ..TrainConfig::default()
    };
    let (_, history, state) = irls_train(&spec, &datasets, &cfg).unwrap();
    let final_delta = history
        .records
        .iter()
        .filter_map(|r| r.delta)
        .next_back()
        .unwrap();
    assert!(
        final_delta <= cfg.delta_tol,
        "reweighting did not converge: delta {final_delta}"
    );
    for l in 0..state.weights.layers() {
        for i in 0..3 {
            for j in (i + 1)..3 {
                let w = state.weights.get(i, j, l);
                assert!(w > 0.9, "pair ({i},{j}) layer pair {l} weight {w}");
            }
        }
    }
}

#[test]
fn shareall_equals_isolated_on_the_pooled_dataset() {
    let spec = autoencoder_spec(&[2, 3, 2]);
    let base = random_dataset(0, 2, 12, 0, 321);
    let datasets: Vec<Dataset> = (0..3)
        .map(|i| {
            let mut d = base.clone();
            d.id = i;
            d
        })
        .collect();
    let cfg = TrainConfig {
        mode: TrainMode::Shareall,
        lr: 5e-3,
        batch_size: 6,
        baseline_epochs: 4,
        seed: 11,
        ..TrainConfig::default()
    };
    let (shared, _) = train_baseline(&spec, &datasets, &cfg).unwrap();

    // Pooled dataset: the union in dataset order, as one task with id 0.
    let mut rows = Vec::new();
    for d in &datasets {
        for &r in &d.train_idx {
            rows.push(d.features.row(r).to_vec());
        }
    }
    let pooled = Dataset::from_features(0, Matrix::from_rows(&rows), None);
    let iso_cfg = TrainConfig {
        mode: TrainMode::Isolated,
        ..cfg
    };
    let (pooled_net, _) = train_baseline(&spec, &[pooled], &iso_cfg).unwrap();
    for i in 0..3 {
        for (a, b) in shared.network(i).iter().zip(pooled_net.network(0)) {
            for (x, y) in a.flatten().iter().zip(b.flatten()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}

#[test]
fn pretrain_finetune_with_zero_finetune_equals_shareall() {
    let spec = autoencoder_spec(&[2, 3, 2]);
    let datasets: Vec<Dataset> = (0..2)
        .map(|i| random_dataset(i, 2, 10, 0, 70 + i as u64))
        .collect();
    let base_cfg = TrainConfig {
        lr: 5e-3,
        batch_size: 5,
        baseline_epochs: 6,
        seed: 8,
        ..TrainConfig::default()
    };
    let (shareall, _) = train_baseline(
        &spec,
        &datasets,
        &TrainConfig {
            mode: TrainMode::Shareall,
            ..base_cfg.clone()
        },
    )
    .unwrap();
    let (finetuned, _) = train_baseline(
        &spec,
        &datasets,
        &TrainConfig {
            mode: TrainMode::PretrainFinetune,
            pretrain_epochs: Some(6),
            ..base_cfg
        },
    )
    .unwrap();
    for i in 0..2 {
        for (a, b) in shareall.network(i).iter().zip(finetuned.network(i)) {
            for (x, y) in a.flatten().iter().zip(b.flatten()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}

#[test]
fn l2_reg_with_zero_lambda_is_bitwise_isolated() {
    let spec = autoencoder_spec(&[2, 3, 2]);
    let datasets: Vec<Dataset> = (0..2)
        .map(|i| random_dataset(i, 2, 10, 0, 50 + i as u64))
        .collect();
    let cfg = TrainConfig {
        mode: TrainMode::L2Reg,
        lambda: 0.0,
        lr: 5e-3,
        batch_size: 5,
        baseline_epochs: 5,
        seed: 13,
        ..TrainConfig::default()
    };
    let (l2, _) = train_baseline(&spec, &datasets, &cfg).unwrap();
    let (iso, _) = train_baseline(
        &spec,
        &datasets,
        &TrainConfig {
            mode: TrainMode::Isolated,
            ..cfg
        },
    )
    .unwrap();
    for i in 0..2 {
        for (a, b) in l2.network(i).iter().zip(iso.network(i)) {
            for (x, y) in a.flatten().iter().zip(b.flatten()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}

#[test]
fn divergence_guard_reports_and_aborts() {
    let spec = autoencoder_spec(&[2, 3, 2]);
    let datasets: Vec<Dataset> = (0..2)
        .map(|i| {
            let mut rng = Rng::new(i as u64);
            let mut features = Matrix::zeros(8, 2);
            gaussian_fill(&mut rng, &mut features, 0.0, 40.0);
            Dataset::from_features(i, features, None)
        })
        .collect();
    let cfg = TrainConfig {
        lambda: 1.0,
        lr: 5.0,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let mut ensemble = ParamEnsemble::init_gaussian(&spec, &[1, 2]);
    let ones = PairTensor::filled(2, 1, 1.0);
    let coeffs = coeffs_from_weights(&ones);
    let mut rngs = vec![Rng::new(1), Rng::new(2)];
    let err = solve_weighted_joint(&datasets, &mut ensemble, &coeffs, &cfg, &mut rngs, 50)
        .unwrap_err();
    let message = err.to_string();
    assert!(
        message.contains("lower the learning rate") || message.contains("non-finite"),
        "unexpected error: {message}"
    );
}

#[test]
fn objective_logging_matches_direct_evaluation() {
    let spec = autoencoder_spec(&[2, 3, 2]);
    let datasets: Vec<Dataset> = (0..2)
        .map(|i| random_dataset(i, 2, 8, 0, 40 + i as u64))
        .collect();
    let cfg = TrainConfig {
        lambda: 0.7,
        lr: 1e-3,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let mut ensemble = ParamEnsemble::init_gaussian(&spec, &[4, 5]);
    let ones = PairTensor::filled(2, 1, 1.0);
    let coeffs = coeffs_from_weights(&ones);
    let before =
        weighted_joint_objective(&datasets, &ensemble, &coeffs, 2.0 * cfg.lambda).unwrap();
    let mut rngs = vec![Rng::new(9), Rng::new(10)];
    let log = solve_weighted_joint(&datasets, &mut ensemble, &coeffs, &cfg, &mut rngs, 2).unwrap();
    assert!((log.objectives[0] - before).abs() < 1e-12);
    let after =
        weighted_joint_objective(&datasets, &ensemble, &coeffs, 2.0 * cfg.lambda).unwrap();
    assert!((log.objectives[2] - after).abs() < 1e-12);
}
