use hosfl::model::{self, ActivationKind, Batch, LossKind, SplitModelConfig, Targets};
use hosfl::numeric::{self, Matrix, Vector};
use hosfl::rng::{derive_tagged, gaussian_vector, CounterStream};
use hosfl::zo::{self, MeanSampling, ZoConfig};

fn gaussian_matrix(seed: u64, rows: usize, cols: usize) -> Matrix {
    let s = CounterStream::new(seed);
    Matrix::new(rows, cols, (0..rows * cols).map(|k| s.gaussian(k as u64)).collect()).unwrap()
}

/// Linear client (one identity layer) under a tanh server.
fn linear_client() -> (SplitModelConfig, Vector, Batch) {
    let cfg = SplitModelConfig::new(vec![3, 2, 3, 1], ActivationKind::Identity, 1, LossKind::SquaredError, true).unwrap();
    let theta = model::init_params(&cfg, 11);
    let batch = Batch::new(gaussian_matrix(12, 4, 3), Targets::Values(gaussian_matrix(13, 4, 1))).unwrap();
    (cfg, theta, batch)
}

fn tanh_client() -> (SplitModelConfig, Vector, Batch) {
    let cfg = SplitModelConfig::new(vec![3, 4, 3, 2], ActivationKind::Tanh, 2, LossKind::SoftmaxCrossEntropy, true).unwrap();
    let mut theta = model::init_params(&cfg, 21);
    theta.add_scaled(0.5, &gaussian_vector(22, cfg.total_dim())).unwrap();
    let batch = Batch::new(gaussian_matrix(23, 5, 3), Targets::Classes(vec![0, 1, 1, 0, 1])).unwrap();
    (cfg, theta, batch)
}

fn client_pass(cfg: &SplitModelConfig, theta: &Vector, batch: &Batch) -> (Vector, Matrix, Matrix, Vector) {
    let (theta_c, theta_s) = theta.split_at(cfg.client_dim());
    let z = model::client_forward(&theta_c, batch, cfg).unwrap();
    let pass = model::server_forward_backward(&theta_s, &z, &batch.targets, cfg).unwrap();
    let g_c = model::client_backward(&theta_c, batch, &pass.lambda, cfg).unwrap();
    (theta_c, z, pass.lambda, g_c)
}

#[test]
fn linear_client_estimator_is_unbiased() {
    let (cfg, theta, batch) = linear_client();
    let zo = ZoConfig::new(10, 1e-3).unwrap();
    let d = zo::estimator_diagnostics(&cfg, &theta, &batch, &zo, 100_000, 5, MeanSampling::Plain).unwrap();
    let g = client_pass(&cfg, &theta, &batch).3;
    for i in 0..g.dim() {
        let err = (d.mean_estimate[i] - g[i]).abs();
        assert!(err <= 0.01 * g.norm(), "coordinate {i}: {} vs {}", d.mean_estimate[i], g[i]);
    }
    assert!(d.empirical_bias_sq <= 1e-3 * d.true_g_c_norm_sq);
}

#[test]
fn more_perturbations_shrink_variance() {
    let (cfg, theta, batch) = linear_client();
    let run = |p| {
        let zo = ZoConfig::new(p, 1e-3).unwrap();
        zo::estimator_diagnostics(&cfg, &theta, &batch, &zo, 20_000, 9, MeanSampling::Plain)
            .unwrap()
            .empirical_variance
    };
    let ratio = run(1) / run(10);
    assert!((5.0..=15.0).contains(&ratio), "variance ratio {ratio}");
}

#[test]
fn scalars_leave_parameters_untouched() {
    let (cfg, theta, batch) = tanh_client();
    let (theta_c, z, lambda, _) = client_pass(&cfg, &theta, &batch);
    let before = theta_c.to_le_bytes();
    let zo = ZoConfig::default();
    let seeds: Vec<u64> = (0..zo.perturbations as u64).collect();
    zo::zo_scalars(&theta_c, &lambda, &z, &batch, &seeds, &zo, &cfg, 0, 0).unwrap();
    assert_eq!(before, theta_c.to_le_bytes());
}

#[test]
fn nonlinear_scalars_match_direct_evaluation() {
    let (cfg, theta, batch) = tanh_client();
    let (theta_c, z, lambda, _) = client_pass(&cfg, &theta, &batch);
    let zo = ZoConfig::new(4, 1e-2).unwrap();
    let seeds = [101, 202, 303, 404];
    let out = zo::zo_scalars(&theta_c, &lambda, &z, &batch, &seeds, &zo, &cfg, 3, 1).unwrap();
    assert_eq!((out.round, out.client), (3, 1));
    for (v, &s) in out.values.iter().zip(&seeds) {
        let u = gaussian_vector(s, cfg.client_dim());
        let shifted = numeric::axpy(zo.mu, &u, &theta_c).unwrap();
        let zp = model::client_forward(&shifted, &batch, &cfg).unwrap();
        let direct: f64 = lambda
            .data()
            .iter()
            .zip(zp.data().iter().zip(z.data()))
            .map(|(l, (a, b))| l * (a - b))
            .sum();
        assert!((direct - v).abs() <= 1e-12);
    }
}

#[test]
fn averaging_commutes_with_reconstruction() {
    let zo = ZoConfig::new(6, 1e-3).unwrap();
    let d_c = 17;
    let seeds: Vec<u64> = (0..6).map(|p| derive_tagged(1, 2, 3, p)).collect();
    let per_client: Vec<Vec<f64>> = (0..5)
        .map(|k| {
            let s = CounterStream::new(k);
            (0..6).map(|p| 1e-3 * s.gaussian(p)).collect()
        })
        .collect();
    let separate: Vec<Vector> = per_client
        .iter()
        .map(|v| zo::reconstruct_gradient(v, &seeds, &zo, d_c).unwrap())
        .collect();
    let lhs = numeric::mean(&separate).unwrap();
    let v_bar: Vec<f64> = (0..6)
        .map(|p| per_client.iter().map(|v| v[p]).sum::<f64>() / 5.0)
        .collect();
    let rhs = zo::reconstruct_gradient(&v_bar, &seeds, &zo, d_c).unwrap();
    for i in 0..d_c {
        assert!((lhs[i] - rhs[i]).abs() <= 1e-12);
    }
}

#[test]
fn bias_shrinks_quadratically_in_mu() {
    let (cfg, theta, batch) = tanh_client();
    let g = client_pass(&cfg, &theta, &batch).3;
    let bias = |mu| {
        let zo = ZoConfig::new(2, mu).unwrap();
        let d = zo::estimator_diagnostics(&cfg, &theta, &batch, &zo, 50_000, 31, MeanSampling::Paired).unwrap();
        numeric::axpy(-1.0, &g, &d.mean_estimate).unwrap().norm()
    };
    let ratio = bias(0.04) / bias(0.02);
    assert!((3.0..=5.0).contains(&ratio), "bias norm ratio {ratio}");
}

#[test]
fn gaussian_directions_have_identity_covariance() {
    let n = 100_000;
    for dim in [1usize, 3, 8] {
        let mut cov = vec![0.0; dim * dim];
        let mut mean = vec![0.0; dim];
        for s in 0..n {
            let u = gaussian_vector(derive_tagged(77, 0, dim as u64, s), dim);
            for i in 0..dim {
                mean[i] += u[i];
                for j in 0..dim {
                    cov[i * dim + j] += u[i] * u[j];
                }
            }
        }
        for i in 0..dim {
            assert!((mean[i] / n as f64).abs() < 0.02);
            for j in 0..dim {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((cov[i * dim + j] / n as f64 - target).abs() < 0.05, "dim {dim} entry ({i},{j})");
            }
        }
    }
}

#[test]
fn gaussian_sixth_moment_of_norm() {
    let n = 1_000_000u64;
    for dim in [1usize, 2, 4] {
        let sum: f64 = (0..n)
            .map(|s| gaussian_vector(derive_tagged(78, 0, dim as u64, s), dim).norm_sq().powi(3))
            .sum();
        let d = dim as f64;
        let target = d * (d + 2.0) * (d + 4.0);
        let got = sum / n as f64;
        assert!((got / target - 1.0).abs() < 0.05, "dim {dim}: {got} vs {target}");
    }
}

#[test]
fn spsa_mean_recovers_full_gradient() {
    let cfg = SplitModelConfig::new(vec![2, 3, 1], ActivationKind::Identity, 1, LossKind::SquaredError, false).unwrap();
    let theta = model::init_params(&cfg, 41);
    let batch = Batch::new(gaussian_matrix(42, 6, 2), Targets::Values(gaussian_matrix(43, 6, 1))).unwrap();
    let (g_c, g_s) = model::full_gradient(&theta, &batch, &cfg).unwrap();
    let g = Vector::concat(&g_c, &g_s);
    let n = 200_000u64;
    let mut acc = Vector::zeros(g.dim());
    for s in 0..n {
        let est = zo::spsa_estimate(&theta, &batch, 1e-3, derive_tagged(44, 0, s, 0), &cfg).unwrap();
        acc.add_scaled(1.0 / n as f64, &est).unwrap();
    }
    let err = numeric::axpy(-1.0, &g, &acc).unwrap().norm();
    assert!(err <= 0.02 * g.norm(), "relative error {}", err / g.norm());
}
