//! Client-side zeroth-order machinery.
//!
//! A client never backpropagates. Given the server's activation feedback
//! `lambda` and the anchor activation `z`, it evaluates `P` perturbed
//! forwards `z_p = f_c(theta_c + mu * u_p)` and reports the scalars
//! `v_p = <lambda, z_p - z>`. Anyone holding the seeds can rebuild
//! `g = 1/(P mu) * sum_p v_p u_p`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, Batch, SplitModelConfig};
use crate::numeric::{dot_slices, Matrix, Vector};
use crate::rng::{self, derive_tagged, domain, gaussian_vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoConfig {
    /// `P`, perturbations per round.
    pub perturbations: usize,
    /// Smoothing parameter `mu`.
    pub mu: f64,
}

impl Default for ZoConfig {
    fn default() -> Self {
        ZoConfig {
            perturbations: 5,
            mu: 1e-3,
        }
    }
}

impl ZoConfig {
    pub fn new(perturbations: usize, mu: f64) -> Result<Self> {
        let zo = ZoConfig { perturbations, mu };
        zo.validate()?;
        Ok(zo)
    }

    pub fn validate(&self) -> Result<()> {
        if self.perturbations == 0 {
            return Err(Error::InvalidConfig("zo.perturbations must be >= 1".into()));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "zo.mu must lie in (0, 1), got {}",
                self.mu
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarProjections {
    pub values: Vec<f64>,
    pub round: u64,
    pub client: usize,
}

/// `v_p` for explicit directions. `theta_c` is only read.
pub fn project_directions(
    theta_c: &Vector,
    lambda: &Matrix,
    z_anchor: &Matrix,
    batch: &Batch,
    directions: &[Vector],
    mu: f64,
    cfg: &SplitModelConfig,
) -> Result<Vec<f64>> {
    if lambda.rows() != z_anchor.rows() || lambda.cols() != z_anchor.cols() {
        return Err(Error::DimensionMismatch {
            context: "lambda vs anchor activation",
            expected: z_anchor.rows() * z_anchor.cols(),
            actual: lambda.rows() * lambda.cols(),
        });
    }
    let mut perturbed = theta_c.clone();
    let mut out = Vec::with_capacity(directions.len());
    for u in directions {
        perturbed.as_mut_slice().copy_from_slice(theta_c.as_slice());
        perturbed.add_scaled(mu, u)?;
        let z_p = model::client_forward(&perturbed, batch, cfg)?;
        if z_p.rows() != z_anchor.rows() || z_p.cols() != z_anchor.cols() {
            return Err(Error::DimensionMismatch {
                context: "anchor activation",
                expected: z_p.rows() * z_p.cols(),
                actual: z_anchor.rows() * z_anchor.cols(),
            });
        }
        let diff: Vec<f64> = z_p
            .data()
            .iter()
            .zip(z_anchor.data())
            .map(|(a, b)| a - b)
            .collect();
        out.push(dot_slices(lambda.data(), &diff));
    }
    Ok(out)
}

/// Seeded scalar projections for one client and one round.
#[allow(clippy::too_many_arguments)]
pub fn zo_scalars(
    theta_c: &Vector,
    lambda: &Matrix,
    z_anchor: &Matrix,
    batch: &Batch,
    seeds: &[u64],
    zo: &ZoConfig,
    cfg: &SplitModelConfig,
    round: u64,
    client: usize,
) -> Result<ScalarProjections> {
    if seeds.len() != zo.perturbations {
        return Err(Error::DimensionMismatch {
            context: "seed count",
            expected: zo.perturbations,
            actual: seeds.len(),
        });
    }
    let d_c = cfg.client_dim();
    let dirs: Vec<Vector> = seeds.iter().map(|&s| gaussian_vector(s, d_c)).collect();
    let values = project_directions(theta_c, lambda, z_anchor, batch, &dirs, zo.mu, cfg)?;
    Ok(ScalarProjections {
        values,
        round,
        client,
    })
}

/// `1/(P mu) * sum_p v_p u_p` for explicit directions, accumulated in `p` order.
pub fn reconstruct_from_directions(scalars: &[f64], directions: &[Vector], mu: f64, dim: usize) -> Result<Vector> {
    if scalars.len() != directions.len() {
        return Err(Error::DimensionMismatch {
            context: "scalars vs directions",
            expected: directions.len(),
            actual: scalars.len(),
        });
    }
    let denom = scalars.len() as f64 * mu;
    let mut g = Vector::zeros(dim);
    for (v, u) in scalars.iter().zip(directions) {
        g.add_scaled(v / denom, u)?;
    }
    Ok(g)
}

/// Rebuilds the client gradient estimate from broadcast scalars and seeds.
pub fn reconstruct_gradient(scalars: &[f64], seeds: &[u64], zo: &ZoConfig, d_c: usize) -> Result<Vector> {
    if scalars.len() != zo.perturbations || seeds.len() != zo.perturbations {
        return Err(Error::DimensionMismatch {
            context: "scalars/seeds vs perturbation count",
            expected: zo.perturbations,
            actual: if scalars.len() != zo.perturbations {
                scalars.len()
            } else {
                seeds.len()
            },
        });
    }
    let denom = zo.perturbations as f64 * zo.mu;
    let mut g = Vector::zeros(d_c);
    for (v, &s) in scalars.iter().zip(seeds) {
        g.add_scaled(v / denom, &gaussian_vector(s, d_c))?;
    }
    Ok(g)
}

/// Central-difference coefficient `(L(theta + mu z) - L(theta - mu z)) / (2 mu)`
/// and the estimate `coef * z` along an explicit direction.
pub fn spsa_along(
    theta: &Vector,
    batch: &Batch,
    mu: f64,
    direction: &Vector,
    cfg: &SplitModelConfig,
) -> Result<(f64, Vector)> {
    let mut plus = theta.clone();
    plus.add_scaled(mu, direction)?;
    let mut minus = theta.clone();
    minus.add_scaled(-mu, direction)?;
    let lp = model::full_loss(&plus, batch, cfg)?;
    let lm = model::full_loss(&minus, batch, cfg)?;
    let coef = (lp - lm) / (2.0 * mu);
    if !coef.is_finite() {
        return Err(Error::NonFinite {
            layer: "spsa difference".into(),
        });
    }
    Ok((coef, direction.scaled(coef)))
}

/// Two-point full-model estimator used by the ZO-SFL baseline.
pub fn spsa_estimate(theta: &Vector, batch: &Batch, mu: f64, seed: u64, cfg: &SplitModelConfig) -> Result<Vector> {
    if mu <= 0.0 {
        return Err(Error::InvalidConfig("spsa mu must be positive".into()));
    }
    let z = gaussian_vector(seed, theta.dim());
    Ok(spsa_along(theta, batch, mu, &z, cfg)?.1)
}

/// Closed-form constants of the second-moment and bias bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryBounds {
    pub d_c: usize,
    pub perturbations: usize,
    pub mu: f64,
    pub gamma: f64,
    /// `2 (1 + (d_c + 1) / P)`.
    pub c1: f64,
    /// `(mu^2 / 2) d_c (d_c + 2) (d_c + 4) Gamma^4`.
    pub sigma_zo_sq: f64,
    /// `(mu^2 Gamma^4 / 4) (d_c + 3)^3`.
    pub bias_bound_sq: f64,
}

pub fn theory_bounds(d_c: usize, perturbations: usize, mu: f64, gamma: f64) -> TheoryBounds {
    let d = d_c as f64;
    let g4 = gamma.powi(4);
    TheoryBounds {
        d_c,
        perturbations,
        mu,
        gamma,
        c1: 2.0 * (1.0 + (d + 1.0) / perturbations as f64),
        sigma_zo_sq: 0.5 * mu * mu * d * (d + 2.0) * (d + 4.0) * g4,
        bias_bound_sq: 0.25 * mu * mu * g4 * (d + 3.0).powi(3),
    }
}

/// Analysis-side constants. None of these drive the protocol.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub gamma: Option<f64>,
    pub sigma_sq: Option<f64>,
    pub kappa_sq: Option<f64>,
    pub beta: Option<f64>,
}

/// Instance-measured regularity bound and its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaMeasurement {
    pub lambda_norm: f64,
    pub jacobian_op: f64,
    /// Upper estimate of the client Hessian tensor norm:
    /// `sqrt(sum_k ||H_k||_op^2)` over activation entries `k`.
    pub hessian_op: f64,
    pub gamma: f64,
}

/// Largest |eigenvalue| of a symmetric matrix by power iteration from a
/// fixed start vector.
fn symmetric_spectral_radius(m: &Matrix) -> f64 {
    let n = m.rows();
    if n == 0 {
        return 0.0;
    }
    let stream = rng::CounterStream::new(0x5EED);
    let mut v: Vec<f64> = (0..n as u64).map(|i| stream.gaussian(i)).collect();
    let mut estimate = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..n).map(|i| dot_slices(m.row(i), &v)).collect();
        let norm = dot_slices(&w, &w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
        let converged = (norm - estimate).abs() <= 1e-12 * norm;
        estimate = norm;
        v = next;
        if converged {
            break;
        }
    }
    estimate
}

/// Largest singular value of `a`.
pub fn operator_norm(a: &Matrix) -> f64 {
    let (r, c) = (a.rows(), a.cols());
    let mut gram = Matrix::zeros(c, c);
    for i in 0..c {
        for j in 0..c {
            let mut acc = 0.0;
            for k in 0..r {
                acc += a.get(k, i) * a.get(k, j);
            }
            gram.data_mut()[i * c + j] = acc;
        }
    }
    symmetric_spectral_radius(&gram).sqrt()
}

/// Measures `Gamma = max(||lambda||, ||J||_op, ||H||_op)` at `theta`, with the
/// client Hessian from central differences of the exact Jacobian.
pub fn measure_gamma(theta: &Vector, batch: &Batch, cfg: &SplitModelConfig) -> Result<GammaMeasurement> {
    let d_c = cfg.client_dim();
    let (theta_c, theta_s) = theta.split_at(d_c);
    let z = model::client_forward(&theta_c, batch, cfg)?;
    let pass = model::server_forward_backward(&theta_s, &z, &batch.targets, cfg)?;
    let lambda_norm = pass.lambda.frobenius_sq().sqrt();
    let jac = model::client_jacobian(&theta_c, batch, cfg)?;
    let jacobian_op = operator_norm(&jac);

    let h = 1e-4;
    let outputs = jac.rows();
    // hess[k] is d_c x d_c for activation entry k.
    let mut hess = vec![Matrix::zeros(d_c, d_c); outputs];
    let mut probe = theta_c.clone();
    for j in 0..d_c {
        let base = theta_c[j];
        probe[j] = base + h;
        let jp = model::client_jacobian(&probe, batch, cfg)?;
        probe[j] = base - h;
        let jm = model::client_jacobian(&probe, batch, cfg)?;
        probe[j] = base;
        for (k, hk) in hess.iter_mut().enumerate() {
            for i in 0..d_c {
                hk.data_mut()[i * d_c + j] = (jp.get(k, i) - jm.get(k, i)) / (2.0 * h);
            }
        }
    }
    let mut sum_sq = 0.0;
    for hk in &mut hess {
        // Symmetrize away finite-difference noise.
        for i in 0..d_c {
            for j in (i + 1)..d_c {
                let avg = 0.5 * (hk.get(i, j) + hk.get(j, i));
                hk.data_mut()[i * d_c + j] = avg;
                hk.data_mut()[j * d_c + i] = avg;
            }
        }
        let r = symmetric_spectral_radius(hk);
        sum_sq += r * r;
    }
    let hessian_op = sum_sq.sqrt();
    Ok(GammaMeasurement {
        lambda_norm,
        jacobian_op,
        hessian_op,
        gamma: lambda_norm.max(jacobian_op).max(hessian_op),
    })
}

/// How the Monte Carlo mean of the estimator is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanSampling {
    /// Plain average of independent estimates.
    Plain,
    /// Each draw `U` is paired with `-U` (same distribution), and the
    /// zero-mean control variate `(1/P) sum_p u_p u_p^T g_c - g_c` is
    /// subtracted. Unbiased for `E[g_hat]`; the remaining noise scales
    /// with the same power of `mu` as the bias itself.
    Paired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorDiagnostics {
    pub n_trials: usize,
    /// `||mean(g_hat) - g_c||^2`.
    pub empirical_bias_sq: f64,
    /// `mean(||g_hat||^2)`.
    pub empirical_second_moment: f64,
    /// `mean(||g_hat - mean(g_hat)||^2)`.
    pub empirical_variance: f64,
    pub true_g_c_norm_sq: f64,
    /// Monte Carlo estimate of `E[g_hat]`.
    pub mean_estimate: Vector,
}

/// Monte Carlo over fresh seeds at a fixed `(theta, batch)`.
pub fn estimator_diagnostics(
    cfg: &SplitModelConfig,
    theta: &Vector,
    batch: &Batch,
    zo: &ZoConfig,
    n_trials: usize,
    seed: u64,
    sampling: MeanSampling,
) -> Result<EstimatorDiagnostics> {
    zo.validate()?;
    if n_trials == 0 {
        return Err(Error::InvalidConfig("n_trials must be >= 1".into()));
    }
    let d_c = cfg.client_dim();
    let (theta_c, theta_s) = theta.split_at(d_c);
    let z = model::client_forward(&theta_c, batch, cfg)?;
    let pass = model::server_forward_backward(&theta_s, &z, &batch.targets, cfg)?;
    let g_c = model::client_backward(&theta_c, batch, &pass.lambda, cfg)?;
    let p = zo.perturbations;

    let mut mean = vec![0.0; d_c];
    let mut sq_sum = 0.0;
    let mut samples = 0usize;
    let mut estimates_sq_mean = vec![0.0; d_c];
    for trial in 0..n_trials {
        let dirs: Vec<Vector> = (1..=p as u64)
            .map(|k| gaussian_vector(derive_tagged(seed, domain::DIAGNOSTIC, trial as u64, k), d_c))
            .collect();
        let v = project_directions(&theta_c, &pass.lambda, &z, batch, &dirs, zo.mu, cfg)?;
        let g_hat = reconstruct_from_directions(&v, &dirs, zo.mu, d_c)?;
        sq_sum += g_hat.norm_sq();
        samples += 1;
        for (acc, x) in estimates_sq_mean.iter_mut().zip(g_hat.as_slice()) {
            *acc += x;
        }
        match sampling {
            MeanSampling::Plain => {
                for (m, x) in mean.iter_mut().zip(g_hat.as_slice()) {
                    *m += x;
                }
            }
            MeanSampling::Paired => {
                let neg: Vec<Vector> = dirs.iter().map(|u| u.scaled(-1.0)).collect();
                let v_neg = project_directions(&theta_c, &pass.lambda, &z, batch, &neg, zo.mu, cfg)?;
                let g_neg = reconstruct_from_directions(&v_neg, &neg, zo.mu, d_c)?;
                sq_sum += g_neg.norm_sq();
                samples += 1;
                for (acc, x) in estimates_sq_mean.iter_mut().zip(g_neg.as_slice()) {
                    *acc += x;
                }
                // Control variate (1/P) sum_p u_p (u_p . g_c), mean g_c.
                let mut cv = Vector::zeros(d_c);
                for u in &dirs {
                    cv.add_scaled(dot_slices(u.as_slice(), g_c.as_slice()) / p as f64, u)?;
                }
                for i in 0..d_c {
                    mean[i] += 0.5 * (g_hat[i] + g_neg[i]) - cv[i] + g_c[i];
                }
            }
        }
    }
    let n = n_trials as f64;
    let bias_sq = mean
        .iter()
        .zip(g_c.as_slice())
        .fold(0.0, |acc, (m, g)| acc + (m / n - g) * (m / n - g));
    let second = sq_sum / samples as f64;
    let raw_mean_sq = estimates_sq_mean
        .iter()
        .fold(0.0, |acc, s| acc + (s / samples as f64) * (s / samples as f64));
    Ok(EstimatorDiagnostics {
        n_trials,
        empirical_bias_sq: bias_sq,
        empirical_second_moment: second,
        empirical_variance: (second - raw_mean_sq).max(0.0),
        true_g_c_norm_sq: g_c.norm_sq(),
        mean_estimate: Vector::new(mean.iter().map(|m| m / n).collect()),
    })
}
