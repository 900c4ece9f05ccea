//! Parameter update rules.
//!
//! Plain SGD is the reference rule: `theta <- theta - eta * g`. Adam keeps
//! per-coordinate moments; stale clients replay the identical transition
//! for every missed round, so replay stays exact under Adam as well.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numeric::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Sgd,
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Sgd
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OptimizerState {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
        m: Vector,
        v: Vector,
        step: u64,
    },
}

impl OptimizerState {
    pub fn new(cfg: &OptimizerConfig, dim: usize) -> Self {
        match *cfg {
            OptimizerConfig::Sgd => OptimizerState::Sgd,
            OptimizerConfig::Adam { beta1, beta2, eps } => OptimizerState::Adam {
                beta1,
                beta2,
                eps,
                m: Vector::zeros(dim),
                v: Vector::zeros(dim),
                step: 0,
            },
        }
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut Vector, grad: &Vector, eta: f64) -> Result<()> {
        match self {
            OptimizerState::Sgd => params.add_scaled(-eta, grad),
            OptimizerState::Adam {
                beta1,
                beta2,
                eps,
                m,
                v,
                step,
            } => {
                // Dimension check before mutating anything.
                let mut probe = Vector::zeros(params.dim());
                probe.add_scaled(1.0, grad)?;
                *step += 1;
                let bc1 = 1.0 - beta1.powi(*step as i32);
                let bc2 = 1.0 - beta2.powi(*step as i32);
                for i in 0..params.dim() {
                    let g = grad[i];
                    m[i] = *beta1 * m[i] + (1.0 - *beta1) * g;
                    v[i] = *beta2 * v[i] + (1.0 - *beta2) * g * g;
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    params[i] -= eta * m_hat / (v_hat.sqrt() + *eps);
                }
                Ok(())
            }
        }
    }

    /// Element-wise mean of states (FedAvg of optimizer moments).
    pub fn average(states: &[OptimizerState]) -> Option<OptimizerState> {
        let first = states.first()?.clone();
        match first {
            OptimizerState::Sgd => Some(OptimizerState::Sgd),
            OptimizerState::Adam {
                beta1,
                beta2,
                eps,
                m,
                v,
                step,
            } => {
                let k = states.len() as f64;
                let mut m_acc = Vector::zeros(m.dim());
                let mut v_acc = Vector::zeros(v.dim());
                for s in states {
                    if let OptimizerState::Adam { m, v, .. } = s {
                        m_acc.add_scaled(1.0, m).ok()?;
                        v_acc.add_scaled(1.0, v).ok()?;
                    }
                }
                Some(OptimizerState::Adam {
                    beta1,
                    beta2,
                    eps,
                    m: m_acc.scaled(1.0 / k),
                    v: v_acc.scaled(1.0 / k),
                    step,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step() {
        let mut s = OptimizerState::new(&OptimizerConfig::Sgd, 2);
        let mut p = Vector::new(vec![1.0, 2.0]);
        s.step(&mut p, &Vector::new(vec![3.0, -1.0]), 0.1).unwrap();
        assert_eq!(p.as_slice(), &[1.0 - 0.1 * 3.0, 2.0 + 0.1]);
    }

    #[test]
    fn adam_first_step_is_sign_times_eta() {
        let cfg = OptimizerConfig::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 0.0,
        };
        let mut s = OptimizerState::new(&cfg, 2);
        let mut p = Vector::new(vec![0.0, 0.0]);
        s.step(&mut p, &Vector::new(vec![4.0, -0.5]), 0.01).unwrap();
        assert!((p[0] + 0.01).abs() < 1e-15);
        assert!((p[1] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn adam_rejects_mismatch_without_mutation() {
        let cfg = OptimizerConfig::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        };
        let mut s = OptimizerState::new(&cfg, 2);
        let before = s.clone();
        let mut p = Vector::zeros(2);
        assert!(s.step(&mut p, &Vector::zeros(3), 0.1).is_err());
        assert_eq!(s, before);
    }
}
