#![allow(dead_code)]

use hosfl::model::{self, ActivationKind, Batch, LossKind, SplitModelConfig, Targets};
use hosfl::numeric::{Matrix, Vector};
use hosfl::rng::{derive_tagged, gaussian_vector, seeded_rng, CounterStream};
use rand::Rng;

/// Random split model with total dimension at most 50, perturbed
/// parameters, and a small batch.
pub fn random_instance(i: u64) -> (SplitModelConfig, Vector, Batch) {
    let mut rng = seeded_rng(derive_tagged(0x7e57, 1, i, 0));
    let act = [ActivationKind::Identity, ActivationKind::Tanh, ActivationKind::Relu][rng.gen_range(0..3)];
    let classify = rng.gen_bool(0.5);
    let d_in = rng.gen_range(1..=3);
    let out = if classify { rng.gen_range(2..=3) } else { rng.gen_range(1..=2) };
    let deep = rng.gen_bool(0.5);
    let dims = if deep {
        vec![d_in, rng.gen_range(2..=3), rng.gen_range(2..=3), out]
    } else {
        vec![d_in, rng.gen_range(2..=4), out]
    };
    let cut = if deep { rng.gen_range(1..=2) } else { 1 };
    let loss = if classify {
        LossKind::SoftmaxCrossEntropy
    } else {
        LossKind::SquaredError
    };
    let cfg = SplitModelConfig::new(dims, act, cut, loss, rng.gen_bool(0.7)).unwrap();
    assert!(cfg.total_dim() <= 50);
    let mut theta = model::init_params(&cfg, derive_tagged(0x7e57, 2, i, 0));
    theta
        .add_scaled(0.3, &gaussian_vector(derive_tagged(0x7e57, 3, i, 0), cfg.total_dim()))
        .unwrap();
    let b = rng.gen_range(1..=4);
    let xs = CounterStream::new(derive_tagged(0x7e57, 4, i, 0));
    let inputs = Matrix::new(b, d_in, (0..b * d_in).map(|k| xs.gaussian(k as u64)).collect()).unwrap();
    let targets = if classify {
        Targets::Classes((0..b).map(|_| rng.gen_range(0..out)).collect())
    } else {
        let ys = CounterStream::new(derive_tagged(0x7e57, 5, i, 0));
        Targets::Values(Matrix::new(b, out, (0..b * out).map(|k| ys.gaussian(k as u64)).collect()).unwrap())
    };
    (cfg, theta, Batch::new(inputs, targets).unwrap())
}

fn act(kind: ActivationKind, x: f64) -> f64 {
    match kind {
        ActivationKind::Identity => x,
        ActivationKind::Tanh => x.tanh(),
        ActivationKind::Relu => x.max(0.0),
    }
}

/// Independently coded forward pass over layers `[first, last)` of one
/// sample, reading parameters as `W[out][in]` then bias per layer.
pub fn naive_forward(cfg: &SplitModelConfig, params: &[f64], first: usize, last: usize, x: &[f64]) -> Vec<f64> {
    let n_layers = cfg.layer_dims.len() - 1;
    let mut h = x.to_vec();
    let mut off = 0;
    for l in first..last {
        let (n_in, n_out) = (cfg.layer_dims[l], cfg.layer_dims[l + 1]);
        let mut next = vec![0.0; n_out];
        for (o, slot) in next.iter_mut().enumerate() {
            let mut s = 0.0;
            for i in 0..n_in {
                s += params[off + o * n_in + i] * h[i];
            }
            if cfg.bias {
                s += params[off + n_in * n_out + o];
            }
            *slot = if l + 1 < n_layers { act(cfg.activation, s) } else { s };
        }
        off += n_in * n_out + if cfg.bias { n_out } else { 0 };
        h = next;
    }
    h
}

/// Batch-mean loss from the naive forward pass.
pub fn naive_loss(cfg: &SplitModelConfig, theta: &[f64], batch: &Batch) -> f64 {
    let n_layers = cfg.layer_dims.len() - 1;
    let mut total = 0.0;
    for r in 0..batch.size() {
        let y_hat = naive_forward(cfg, theta, 0, n_layers, batch.inputs.row(r));
        total += match &batch.targets {
            Targets::Values(y) => y_hat.iter().zip(y.row(r)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
            Targets::Classes(c) => {
                let m = y_hat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + y_hat.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                lse - y_hat[c[r]]
            }
        };
    }
    total / batch.size() as f64
}
