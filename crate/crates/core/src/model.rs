//! Layered fully connected network split at a cut layer.
//!
//! Parameters are laid out layer by layer, each layer as its weight matrix
//! (row-major, `out x in`) followed by its bias (when enabled). The client
//! owns layers `[0, cut_index)`, the server owns the rest. The activation
//! function follows every layer except the last one of the full network,
//! so the cut activation is post-nonlinearity.
//!
//! Losses are batch means. `lambda` is the gradient of that mean with
//! respect to the cut activation matrix, row per sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Matrix, Vector};
use crate::rng::CounterStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Identity,
    Tanh,
    Relu,
}

impl ActivationKind {
    fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::Identity => x,
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
        }
    }

    /// Derivative from the pre-activation. ReLU uses 0 at the kink.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            ActivationKind::Identity => 1.0,
            ActivationKind::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            ActivationKind::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    SquaredError,
    SoftmaxCrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitModelConfig {
    /// Widths `[n_in, h_1, ..., n_out]`; layer `i` maps `layer_dims[i]` to `layer_dims[i + 1]`.
    pub layer_dims: Vec<usize>,
    pub activation: ActivationKind,
    /// Layers `[0, cut_index)` run on the client.
    pub cut_index: usize,
    pub loss: LossKind,
    #[serde(default = "default_bias")]
    pub bias: bool,
}

fn default_bias() -> bool {
    true
}

impl SplitModelConfig {
    pub fn new(
        layer_dims: Vec<usize>,
        activation: ActivationKind,
        cut_index: usize,
        loss: LossKind,
        bias: bool,
    ) -> Result<Self> {
        let cfg = SplitModelConfig {
            layer_dims,
            activation,
            cut_index,
            loss,
            bias,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 3 {
            return Err(Error::InvalidConfig(
                "layer_dims must describe at least two layers".into(),
            ));
        }
        if self.layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig("layer_dims entries must be positive".into()));
        }
        if self.cut_index == 0 || self.cut_index >= self.num_layers() {
            return Err(Error::InvalidConfig(format!(
                "cut_index must lie in (0, {}), got {}",
                self.num_layers(),
                self.cut_index
            )));
        }
        if self.loss == LossKind::SoftmaxCrossEntropy && self.output_dim() < 2 {
            return Err(Error::InvalidConfig(
                "softmax_cross_entropy needs at least two outputs".into(),
            ));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len().saturating_sub(1)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap_or(&0)
    }

    /// Width `D` of the cut activation.
    pub fn cut_width(&self) -> usize {
        self.layer_dims[self.cut_index]
    }

    pub fn layer_param_count(&self, layer: usize) -> usize {
        let (i, o) = (self.layer_dims[layer], self.layer_dims[layer + 1]);
        o * i + if self.bias { o } else { 0 }
    }

    /// `d_c`.
    pub fn client_dim(&self) -> usize {
        (0..self.cut_index).map(|l| self.layer_param_count(l)).sum()
    }

    /// `d_s`.
    pub fn server_dim(&self) -> usize {
        (self.cut_index..self.num_layers())
            .map(|l| self.layer_param_count(l))
            .sum()
    }

    pub fn total_dim(&self) -> usize {
        self.client_dim() + self.server_dim()
    }

    fn activated(&self, layer: usize) -> bool {
        layer + 1 < self.num_layers()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    /// Regression targets, `B x n_out`.
    Values(Matrix),
    /// Class indices, length `B`.
    Classes(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Values(m) => m.rows(),
            Targets::Classes(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Values(m) => Targets::Values(m.select_rows(idx)),
            Targets::Classes(c) => Targets::Classes(idx.iter().map(|&i| c[i]).collect()),
        }
    }

    /// Uplink payload bytes for these labels: 4 per class index, 8 per float.
    pub fn payload_bytes(&self) -> u64 {
        match self {
            Targets::Values(m) => (m.rows() * m.cols() * 8) as u64,
            Targets::Classes(c) => (c.len() * 4) as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub inputs: Matrix,
    pub targets: Targets,
}

impl Batch {
    pub fn new(inputs: Matrix, targets: Targets) -> Result<Self> {
        if inputs.rows() == 0 {
            return Err(Error::InvalidConfig("batch must hold at least one sample".into()));
        }
        if targets.len() != inputs.rows() {
            return Err(Error::DimensionMismatch {
                context: "batch targets",
                expected: inputs.rows(),
                actual: targets.len(),
            });
        }
        Ok(Batch { inputs, targets })
    }

    pub fn size(&self) -> usize {
        self.inputs.rows()
    }
}

/// Result of the server's forward and backward pass on one activation.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerPass {
    pub loss: f64,
    /// Gradient of the batch-mean loss with respect to `theta_s`.
    pub grad: Vector,
    /// Gradient of the batch-mean loss with respect to the cut activation.
    pub lambda: Matrix,
}

struct LayerTrace {
    input: Matrix,
    pre: Matrix,
}

fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

fn layer_forward(
    cfg: &SplitModelConfig,
    layer: usize,
    params: &[f64],
    input: &Matrix,
) -> (Matrix, Matrix) {
    let (n_in, n_out) = (cfg.layer_dims[layer], cfg.layer_dims[layer + 1]);
    let (w, b) = params.split_at(n_out * n_in);
    let rows = input.rows();
    let mut pre = Matrix::zeros(rows, n_out);
    for r in 0..rows {
        let x = input.row(r);
        let out = pre.row_mut(r);
        for (o, slot) in out.iter_mut().enumerate() {
            let wr = &w[o * n_in..(o + 1) * n_in];
            let mut acc = wr.iter().zip(x).fold(0.0, |acc, (wi, xi)| acc + wi * xi);
            if cfg.bias {
                acc += b[o];
            }
            *slot = acc;
        }
    }
    let post = if cfg.activated(layer) {
        let mut post = pre.clone();
        for v in post.data_mut() {
            *v = cfg.activation.apply(*v);
        }
        post
    } else {
        pre.clone()
    };
    (pre, post)
}

/// Runs layers `[first, last)` with `params` holding exactly those layers.
fn forward_range(
    cfg: &SplitModelConfig,
    params: &[f64],
    first: usize,
    last: usize,
    input: &Matrix,
    side: &str,
    mut traces: Option<&mut Vec<LayerTrace>>,
) -> Result<Matrix> {
    check_len("layer input width", cfg.layer_dims[first], input.cols())?;
    let mut offset = 0;
    let mut current = input.clone();
    for layer in first..last {
        let n = cfg.layer_param_count(layer);
        let (pre, post) = layer_forward(cfg, layer, &params[offset..offset + n], &current);
        offset += n;
        if !post.is_finite() {
            return Err(Error::NonFinite {
                layer: format!("{side} layer {layer}"),
            });
        }
        if let Some(t) = traces.as_deref_mut() {
            t.push(LayerTrace {
                input: current,
                pre,
            });
        }
        current = post;
    }
    Ok(current)
}

/// Backpropagates `d_out` through layers `[first, last)`; returns the
/// parameter gradient (same layout as `params`) and the input gradient.
fn backward_range(
    cfg: &SplitModelConfig,
    params: &[f64],
    first: usize,
    last: usize,
    traces: &[LayerTrace],
    d_out: Matrix,
    need_input_grad: bool,
) -> (Vec<f64>, Matrix) {
    let mut grad = vec![0.0; params.len()];
    let mut offsets = Vec::with_capacity(last - first);
    let mut offset = 0;
    for layer in first..last {
        offsets.push(offset);
        offset += cfg.layer_param_count(layer);
    }
    let mut delta = d_out;
    for layer in (first..last).rev() {
        let k = layer - first;
        let trace = &traces[k];
        let (n_in, n_out) = (cfg.layer_dims[layer], cfg.layer_dims[layer + 1]);
        if cfg.activated(layer) {
            for (d, p) in delta.data_mut().iter_mut().zip(trace.pre.data()) {
                *d *= cfg.activation.derivative(*p);
            }
        }
        let base = offsets[k];
        let rows = delta.rows();
        {
            let gw = &mut grad[base..base + n_out * n_in];
            for o in 0..n_out {
                for i in 0..n_in {
                    let mut acc = 0.0;
                    for r in 0..rows {
                        acc += delta.get(r, o) * trace.input.get(r, i);
                    }
                    gw[o * n_in + i] = acc;
                }
            }
        }
        if cfg.bias {
            let gb = &mut grad[base + n_out * n_in..base + n_out * n_in + n_out];
            for (o, slot) in gb.iter_mut().enumerate() {
                let mut acc = 0.0;
                for r in 0..rows {
                    acc += delta.get(r, o);
                }
                *slot = acc;
            }
        }
        if layer == first && !need_input_grad {
            break;
        }
        let w = &params[base..base + n_out * n_in];
        let mut d_in = Matrix::zeros(rows, n_in);
        for r in 0..rows {
            let dr = delta.row(r).to_vec();
            let out = d_in.row_mut(r);
            for (i, slot) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (o, d) in dr.iter().enumerate() {
                    acc += d * w[o * n_in + i];
                }
                *slot = acc;
            }
        }
        delta = d_in;
    }
    (grad, delta)
}

/// Batch-mean loss and its gradient with respect to the network output.
fn loss_and_grad(cfg: &SplitModelConfig, out: &Matrix, targets: &Targets) -> Result<(f64, Matrix)> {
    let rows = out.rows();
    check_len("targets", rows, targets.len())?;
    let b = rows as f64;
    let mut d = Matrix::zeros(rows, out.cols());
    let mut total = 0.0;
    match (cfg.loss, targets) {
        (LossKind::SquaredError, Targets::Values(y)) => {
            check_len("regression target width", out.cols(), y.cols())?;
            for r in 0..rows {
                let (yh, yr) = (out.row(r), y.row(r));
                let dr = d.row_mut(r);
                for k in 0..yh.len() {
                    let e = yh[k] - yr[k];
                    total += e * e;
                    dr[k] = 2.0 * e / b;
                }
            }
        }
        (LossKind::SoftmaxCrossEntropy, Targets::Classes(c)) => {
            for (r, &label) in c.iter().enumerate() {
                if label >= out.cols() {
                    return Err(Error::InvalidConfig(format!(
                        "class label {label} out of range for {} outputs",
                        out.cols()
                    )));
                }
                let logits = out.row(r);
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum = logits.iter().fold(0.0, |acc, l| acc + (l - max).exp());
                let lse = max + sum.ln();
                total += lse - logits[label];
                let dr = d.row_mut(r);
                for (k, slot) in dr.iter_mut().enumerate() {
                    let p = (logits[k] - lse).exp();
                    let onehot = if k == label { 1.0 } else { 0.0 };
                    *slot = (p - onehot) / b;
                }
            }
        }
        _ => {
            return Err(Error::InvalidConfig(
                "target kind does not match the configured loss".into(),
            ))
        }
    }
    let loss = total / b;
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            layer: "loss".into(),
        });
    }
    Ok((loss, d))
}

/// Cut activation `z = f_c(x; theta_c)`.
pub fn client_forward(theta_c: &Vector, batch: &Batch, cfg: &SplitModelConfig) -> Result<Matrix> {
    client_forward_inputs(theta_c, &batch.inputs, cfg)
}

pub fn client_forward_inputs(
    theta_c: &Vector,
    inputs: &Matrix,
    cfg: &SplitModelConfig,
) -> Result<Matrix> {
    check_len("theta_c", cfg.client_dim(), theta_c.dim())?;
    forward_range(cfg, theta_c.as_slice(), 0, cfg.cut_index, inputs, "client", None)
}

/// Server-side output (logits or predictions) for a cut activation.
pub fn server_forward(theta_s: &Vector, z: &Matrix, cfg: &SplitModelConfig) -> Result<Matrix> {
    check_len("theta_s", cfg.server_dim(), theta_s.dim())?;
    check_len("activation width", cfg.cut_width(), z.cols())?;
    if !z.is_finite() {
        return Err(Error::NonFinite {
            layer: "cut activation".into(),
        });
    }
    forward_range(
        cfg,
        theta_s.as_slice(),
        cfg.cut_index,
        cfg.num_layers(),
        z,
        "server",
        None,
    )
}

/// Server loss without gradients.
pub fn server_loss(
    theta_s: &Vector,
    z: &Matrix,
    targets: &Targets,
    cfg: &SplitModelConfig,
) -> Result<f64> {
    let out = server_forward(theta_s, z, cfg)?;
    Ok(loss_and_grad(cfg, &out, targets)?.0)
}

/// One server backward pass yields both `g_s` and the activation feedback.
pub fn server_forward_backward(
    theta_s: &Vector,
    z: &Matrix,
    targets: &Targets,
    cfg: &SplitModelConfig,
) -> Result<ServerPass> {
    check_len("theta_s", cfg.server_dim(), theta_s.dim())?;
    check_len("activation width", cfg.cut_width(), z.cols())?;
    if !z.is_finite() {
        return Err(Error::NonFinite {
            layer: "cut activation".into(),
        });
    }
    let mut traces = Vec::new();
    let out = forward_range(
        cfg,
        theta_s.as_slice(),
        cfg.cut_index,
        cfg.num_layers(),
        z,
        "server",
        Some(&mut traces),
    )?;
    let (loss, d_out) = loss_and_grad(cfg, &out, targets)?;
    let (grad, lambda) = backward_range(
        cfg,
        theta_s.as_slice(),
        cfg.cut_index,
        cfg.num_layers(),
        &traces,
        d_out,
        true,
    );
    Ok(ServerPass {
        loss,
        grad: Vector::new(grad),
        lambda,
    })
}

/// Client backpropagation of the activation feedback: `J^T lambda`.
pub fn client_backward(
    theta_c: &Vector,
    batch: &Batch,
    lambda: &Matrix,
    cfg: &SplitModelConfig,
) -> Result<Vector> {
    check_len("theta_c", cfg.client_dim(), theta_c.dim())?;
    let mut traces = Vec::new();
    let z = forward_range(
        cfg,
        theta_c.as_slice(),
        0,
        cfg.cut_index,
        &batch.inputs,
        "client",
        Some(&mut traces),
    )?;
    check_len("lambda rows", z.rows(), lambda.rows())?;
    check_len("lambda cols", z.cols(), lambda.cols())?;
    let (grad, _) = backward_range(
        cfg,
        theta_c.as_slice(),
        0,
        cfg.cut_index,
        &traces,
        lambda.clone(),
        false,
    );
    Ok(Vector::new(grad))
}

/// Client Jacobian `dz/dtheta_c`, one row per flattened activation entry
/// (row-major over `B x D`).
pub fn client_jacobian(theta_c: &Vector, batch: &Batch, cfg: &SplitModelConfig) -> Result<Matrix> {
    let z = client_forward(theta_c, batch, cfg)?;
    let (rows, cols) = (z.rows(), z.cols());
    let d_c = cfg.client_dim();
    let mut jac = Matrix::zeros(rows * cols, d_c);
    let mut unit = Matrix::zeros(rows, cols);
    for k in 0..rows * cols {
        unit.data_mut()[k] = 1.0;
        let g = client_backward(theta_c, batch, &unit, cfg)?;
        jac.row_mut(k).copy_from_slice(g.as_slice());
        unit.data_mut()[k] = 0.0;
    }
    Ok(jac)
}

/// Loss of the composed model at `theta = [theta_c; theta_s]`.
pub fn full_loss(theta: &Vector, batch: &Batch, cfg: &SplitModelConfig) -> Result<f64> {
    check_len("theta", cfg.total_dim(), theta.dim())?;
    let (theta_c, theta_s) = theta.split_at(cfg.client_dim());
    let z = client_forward(&theta_c, batch, cfg)?;
    server_loss(&theta_s, &z, &batch.targets, cfg)
}

/// Full backpropagation: `(g_c, g_s)`.
pub fn full_gradient(theta: &Vector, batch: &Batch, cfg: &SplitModelConfig) -> Result<(Vector, Vector)> {
    check_len("theta", cfg.total_dim(), theta.dim())?;
    let (theta_c, theta_s) = theta.split_at(cfg.client_dim());
    let z = client_forward(&theta_c, batch, cfg)?;
    let pass = server_forward_backward(&theta_s, &z, &batch.targets, cfg)?;
    let g_c = client_backward(&theta_c, batch, &pass.lambda, cfg)?;
    Ok((g_c, pass.grad))
}

/// Exact client gradient for diagnostics; the HO-SFL client never calls this.
pub fn analytic_client_gradient(theta: &Vector, batch: &Batch, cfg: &SplitModelConfig) -> Result<Vector> {
    Ok(full_gradient(theta, batch, cfg)?.0)
}

/// Batch-mean loss and, for classification, accuracy.
pub fn evaluate(theta: &Vector, batch: &Batch, cfg: &SplitModelConfig) -> Result<(f64, Option<f64>)> {
    check_len("theta", cfg.total_dim(), theta.dim())?;
    let (theta_c, theta_s) = theta.split_at(cfg.client_dim());
    let z = client_forward(&theta_c, batch, cfg)?;
    let out = server_forward(&theta_s, &z, cfg)?;
    let (loss, _) = loss_and_grad(cfg, &out, &batch.targets)?;
    let acc = match &batch.targets {
        Targets::Classes(c) => {
            let correct = c
                .iter()
                .enumerate()
                .filter(|(r, &label)| {
                    let row = out.row(*r);
                    let mut best = 0;
                    for k in 1..row.len() {
                        if row[k] > row[best] {
                            best = k;
                        }
                    }
                    best == label
                })
                .count();
            Some(correct as f64 / c.len() as f64)
        }
        Targets::Values(_) => None,
    };
    Ok((loss, acc))
}

/// Glorot-uniform weights, zero biases, drawn from a counter stream.
pub fn init_params(cfg: &SplitModelConfig, seed: u64) -> Vector {
    let stream = CounterStream::new(seed);
    let mut data = Vec::with_capacity(cfg.total_dim());
    let mut counter = 0u64;
    for layer in 0..cfg.num_layers() {
        let (n_in, n_out) = (cfg.layer_dims[layer], cfg.layer_dims[layer + 1]);
        let a = (6.0 / (n_in + n_out) as f64).sqrt();
        for _ in 0..n_in * n_out {
            data.push((2.0 * stream.unit(counter) - 1.0) * a);
            counter += 1;
        }
        if cfg.bias {
            data.extend(std::iter::repeat(0.0).take(n_out));
        }
    }
    Vector::new(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_by_one(cut: usize, layers: usize, act: ActivationKind) -> SplitModelConfig {
        SplitModelConfig::new(vec![1; layers + 1], act, cut, LossKind::SquaredError, false).unwrap()
    }

    fn scalar_batch(x: f64, y: f64) -> Batch {
        Batch::new(
            Matrix::new(1, 1, vec![x]).unwrap(),
            Targets::Values(Matrix::new(1, 1, vec![y]).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn client_forward_hand_arithmetic() {
        let cfg = one_by_one(1, 2, ActivationKind::Identity);
        let z = client_forward(&Vector::new(vec![2.0]), &scalar_batch(3.0, 0.0), &cfg).unwrap();
        assert_eq!(z.data(), &[6.0]);
    }

    #[test]
    fn zero_weights_give_zero_activation() {
        let cfg = SplitModelConfig::new(
            vec![3, 4, 2, 1],
            ActivationKind::Tanh,
            2,
            LossKind::SquaredError,
            false,
        )
        .unwrap();
        let batch = Batch::new(
            Matrix::from_rows(&[vec![1.0, -2.0, 0.5], vec![0.3, 0.1, 9.0]]).unwrap(),
            Targets::Values(Matrix::zeros(2, 1)),
        )
        .unwrap();
        let z = client_forward(&Vector::zeros(cfg.client_dim()), &batch, &cfg).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn server_pass_hand_differentiation() {
        let cfg = one_by_one(1, 2, ActivationKind::Identity);
        let z = Matrix::new(1, 1, vec![2.0]).unwrap();
        let y = Targets::Values(Matrix::new(1, 1, vec![1.0]).unwrap());
        let pass = server_forward_backward(&Vector::new(vec![1.0]), &z, &y, &cfg).unwrap();
        assert_eq!(pass.loss, 1.0);
        assert_eq!(pass.lambda.data(), &[2.0]);
        assert_eq!(pass.grad.as_slice(), &[4.0]);
    }

    #[test]
    fn perfect_fit_is_stationary() {
        let cfg = one_by_one(1, 2, ActivationKind::Identity);
        let z = Matrix::new(1, 1, vec![0.7]).unwrap();
        let y = Targets::Values(Matrix::new(1, 1, vec![0.7]).unwrap());
        let pass = server_forward_backward(&Vector::new(vec![1.0]), &z, &y, &cfg).unwrap();
        assert_eq!(pass.loss, 0.0);
        assert_eq!(pass.lambda.data(), &[0.0]);
        assert_eq!(pass.grad.as_slice(), &[0.0]);
        let theta = Vector::new(vec![1.0, 1.0]);
        assert_eq!(full_loss(&theta, &scalar_batch(0.7, 0.7), &cfg).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let cfg = one_by_one(1, 2, ActivationKind::Identity);
        let r = client_forward(&Vector::zeros(3), &scalar_batch(1.0, 1.0), &cfg);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn non_finite_names_the_layer() {
        let cfg = one_by_one(1, 3, ActivationKind::Identity);
        let z = Matrix::new(1, 1, vec![1e300]).unwrap();
        let y = Targets::Values(Matrix::new(1, 1, vec![0.0]).unwrap());
        let err = server_forward_backward(&Vector::new(vec![1e300, 1.0]), &z, &y, &cfg).unwrap_err();
        assert_eq!(
            err,
            Error::NonFinite {
                layer: "server layer 1".into()
            }
        );
    }

    #[test]
    fn stationary_quadratic_has_zero_client_gradient() {
        // loss = (w_c * x - y)^2 with w_s = 1 and w_c * x = y.
        let cfg = one_by_one(1, 2, ActivationKind::Identity);
        let g = analytic_client_gradient(&Vector::new(vec![0.5, 1.0]), &scalar_batch(2.0, 1.0), &cfg)
            .unwrap();
        assert_eq!(g.as_slice(), &[0.0]);
    }

    #[test]
    fn invalid_cut_rejected() {
        let r = SplitModelConfig::new(vec![2, 3, 1], ActivationKind::Tanh, 2, LossKind::SquaredError, true);
        assert!(r.is_err());
        let r = SplitModelConfig::new(vec![2, 3, 1], ActivationKind::Tanh, 0, LossKind::SquaredError, true);
        assert!(r.is_err());
    }

    #[test]
    fn dims_partition_parameters() {
        let cfg = SplitModelConfig::new(
            vec![8, 5, 2],
            ActivationKind::Tanh,
            1,
            LossKind::SoftmaxCrossEntropy,
            true,
        )
        .unwrap();
        assert_eq!(cfg.client_dim(), 45);
        assert_eq!(cfg.server_dim(), 12);
        assert_eq!(init_params(&cfg, 3).dim(), 57);
    }

    #[test]
    fn softmax_accuracy() {
        let cfg = SplitModelConfig::new(
            vec![1, 1, 2],
            ActivationKind::Identity,
            1,
            LossKind::SoftmaxCrossEntropy,
            false,
        )
        .unwrap();
        // z = x, logits = [z, -z].
        let theta = Vector::new(vec![1.0, 1.0, -1.0]);
        let batch = Batch::new(
            Matrix::new(2, 1, vec![1.0, -1.0]).unwrap(),
            Targets::Classes(vec![0, 1]),
        )
        .unwrap();
        let (loss, acc) = evaluate(&theta, &batch, &cfg).unwrap();
        assert_eq!(acc, Some(1.0));
        let expected = (1.0 + (-2.0f64).exp()).ln();
        assert!((loss - expected).abs() < 1e-15);
    }
}
