//! Minimal classical neural-network stack: row-major tensors, a handful of
//! layer kinds (3x3 valid convolution, 2x2 max-pool, ReLU, linear, sigmoid,
//! tanh), reverse-mode gradients, classification and GAN losses, and SGD/Adam
//! optimizers. Everything is f64 and deterministic.

use std::path::Path;

use rand::Rng;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::rng_from_seed;

/// Dense real tensor with row-major storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {numel} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Self { shape, data: vec![0.0; numel] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    fn check_finite(&self, context: &str) -> Result<()> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite value at {context}")));
        }
        Ok(())
    }
}

/// Layer descriptions; weight shapes are implied by the variant fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    /// Valid-padding stride-1 convolution with a 3x3 kernel.
    Conv3x3 { in_channels: usize, out_channels: usize },
    /// 2x2 window, stride 2; trailing odd rows/columns are dropped.
    MaxPool2x2,
    ReLU,
    /// Flattens its input, so any shape with `in_features` values is accepted.
    Linear { in_features: usize, out_features: usize },
    Sigmoid,
    Tanh,
}

impl LayerSpec {
    /// Freshly initialized weights: Kaiming-uniform kernels/matrices
    /// (bound sqrt(6 / fan_in)), zero biases, nothing for activations.
    fn init_weights<R: Rng>(&self, rng: &mut R) -> Vec<Tensor> {
        match *self {
            LayerSpec::Conv3x3 { in_channels, out_channels } => {
                let bound = (6.0 / (in_channels * 9) as f64).sqrt();
                let kernel = (0..out_channels * in_channels * 9)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect();
                vec![
                    Tensor::new(vec![out_channels, in_channels, 3, 3], kernel).unwrap(),
                    Tensor::zeros(vec![out_channels]),
                ]
            }
            LayerSpec::Linear { in_features, out_features } => {
                let bound = (6.0 / in_features as f64).sqrt();
                let w = (0..out_features * in_features)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect();
                vec![
                    Tensor::new(vec![out_features, in_features], w).unwrap(),
                    Tensor::zeros(vec![out_features]),
                ]
            }
            _ => Vec::new(),
        }
    }
}

/// Activations retained by [`Network::forward`] for the matching backward
/// pass: the input seen by each layer, plus the final output shape.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Tensor>,
    output_shape: Vec<usize>,
}

/// An ordered stack of layers with their weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<LayerSpec>,
    weights: Vec<Vec<Tensor>>,
}

impl Network {
    pub fn new(layers: Vec<LayerSpec>, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let weights = layers.iter().map(|l| l.init_weights(&mut rng)).collect();
        Self { layers, weights }
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn weights(&self) -> &[Vec<Tensor>] {
        &self.weights
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().flatten().map(Tensor::numel).sum()
    }

    /// All trainable values as mutable flat slices, in layer order
    /// (kernel/matrix before bias). Pairs with [`flat_grad_slices`].
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.weights
            .iter_mut()
            .flatten()
            .map(|t| t.data_mut())
            .collect()
    }

    /// Zero gradient tensors mirroring the weight structure.
    pub fn zero_grads(&self) -> Vec<Vec<Tensor>> {
        self.weights
            .iter()
            .map(|ws| ws.iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect())
            .collect()
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, ForwardCache)> {
        input.check_finite("network input")?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let y = layer_forward(layer, &self.weights[i], &x)
                .map_err(|e| Error::Shape(format!("layer {i}: {e}")))?;
            y.check_finite(&format!("layer {i} output"))?;
            inputs.push(std::mem::replace(&mut x, y));
        }
        let cache = ForwardCache { inputs, output_shape: x.shape().to_vec() };
        Ok((x, cache))
    }

    /// Gradients of a scalar loss with respect to the network input and every
    /// weight, given the loss gradient at the output.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &Tensor,
    ) -> Result<(Tensor, Vec<Vec<Tensor>>)> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::Consistency(format!(
                "cache covers {} layers, network has {}",
                cache.inputs.len(),
                self.layers.len()
            )));
        }
        if upstream.shape() != cache.output_shape {
            return Err(Error::Shape(format!(
                "upstream shape {:?} vs forward output {:?}",
                upstream.shape(),
                cache.output_shape
            )));
        }
        let mut grads = self.zero_grads();
        let mut g = upstream.clone();
        for i in (0..self.layers.len()).rev() {
            g = layer_backward(&self.layers[i], &self.weights[i], &cache.inputs[i], &g, &mut grads[i])?;
        }
        Ok((g, grads))
    }
}

/// Flat views of a gradient set, in the same order as
/// [`Network::param_slices_mut`].
pub fn flat_grad_slices(grads: &[Vec<Tensor>]) -> Vec<&[f64]> {
    grads.iter().flatten().map(Tensor::data).collect()
}

/// acc += scale * delta, element by element across the whole gradient set.
pub fn accumulate_grads(acc: &mut [Vec<Tensor>], delta: &[Vec<Tensor>], scale: f64) {
    for (a_layer, d_layer) in acc.iter_mut().zip(delta) {
        for (a, d) in a_layer.iter_mut().zip(d_layer) {
            for (av, dv) in a.data_mut().iter_mut().zip(d.data()) {
                *av += scale * dv;
            }
        }
    }
}

fn idx3(c: usize, y: usize, x: usize, h: usize, w: usize) -> usize {
    (c * h + y) * w + x
}

fn chw(t: &Tensor) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [c, h, w] => Ok((c, h, w)),
        ref s => Err(Error::Shape(format!("expected [channels, h, w], got {s:?}"))),
    }
}

fn layer_forward(layer: &LayerSpec, weights: &[Tensor], input: &Tensor) -> Result<Tensor> {
    match *layer {
        LayerSpec::Conv3x3 { in_channels, out_channels } => {
            let (c, h, w) = chw(input)?;
            if c != in_channels || h < 3 || w < 3 {
                return Err(Error::Shape(format!(
                    "conv expects [{in_channels}, >=3, >=3], got {:?}",
                    input.shape()
                )));
            }
            let (ho, wo) = (h - 2, w - 2);
            let (kernel, bias) = (&weights[0], &weights[1]);
            let mut out = Tensor::zeros(vec![out_channels, ho, wo]);
            for o in 0..out_channels {
                for y in 0..ho {
                    for x in 0..wo {
                        let mut acc = bias.data()[o];
                        for i in 0..in_channels {
                            for u in 0..3 {
                                for v in 0..3 {
                                    acc += kernel.data()[((o * in_channels + i) * 3 + u) * 3 + v]
                                        * input.data()[idx3(i, y + u, x + v, h, w)];
                                }
                            }
                        }
                        out.data_mut()[idx3(o, y, x, ho, wo)] = acc;
                    }
                }
            }
            Ok(out)
        }
        LayerSpec::MaxPool2x2 => {
            let (c, h, w) = chw(input)?;
            let (ho, wo) = (h / 2, w / 2);
            if ho == 0 || wo == 0 {
                return Err(Error::Shape(format!("pool needs >=2x2 input, got {h}x{w}")));
            }
            let mut out = Tensor::zeros(vec![c, ho, wo]);
            for ch in 0..c {
                for y in 0..ho {
                    for x in 0..wo {
                        let mut best = f64::NEG_INFINITY;
                        for dy in 0..2 {
                            for dx in 0..2 {
                                best = best.max(input.data()[idx3(ch, 2 * y + dy, 2 * x + dx, h, w)]);
                            }
                        }
                        out.data_mut()[idx3(ch, y, x, ho, wo)] = best;
                    }
                }
            }
            Ok(out)
        }
        LayerSpec::ReLU => map_elementwise(input, |v| v.max(0.0)),
        LayerSpec::Sigmoid => map_elementwise(input, sigmoid),
        LayerSpec::Tanh => map_elementwise(input, f64::tanh),
        LayerSpec::Linear { in_features, out_features } => {
            if input.numel() != in_features {
                return Err(Error::Shape(format!(
                    "linear expects {in_features} values, got {} (shape {:?})",
                    input.numel(),
                    input.shape()
                )));
            }
            let (w, b) = (&weights[0], &weights[1]);
            let mut out = Tensor::zeros(vec![out_features]);
            for o in 0..out_features {
                let row = &w.data()[o * in_features..(o + 1) * in_features];
                out.data_mut()[o] = b.data()[o]
                    + row.iter().zip(input.data()).map(|(wv, xv)| wv * xv).sum::<f64>();
            }
            Ok(out)
        }
    }
}

fn map_elementwise(input: &Tensor, f: impl Fn(f64) -> f64) -> Result<Tensor> {
    Tensor::new(input.shape().to_vec(), input.data().iter().map(|&v| f(v)).collect())
}

fn layer_backward(
    layer: &LayerSpec,
    weights: &[Tensor],
    input: &Tensor,
    upstream: &Tensor,
    grads: &mut [Tensor],
) -> Result<Tensor> {
    match *layer {
        LayerSpec::Conv3x3 { in_channels, out_channels } => {
            let (_, h, w) = chw(input)?;
            let (ho, wo) = (h - 2, w - 2);
            let kernel = &weights[0];
            let mut din = Tensor::zeros(input.shape().to_vec());
            for o in 0..out_channels {
                for y in 0..ho {
                    for x in 0..wo {
                        let up = upstream.data()[idx3(o, y, x, ho, wo)];
                        grads[1].data_mut()[o] += up;
                        for i in 0..in_channels {
                            for u in 0..3 {
                                for v in 0..3 {
                                    let k_idx = ((o * in_channels + i) * 3 + u) * 3 + v;
                                    grads[0].data_mut()[k_idx] +=
                                        up * input.data()[idx3(i, y + u, x + v, h, w)];
                                    din.data_mut()[idx3(i, y + u, x + v, h, w)] +=
                                        up * kernel.data()[k_idx];
                                }
                            }
                        }
                    }
                }
            }
            Ok(din)
        }
        LayerSpec::MaxPool2x2 => {
            let (c, h, w) = chw(input)?;
            let (ho, wo) = (h / 2, w / 2);
            let mut din = Tensor::zeros(input.shape().to_vec());
            for ch in 0..c {
                for y in 0..ho {
                    for x in 0..wo {
                        // First maximum in scan order wins, matching forward.
                        let (mut best_idx, mut best) = (0usize, f64::NEG_INFINITY);
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let idx = idx3(ch, 2 * y + dy, 2 * x + dx, h, w);
                                if input.data()[idx] > best {
                                    best = input.data()[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        din.data_mut()[best_idx] += upstream.data()[idx3(ch, y, x, ho, wo)];
                    }
                }
            }
            Ok(din)
        }
        LayerSpec::ReLU => Tensor::new(
            input.shape().to_vec(),
            input
                .data()
                .iter()
                .zip(upstream.data())
                .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                .collect(),
        ),
        LayerSpec::Sigmoid => Tensor::new(
            input.shape().to_vec(),
            input
                .data()
                .iter()
                .zip(upstream.data())
                .map(|(&x, &g)| {
                    let s = sigmoid(x);
                    g * s * (1.0 - s)
                })
                .collect(),
        ),
        LayerSpec::Tanh => Tensor::new(
            input.shape().to_vec(),
            input
                .data()
                .iter()
                .zip(upstream.data())
                .map(|(&x, &g)| g * (1.0 - x.tanh().powi(2)))
                .collect(),
        ),
        LayerSpec::Linear { in_features, out_features } => {
            let w = &weights[0];
            let mut din = vec![0.0; in_features];
            for o in 0..out_features {
                let g = upstream.data()[o];
                grads[1].data_mut()[o] += g;
                for i in 0..in_features {
                    grads[0].data_mut()[o * in_features + i] += g * input.data()[i];
                    din[i] += g * w.data()[o * in_features + i];
                }
            }
            Tensor::new(input.shape().to_vec(), din)
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Cross-entropy over softmax probabilities for one labeled sample.
/// Returns the loss and its gradient with respect to the logits.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::Index(format!(
            "label {label} out of range for {} logits",
            logits.len()
        )));
    }
    let probs = softmax(logits);
    let loss = -probs[label].max(PROB_CLAMP).ln();
    let grad = probs
        .iter()
        .enumerate()
        .map(|(i, &p)| p - if i == label { 1.0 } else { 0.0 })
        .collect();
    Ok((loss, grad))
}

/// Probabilities are clamped to [PROB_CLAMP, 1 - PROB_CLAMP] before any log.
pub const PROB_CLAMP: f64 = 1e-7;

/// Binary-cross-entropy pieces of one adversarial step.
#[derive(Debug, Clone)]
pub struct GanBce {
    /// -mean(log d_real) - mean(log(1 - d_fake))
    pub d_loss: f64,
    /// Non-saturating generator objective: -mean(log d_fake).
    pub g_loss: f64,
    /// Min-max game value: mean(log d_real) + mean(log(1 - d_fake)).
    pub value: f64,
    /// d(d_loss)/d(d_real[k])
    pub d_real_grad: Vec<f64>,
    /// d(d_loss)/d(d_fake[k])
    pub d_fake_grad_d: Vec<f64>,
    /// d(g_loss)/d(d_fake[k])
    pub d_fake_grad_g: Vec<f64>,
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Discriminator/generator losses and their gradients with respect to the
/// discriminator's probability outputs on real and generated batches.
pub fn gan_bce_losses(d_real: &[f64], d_fake: &[f64]) -> GanBce {
    let nr = d_real.len().max(1) as f64;
    let nf = d_fake.len().max(1) as f64;
    let mut d_loss = 0.0;
    let mut g_loss = 0.0;
    let mut value = 0.0;
    let mut d_real_grad = Vec::with_capacity(d_real.len());
    let mut d_fake_grad_d = Vec::with_capacity(d_fake.len());
    let mut d_fake_grad_g = Vec::with_capacity(d_fake.len());
    for &p in d_real {
        let p = clamp_prob(p);
        d_loss -= p.ln() / nr;
        value += p.ln() / nr;
        d_real_grad.push(-1.0 / (p * nr));
    }
    for &p in d_fake {
        let p = clamp_prob(p);
        d_loss -= (1.0 - p).ln() / nf;
        value += (1.0 - p).ln() / nf;
        g_loss -= p.ln() / nf;
        d_fake_grad_d.push(1.0 / ((1.0 - p) * nf));
        d_fake_grad_g.push(-1.0 / (p * nf));
    }
    GanBce { d_loss, g_loss, value, d_real_grad, d_fake_grad_d, d_fake_grad_g }
}

/// Gradient-descent state over an ordered list of parameter slices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OptimKind {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimState {
    kind: OptimKind,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimState {
    pub fn sgd(lr: f64) -> Self {
        Self { kind: OptimKind::Sgd { lr }, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn adam(lr: f64) -> Self {
        Self {
            kind: OptimKind::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 },
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over all parameter slices. Slice count and lengths must
    /// stay identical across calls; Adam moments are allocated on first use.
    pub fn apply(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len()
            || params.iter().zip(grads).any(|(p, g)| p.len() != g.len())
        {
            return Err(Error::Shape("parameter/gradient layout mismatch".into()));
        }
        self.step += 1;
        match self.kind {
            OptimKind::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pv, gv) in p.iter_mut().zip(g.iter()) {
                        *pv -= lr * gv;
                    }
                }
            }
            OptimKind::Adam { lr, beta1, beta2, eps } => {
                if self.m.is_empty() {
                    self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                    self.v = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                }
                if self.m.len() != grads.len() {
                    return Err(Error::Shape("optimizer moments do not match layout".into()));
                }
                let bc1 = 1.0 - beta1.powi(self.step as i32);
                let bc2 = 1.0 - beta2.powi(self.step as i32);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.m.iter_mut().zip(self.v.iter_mut()))
                {
                    for k in 0..g.len() {
                        m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                        v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                        p[k] -= lr * (m[k] / bc1) / ((v[k] / bc2).sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Serialize any checkpointable value as pretty JSON.
pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_layer(layer: LayerSpec) -> Network {
        Network::new(vec![layer], 1)
    }

    #[test]
    fn relu_clips_negatives() {
        let net = one_layer(LayerSpec::ReLU);
        let x = Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap();
        let (y, _) = net.forward(&x).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn maxpool_takes_window_max() {
        let net = one_layer(LayerSpec::MaxPool2x2);
        let x = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, _) = net.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[4.0]);
    }

    #[test]
    fn conv_ones_kernel_sums_windows() {
        let mut net = one_layer(LayerSpec::Conv3x3 { in_channels: 1, out_channels: 1 });
        for s in net.param_slices_mut()[0].iter_mut() {
            *s = 1.0;
        }
        let x = Tensor::new(vec![1, 4, 4], vec![1.0; 16]).unwrap();
        let (y, _) = net.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2]);
        assert!(y.data().iter().all(|&v| (v - 9.0).abs() < 1e-15));
    }

    #[test]
    fn linear_backward_closed_form() {
        let mut net = one_layer(LayerSpec::Linear { in_features: 2, out_features: 2 });
        // W = [[1, 2], [3, 4]], b = 0
        net.param_slices_mut()[0].copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        let x = Tensor::new(vec![2], vec![5.0, 6.0]).unwrap();
        let (_, cache) = net.forward(&x).unwrap();
        let g = Tensor::new(vec![2], vec![1.0, -1.0]).unwrap();
        let (din, grads) = net.backward(&cache, &g).unwrap();
        // weight grad = g x^T, input grad = W^T g
        assert_eq!(grads[0][0].data(), &[5.0, 6.0, -5.0, -6.0]);
        assert_eq!(grads[0][1].data(), &[1.0, -1.0]);
        assert_eq!(din.data(), &[1.0 - 3.0, 2.0 - 4.0]);
    }

    #[test]
    fn relu_blocks_gradient_at_negative_input() {
        let net = one_layer(LayerSpec::ReLU);
        let x = Tensor::new(vec![1], vec![-1.0]).unwrap();
        let (_, cache) = net.forward(&x).unwrap();
        let (din, _) = net
            .backward(&cache, &Tensor::new(vec![1], vec![7.0]).unwrap())
            .unwrap();
        assert_eq!(din.data(), &[0.0]);
    }

    #[test]
    fn softmax_cross_entropy_uniform_case() {
        let (loss, grad) = softmax_cross_entropy(&[0.0, 0.0, 0.0], 0).unwrap();
        assert!((loss - 3.0f64.ln()).abs() < 1e-12);
        let want = [-2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        for (g, w) in grad.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_cross_entropy_saturated_and_errors() {
        let (loss, _) = softmax_cross_entropy(&[10.0, -10.0], 0).unwrap();
        assert!(loss < 1e-8);
        assert!(softmax_cross_entropy(&[0.0, 0.0], 2).is_err());
    }

    #[test]
    fn softmax_stays_on_simplex() {
        let p = softmax(&[300.0, -300.0, 1.0, 2.5]);
        assert!(p.iter().all(|&v| v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gan_losses_at_equilibrium() {
        let out = gan_bce_losses(&[0.5], &[0.5]);
        let ln2 = 2.0f64.ln();
        assert!((out.d_loss - 2.0 * ln2).abs() < 1e-12);
        assert!((out.g_loss - ln2).abs() < 1e-12);
        assert!((out.value + 2.0 * ln2).abs() < 1e-12);
        assert!((out.d_fake_grad_g[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn gan_losses_perfect_discriminator() {
        let out = gan_bce_losses(&[1.0 - 1e-7], &[1e-7]);
        assert!(out.d_loss.abs() < 1e-6);
        // Clamping keeps saturated inputs finite.
        let out = gan_bce_losses(&[0.0, 1.0], &[0.0, 1.0]);
        assert!(out.d_loss.is_finite() && out.g_loss.is_finite() && out.value.is_finite());
    }

    #[test]
    fn sgd_step_moves_against_gradient() {
        let mut opt = OptimState::sgd(0.1);
        let mut w = [1.0];
        opt.apply(&mut [&mut w], &[&[2.0]]).unwrap();
        assert!((w[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_signed_learning_rate() {
        let mut opt = OptimState::adam(0.01);
        let mut w = [0.0];
        opt.apply(&mut [&mut w], &[&[1.0]]).unwrap();
        assert!((w[0] + 0.01).abs() < 1e-9, "{}", w[0]);
    }

    #[test]
    fn zero_gradient_leaves_weights_unchanged() {
        for mut opt in [OptimState::sgd(0.1), OptimState::adam(0.01)] {
            let mut w = [1.5, -0.5];
            opt.apply(&mut [&mut w], &[&[0.0, 0.0]]).unwrap();
            assert_eq!(w, [1.5, -0.5]);
        }
    }

    #[test]
    fn kaiming_init_respects_bound_and_zero_bias() {
        let net = one_layer(LayerSpec::Linear { in_features: 24, out_features: 8 });
        let bound = (6.0 / 24.0f64).sqrt();
        assert!(net.weights()[0][0].data().iter().all(|v| v.abs() < bound));
        assert!(net.weights()[0][1].data().iter().all(|&v| v == 0.0));
        // Conv fan-in counts all kernel positions.
        let net = one_layer(LayerSpec::Conv3x3 { in_channels: 2, out_channels: 3 });
        let bound = (6.0 / 18.0f64).sqrt();
        assert!(net.weights()[0][0].data().iter().all(|v| v.abs() < bound));
    }

    #[test]
    fn network_json_round_trip_is_exact() {
        let net = Network::new(
            vec![
                LayerSpec::Conv3x3 { in_channels: 1, out_channels: 2 },
                LayerSpec::ReLU,
                LayerSpec::Linear { in_features: 8, out_features: 3 },
            ],
            42,
        );
        let dir = std::env::temp_dir().join("qaug-nn-roundtrip");
        let path = dir.join("net.json");
        save_json(&path, &net).unwrap();
        let back: Network = load_json(&path).unwrap();
        assert_eq!(net, back);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let net = one_layer(LayerSpec::ReLU);
        let x = Tensor::new(vec![1], vec![f64::NAN]).unwrap();
        assert!(net.forward(&x).is_err());
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let net = one_layer(LayerSpec::Linear { in_features: 4, out_features: 2 });
        let x = Tensor::new(vec![3], vec![0.0; 3]).unwrap();
        assert!(net.forward(&x).is_err());
        let net = one_layer(LayerSpec::Conv3x3 { in_channels: 2, out_channels: 1 });
        let x = Tensor::new(vec![1, 4, 4], vec![0.0; 16]).unwrap();
        assert!(net.forward(&x).is_err());
    }

    #[test]
    fn forward_is_deterministic() {
        let net = Network::new(
            vec![
                LayerSpec::Conv3x3 { in_channels: 1, out_channels: 2 },
                LayerSpec::MaxPool2x2,
                LayerSpec::ReLU,
                LayerSpec::Linear { in_features: 18, out_features: 4 },
                LayerSpec::Tanh,
            ],
            7,
        );
        let x = Tensor::new(vec![1, 8, 8], (0..64).map(|i| i as f64 / 64.0).collect()).unwrap();
        let (a, _) = net.forward(&x).unwrap();
        let (b, _) = net.forward(&x).unwrap();
        assert_eq!(a, b);
        let again = Network::new(net.layers().to_vec(), 7);
        assert_eq!(again, net);
    }
}
