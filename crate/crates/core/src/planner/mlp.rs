//! Fully connected ReLU networks with a linear output and hand-written
//! reverse-mode gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const V_NET_SIZES: [usize; 4] = [4, 6, 6, 1];
pub const W_NET_SIZES: [usize; 4] = [4, 6, 8, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mae,
    Mse,
}

/// Mean absolute or mean squared error.
pub fn compute_loss(preds: &[f64], targets: &[f64], kind: LossKind) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch(preds.len(), targets.len()));
    }
    if preds.is_empty() {
        return Err(Error::Empty("loss over zero samples"));
    }
    let n = preds.len() as f64;
    let sum: f64 = preds
        .iter()
        .zip(targets)
        .map(|(p, y)| match kind {
            LossKind::Mae => (y - p).abs(),
            LossKind::Mse => (y - p) * (y - p),
        })
        .sum();
    Ok(sum / n)
}

/// d(loss)/d(prediction) for a single sample. The MAE subgradient at zero
/// error is 0.
pub fn loss_derivative(pred: f64, target: f64, kind: LossKind) -> f64 {
    let diff = pred - target;
    match kind {
        LossKind::Mae => {
            if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
        LossKind::Mse => 2.0 * diff,
    }
}

/// Parameters live in one flat vector. Layer `l` maps `sizes[l]` inputs to
/// `sizes[l+1]` outputs and stores its row-major weight matrix
/// (`sizes[l+1] x sizes[l]`) followed by its bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct LayerSpan {
    inputs: usize,
    outputs: usize,
    weights: usize,
    biases: usize,
}

impl MlpNetwork {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "bad layer sizes {sizes:?}");
        let n = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Self { sizes: sizes.to_vec(), params: vec![0.0; n] }
    }

    /// Glorot-uniform weights in ±sqrt(6 / (fan_in + fan_out)), zero biases.
    pub fn initialized<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        for span in net.spans() {
            let limit = (6.0 / (span.inputs + span.outputs) as f64).sqrt();
            for w in &mut net.params[span.weights..span.biases] {
                *w = rng.gen_range(-limit..limit);
            }
        }
        net
    }

    pub fn from_parts(sizes: &[usize], weights: &[Vec<f64>], biases: &[Vec<f64>]) -> Result<Self> {
        let mut net = Self::zeros(sizes);
        let spans = net.spans();
        if weights.len() != spans.len() || biases.len() != spans.len() {
            return Err(Error::Format { what: "network", detail: "layer count mismatch".into() });
        }
        for (i, span) in spans.iter().enumerate() {
            if weights[i].len() != span.inputs * span.outputs || biases[i].len() != span.outputs {
                return Err(Error::Format { what: "network", detail: format!("layer {i} shape mismatch") });
            }
            net.params[span.weights..span.biases].copy_from_slice(&weights[i]);
            net.params[span.biases..span.biases + span.outputs].copy_from_slice(&biases[i]);
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Row-major weight matrix of layer `l`.
    pub fn weights(&self, l: usize) -> &[f64] {
        let s = self.spans()[l];
        &self.params[s.weights..s.biases]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        let s = self.spans()[l];
        &self.params[s.biases..s.biases + s.outputs]
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn spans(&self) -> Vec<LayerSpan> {
        let mut offset = 0;
        self.sizes
            .windows(2)
            .map(|w| {
                let span = LayerSpan { inputs: w[0], outputs: w[1], weights: offset, biases: offset + w[0] * w[1] };
                offset = span.biases + w[1];
                span
            })
            .collect()
    }

    /// Pre-activations of every layer.
    fn forward_trace(&self, input: &[f64]) -> Vec<Vec<f64>> {
        assert_eq!(input.len(), self.sizes[0], "input width");
        let spans = self.spans();
        let last = spans.len() - 1;
        let mut pre = Vec::with_capacity(spans.len());
        let mut act = input.to_vec();
        for (l, s) in spans.iter().enumerate() {
            let w = &self.params[s.weights..s.biases];
            let b = &self.params[s.biases..s.biases + s.outputs];
            let z: Vec<f64> = (0..s.outputs)
                .map(|o| b[o] + w[o * s.inputs..(o + 1) * s.inputs].iter().zip(&act).map(|(a, x)| a * x).sum::<f64>())
                .collect();
            act = if l == last { z.clone() } else { z.iter().map(|&v| v.max(0.0)).collect() };
            pre.push(z);
        }
        pre
    }

    /// ReLU hidden layers, linear scalar output.
    pub fn forward(&self, input: &[f64]) -> f64 {
        self.forward_trace(input).last().expect("at least one layer")[0]
    }

    /// Prediction and gradient of the per-sample loss with respect to every
    /// parameter (same layout as [`params`](Self::params)).
    pub fn gradients(&self, input: &[f64], target: f64, kind: LossKind) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let pred = self.accumulate_gradients(input, target, kind, 1.0, &mut grad);
        (pred, grad)
    }

    /// Adds `scale * d(loss)/d(params)` into `grad`; returns the prediction.
    pub fn accumulate_gradients(&self, input: &[f64], target: f64, kind: LossKind, scale: f64, grad: &mut [f64]) -> f64 {
        let spans = self.spans();
        let pre = self.forward_trace(input);
        let pred = pre.last().unwrap()[0];
        let relu = |z: &Vec<f64>| z.iter().map(|&v| v.max(0.0)).collect::<Vec<f64>>();

        let mut delta = vec![scale * loss_derivative(pred, target, kind)];
        for l in (0..spans.len()).rev() {
            let s = spans[l];
            let prev_act = if l == 0 { input.to_vec() } else { relu(&pre[l - 1]) };
            for o in 0..s.outputs {
                grad[s.biases + o] += delta[o];
                let row = s.weights + o * s.inputs;
                for i in 0..s.inputs {
                    grad[row + i] += delta[o] * prev_act[i];
                }
            }
            if l > 0 {
                let w = &self.params[s.weights..s.biases];
                delta = (0..s.inputs)
                    .map(|i| {
                        if pre[l - 1][i] > 0.0 {
                            (0..s.outputs).map(|o| w[o * s.inputs + i] * delta[o]).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
        pred
    }
}
