//! Compact 1-D convolutional classifier with exact analytic gradients.
//!
//! Activations are row-major `[time, channels]` buffers. A convolution with
//! weights laid out as `[out][kernel][in]` is a sliding dot product over the
//! contiguous input slice `x[t*C .. (t+k)*C]`, which keeps both passes simple.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d { kernel_size: usize, out_channels: usize },
    Dense { out_dim: usize },
    Relu,
    GlobalMeanPool,
}

/// Conv(9,16) ReLU Conv(9,16) ReLU Conv(9,32) ReLU Conv(9,32) ReLU Pool Dense(64) ReLU Dense(2).
pub fn default_architecture() -> Vec<LayerSpec> {
    use LayerSpec::*;
    vec![
        Conv1d { kernel_size: 9, out_channels: 16 },
        Relu,
        Conv1d { kernel_size: 9, out_channels: 16 },
        Relu,
        Conv1d { kernel_size: 9, out_channels: 32 },
        Relu,
        Conv1d { kernel_size: 9, out_channels: 32 },
        Relu,
        GlobalMeanPool,
        Dense { out_dim: 64 },
        Relu,
        Dense { out_dim: 2 },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Conv1d {
        kernel_size: usize,
        in_channels: usize,
        out_channels: usize,
        /// `[out][kernel][in]`
        weight: Vec<f64>,
        bias: Vec<f64>,
    },
    Dense {
        in_dim: usize,
        out_dim: usize,
        /// `[out][in]`
        weight: Vec<f64>,
        bias: Vec<f64>,
    },
    Relu,
    GlobalMeanPool,
}

impl Layer {
    pub fn has_weights(&self) -> bool {
        matches!(self, Layer::Conv1d { .. } | Layer::Dense { .. })
    }
}

/// Row-major activation buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Activation {
    pub len: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Activation {
    pub fn from_window(x: &Array2<f64>) -> Self {
        Self {
            len: x.nrows(),
            channels: x.ncols(),
            data: x.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralModel {
    pub input_len: usize,
    pub input_channels: usize,
    pub layers: Vec<Layer>,
    /// One flag per layer; only weight-bearing layers are ever frozen.
    pub frozen: Vec<bool>,
}

/// Gradients aligned with [`NeuralModel::params`]: weight and bias per
/// weight-bearing layer, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &NeuralModel) -> Self {
        Self {
            tensors: model.params().iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            for x in t {
                *x *= s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|x| x.is_finite())
    }
}

impl NeuralModel {
    /// Build with scaled-uniform init `U(±sqrt(6 / (fan_in + fan_out)))`.
    pub fn new(specs: &[LayerSpec], input_len: usize, input_channels: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_for(seed, &[0x1417]);
        let (mut len, mut ch) = (input_len, input_channels);
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let layer = match *spec {
                LayerSpec::Conv1d { kernel_size, out_channels } => {
                    if kernel_size == 0 || out_channels == 0 {
                        return Err(Error::InvalidModel("conv sizes must be positive".into()));
                    }
                    if len < kernel_size {
                        return Err(Error::ShapeIncompatible(format!(
                            "conv kernel {kernel_size} longer than its input ({len} steps)"
                        )));
                    }
                    let limit = (6.0 / ((ch + out_channels) * kernel_size) as f64).sqrt();
                    let weight = (0..out_channels * kernel_size * ch).map(|_| rng.gen_range(-limit..limit)).collect();
                    let layer = Layer::Conv1d {
                        kernel_size,
                        in_channels: ch,
                        out_channels,
                        weight,
                        bias: vec![0.0; out_channels],
                    };
                    len = len - kernel_size + 1;
                    ch = out_channels;
                    layer
                }
                LayerSpec::Dense { out_dim } => {
                    if len != 1 {
                        return Err(Error::InvalidModel("dense layer needs a pooled (length-1) input".into()));
                    }
                    let limit = (6.0 / (ch + out_dim) as f64).sqrt();
                    let weight = (0..out_dim * ch).map(|_| rng.gen_range(-limit..limit)).collect();
                    let layer = Layer::Dense {
                        in_dim: ch,
                        out_dim,
                        weight,
                        bias: vec![0.0; out_dim],
                    };
                    ch = out_dim;
                    layer
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::GlobalMeanPool => {
                    len = 1;
                    Layer::GlobalMeanPool
                }
            };
            layers.push(layer);
        }
        if len != 1 || ch != 2 {
            return Err(Error::InvalidModel(format!(
                "network must end in 2 logits, ends in [{len} x {ch}]"
            )));
        }
        let n = layers.len();
        Ok(Self {
            input_len,
            input_channels,
            layers,
            frozen: vec![false; n],
        })
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.layers {
            if let Layer::Conv1d { weight, bias, .. } | Layer::Dense { weight, bias, .. } = l {
                out.push(weight.as_slice());
                out.push(bias.as_slice());
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            if let Layer::Conv1d { weight, bias, .. } | Layer::Dense { weight, bias, .. } = l {
                out.push(weight);
                out.push(bias);
            }
        }
        out
    }

    /// Frozen flag per parameter tensor, aligned with [`NeuralModel::params`].
    pub fn tensor_frozen(&self) -> Vec<bool> {
        self.layers
            .iter()
            .zip(&self.frozen)
            .filter(|(l, _)| l.has_weights())
            .flat_map(|(_, &f)| [f, f])
            .collect()
    }

    pub fn n_weight_layers(&self) -> usize {
        self.layers.iter().filter(|l| l.has_weights()).count()
    }

    /// Freeze the first `prefix` weight-bearing layers and unfreeze the rest.
    pub fn freeze_prefix(&mut self, prefix: usize) -> Result<()> {
        if prefix > self.n_weight_layers() {
            return Err(Error::Config(format!(
                "cannot freeze {prefix} layers of a network with {} weight layers",
                self.n_weight_layers()
            )));
        }
        let mut seen = 0;
        for (l, f) in self.layers.iter().zip(self.frozen.iter_mut()) {
            *f = l.has_weights() && seen < prefix;
            if l.has_weights() {
                seen += 1;
            }
        }
        Ok(())
    }

    pub fn set_all_frozen(&mut self, frozen: bool) {
        for (l, f) in self.layers.iter().zip(self.frozen.iter_mut()) {
            *f = frozen && l.has_weights();
        }
    }

    /// Width of the representation fed to the final layer.
    pub fn representation_dim(&self) -> usize {
        match self.layers.last() {
            Some(Layer::Dense { in_dim, .. }) => *in_dim,
            _ => 0,
        }
    }

    /// Minimum input length accepted by the convolution stack.
    pub fn min_input_len(&self) -> usize {
        let mut need = 1;
        for l in self.layers.iter().rev() {
            match l {
                Layer::GlobalMeanPool => need = 1,
                Layer::Conv1d { kernel_size, .. } => need += kernel_size - 1,
                _ => {}
            }
        }
        need
    }

    pub fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_channels {
            return Err(Error::DimensionMismatch {
                expected: self.input_channels,
                got: x.ncols(),
            });
        }
        if x.nrows() < self.min_input_len() {
            return Err(Error::ShapeIncompatible(format!(
                "window of {} steps is shorter than the receptive field {}",
                x.nrows(),
                self.min_input_len()
            )));
        }
        Ok(())
    }

    /// All intermediate activations; `acts[0]` is the input and
    /// `acts[layers.len()]` the logits.
    pub fn forward_trace(&self, x: &Array2<f64>) -> Vec<Activation> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(Activation::from_window(x));
        for layer in &self.layers {
            let next = layer_forward(layer, acts.last().expect("input pushed"));
            acts.push(next);
        }
        acts
    }

    pub fn logits(&self, x: &Array2<f64>) -> [f64; 2] {
        let out = self.forward_trace(x).pop().expect("non-empty trace").data;
        [out[0], out[1]]
    }

    /// Input to the final layer.
    pub fn representation(&self, x: &Array2<f64>) -> Vec<f64> {
        let mut acts = self.forward_trace(x);
        acts.swap_remove(self.layers.len() - 1).data
    }

    /// Softmax probability of the FOG class.
    pub fn predict_score(&self, x: &Array2<f64>) -> Result<f64> {
        self.check_input(x)?;
        Ok(softmax2(self.logits(x))[1])
    }

    pub fn predict_scores(&self, xs: &[&Array2<f64>]) -> Result<Vec<f64>> {
        xs.par_iter().map(|x| self.predict_score(x)).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}

pub fn softmax2(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// `-log softmax(z)[y]`, computed stably.
pub fn cross_entropy(z: [f64; 2], y: u8) -> f64 {
    let m = z[0].max(z[1]);
    let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
    lse - z[y as usize]
}

fn layer_forward(layer: &Layer, x: &Activation) -> Activation {
    match layer {
        Layer::Conv1d { kernel_size, in_channels, out_channels, weight, bias } => {
            let (k, c, o) = (*kernel_size, *in_channels, *out_channels);
            let out_len = x.len + 1 - k;
            let span = k * c;
            let mut data = vec![0.0; out_len * o];
            for t in 0..out_len {
                let xs = &x.data[t * c..t * c + span];
                for oc in 0..o {
                    let w = &weight[oc * span..(oc + 1) * span];
                    data[t * o + oc] = bias[oc] + dot(w, xs);
                }
            }
            Activation { len: out_len, channels: o, data }
        }
        Layer::Dense { in_dim, out_dim, weight, bias } => {
            let data = (0..*out_dim)
                .map(|o| bias[o] + dot(&weight[o * in_dim..(o + 1) * in_dim], &x.data))
                .collect();
            Activation { len: 1, channels: *out_dim, data }
        }
        Layer::Relu => Activation {
            len: x.len,
            channels: x.channels,
            data: x.data.iter().map(|&v| v.max(0.0)).collect(),
        },
        Layer::GlobalMeanPool => {
            let mut data = vec![0.0; x.channels];
            for t in 0..x.len {
                for (d, v) in data.iter_mut().zip(&x.data[t * x.channels..(t + 1) * x.channels]) {
                    *d += v;
                }
            }
            for d in &mut data {
                *d /= x.len as f64;
            }
            Activation { len: 1, channels: x.channels, data }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Back-propagate `d_act` (gradient w.r.t. `acts[upto]`) through layers
/// `upto-1 ..= 0`, accumulating parameter gradients of unfrozen layers.
/// Returns the gradient with respect to the input `acts[0]`.
pub fn backward_from(model: &NeuralModel, acts: &[Activation], upto: usize, mut d_act: Vec<f64>, grads: &mut Gradients) -> Vec<f64> {
    // tensor index of each weight layer's weight gradient
    let mut tensor_of = vec![usize::MAX; model.layers.len()];
    let mut next = 0;
    for (i, l) in model.layers.iter().enumerate() {
        if l.has_weights() {
            tensor_of[i] = next;
            next += 2;
        }
    }
    for li in (0..upto).rev() {
        let x = &acts[li];
        let frozen = model.frozen[li];
        match &model.layers[li] {
            Layer::Conv1d { kernel_size, in_channels, out_channels, weight, .. } => {
                let (k, c, o) = (*kernel_size, *in_channels, *out_channels);
                let span = k * c;
                let out_len = x.len + 1 - k;
                let mut dx = vec![0.0; x.data.len()];
                let ti = tensor_of[li];
                let (wg, rest) = grads.tensors.split_at_mut(ti + 1);
                let dw = &mut wg[ti];
                let db = &mut rest[0];
                for t in 0..out_len {
                    let xs = &x.data[t * c..t * c + span];
                    for oc in 0..o {
                        let g = d_act[t * o + oc];
                        if g == 0.0 {
                            continue;
                        }
                        if !frozen {
                            db[oc] += g;
                            for (a, b) in dw[oc * span..(oc + 1) * span].iter_mut().zip(xs) {
                                *a += g * b;
                            }
                        }
                        for (a, b) in dx[t * c..t * c + span].iter_mut().zip(&weight[oc * span..(oc + 1) * span]) {
                            *a += g * b;
                        }
                    }
                }
                d_act = dx;
            }
            Layer::Dense { in_dim, out_dim, weight, .. } => {
                let ti = tensor_of[li];
                let mut dx = vec![0.0; *in_dim];
                let (wg, rest) = grads.tensors.split_at_mut(ti + 1);
                let dw = &mut wg[ti];
                let db = &mut rest[0];
                for o in 0..*out_dim {
                    let g = d_act[o];
                    if !frozen {
                        db[o] += g;
                        for (a, b) in dw[o * in_dim..(o + 1) * in_dim].iter_mut().zip(&x.data) {
                            *a += g * b;
                        }
                    }
                    for (a, b) in dx.iter_mut().zip(&weight[o * in_dim..(o + 1) * in_dim]) {
                        *a += g * b;
                    }
                }
                d_act = dx;
            }
            Layer::Relu => {
                for (d, &v) in d_act.iter_mut().zip(&x.data) {
                    if v <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            Layer::GlobalMeanPool => {
                let inv = 1.0 / x.len as f64;
                let mut dx = vec![0.0; x.data.len()];
                for t in 0..x.len {
                    for (cidx, d) in dx[t * x.channels..(t + 1) * x.channels].iter_mut().enumerate() {
                        *d = d_act[cidx] * inv;
                    }
                }
                d_act = dx;
            }
        }
    }
    d_act
}

/// Per-class loss weights `(no FOG, FOG)`.
pub type ClassWeights = [f64; 2];

/// Inverse class frequency, `n / (2 n_c)`.
pub fn balanced_class_weights(labels: &[u8]) -> ClassWeights {
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    let n0 = labels.len() - n1;
    let n = labels.len() as f64;
    let w = |c: usize| if c == 0 { 1.0 } else { n / (2.0 * c as f64) };
    [w(n0), w(n1)]
}

/// Class-weighted mean cross-entropy, `sum w_y CE / sum w_y`, and its exact
/// gradient with respect to every unfrozen parameter.
pub fn forward_backward(model: &NeuralModel, batch: &[&Array2<f64>], labels: &[u8], weights: ClassWeights) -> (f64, Gradients) {
    assert_eq!(batch.len(), labels.len(), "batch and labels differ in length");
    assert!(!batch.is_empty(), "empty batch");
    let total_w: f64 = labels.iter().map(|&y| weights[y as usize]).sum();
    let per_sample: Vec<(f64, Gradients)> = batch
        .par_iter()
        .zip(labels.par_iter())
        .map(|(x, &y)| {
            let acts = model.forward_trace(x);
            let z = acts[model.layers.len()].data.as_slice();
            let z = [z[0], z[1]];
            let w = weights[y as usize];
            let p = softmax2(z);
            let mut d = vec![w * p[0] / total_w, w * p[1] / total_w];
            d[y as usize] -= w / total_w;
            let mut g = Gradients::zeros_like(model);
            backward_from(model, &acts, model.layers.len(), d, &mut g);
            (w * cross_entropy(z, y), g)
        })
        .collect();
    let mut grads = Gradients::zeros_like(model);
    let mut loss = 0.0;
    for (l, g) in &per_sample {
        loss += l;
        grads.add_assign(g);
    }
    (loss / total_w, grads)
}
