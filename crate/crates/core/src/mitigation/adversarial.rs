//! Adversarial debiasing: an MLP adversary predicts protected groups from the
//! predictor's representation, and the predictor follows the loss gradient
//! with the adversary's direction projected out and subtracted.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{Group, ProtectedAttribute};
use crate::models::neural::{backward_from, forward_backward, softmax2, ClassWeights, Gradients, LayerSpec, NeuralModel};
use crate::models::train::{check_training_set, run_training, TrainConfig, ValidationSet};
use crate::seed::{derive_seed, rng_for};

/// `<u, u>` below this makes the projection onto `u` zero.
pub const PROJECTION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryMode {
    SingleAttribute,
    MultiHead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversaryConfig {
    pub attributes: Vec<ProtectedAttribute>,
    pub hidden_dim: usize,
    pub alpha: f64,
    pub mode: AdversaryMode,
    /// `None` reuses the predictor learning rate.
    pub learning_rate: Option<f64>,
    /// Keep the adversary at its initial weights.
    pub frozen: bool,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        Self {
            attributes: vec![ProtectedAttribute::Sex],
            hidden_dim: 32,
            alpha: 1.0,
            mode: AdversaryMode::SingleAttribute,
            learning_rate: None,
            frozen: false,
        }
    }
}

impl AdversaryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.attributes.is_empty() {
            return Err(Error::Config("adversary needs at least one attribute".into()));
        }
        if self.mode == AdversaryMode::SingleAttribute && self.attributes.len() != 1 {
            return Err(Error::Config("single-attribute mode takes exactly one attribute".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("adversary hidden_dim must be positive".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config("alpha must be non-negative".into()));
        }
        if self.learning_rate.is_some_and(|lr| !(lr > 0.0 && lr.is_finite())) {
            return Err(Error::Config("adversary learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Dense(hidden) -> ReLU -> one Dense(2) head per attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adversary {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `[hidden][input]`
    pub hidden_weight: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    /// Per head: `[2][hidden]` weights then 2 biases.
    pub head_weights: Vec<Vec<f64>>,
    pub head_biases: Vec<Vec<f64>>,
}

/// Gradients in the order hidden weight, hidden bias, then weight and bias per head.
type AdversaryGrads = Vec<Vec<f64>>;

impl Adversary {
    pub fn new(input_dim: usize, hidden_dim: usize, n_heads: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, &[0xAD]);
        let mut uniform = |n: usize, fan_in: usize, fan_out: usize| -> Vec<f64> {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
        };
        let hidden_weight = uniform(hidden_dim * input_dim, input_dim, hidden_dim);
        let head_weights = (0..n_heads).map(|_| uniform(2 * hidden_dim, hidden_dim, 2)).collect();
        Self {
            input_dim,
            hidden_dim,
            hidden_weight,
            hidden_bias: vec![0.0; hidden_dim],
            head_weights,
            head_biases: vec![vec![0.0; 2]; n_heads],
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize, n_heads: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            hidden_weight: vec![0.0; hidden_dim * input_dim],
            hidden_bias: vec![0.0; hidden_dim],
            head_weights: vec![vec![0.0; 2 * hidden_dim]; n_heads],
            head_biases: vec![vec![0.0; 2]; n_heads],
        }
    }

    pub fn n_heads(&self) -> usize {
        self.head_weights.len()
    }

    fn hidden(&self, rep: &[f64]) -> Vec<f64> {
        (0..self.hidden_dim)
            .map(|j| {
                let w = &self.hidden_weight[j * self.input_dim..(j + 1) * self.input_dim];
                self.hidden_bias[j] + w.iter().zip(rep).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    fn head_logits(&self, head: usize, h: &[f64]) -> [f64; 2] {
        let w = &self.head_weights[head];
        let b = &self.head_biases[head];
        let z = |c: usize| b[c] + w[c * self.hidden_dim..(c + 1) * self.hidden_dim].iter().zip(h).map(|(a, x)| a * x).sum::<f64>();
        [z(0), z(1)]
    }

    /// Predicted group per head.
    pub fn predict(&self, rep: &[f64]) -> Vec<Group> {
        let h: Vec<f64> = self.hidden(rep).into_iter().map(|v| v.max(0.0)).collect();
        (0..self.n_heads())
            .map(|a| {
                let z = self.head_logits(a, &h);
                if z[1] > z[0] {
                    Group::G1
                } else {
                    Group::G0
                }
            })
            .collect()
    }

    /// Summed per-head mean cross-entropy over labelled samples, its
    /// parameter gradients and the gradient with respect to each representation.
    fn loss_and_grads(&self, reps: &[Vec<f64>], groups: &[&[Option<Group>]]) -> (f64, AdversaryGrads, Vec<Vec<f64>>) {
        let (hd, id) = (self.hidden_dim, self.input_dim);
        let counts: Vec<usize> = groups.iter().map(|g| g.iter().filter(|x| x.is_some()).count()).collect();
        let mut grads: AdversaryGrads = vec![vec![0.0; hd * id], vec![0.0; hd]];
        for _ in 0..self.n_heads() {
            grads.push(vec![0.0; 2 * hd]);
            grads.push(vec![0.0; 2]);
        }
        let mut loss = 0.0;
        let mut d_reps = Vec::with_capacity(reps.len());
        for (i, rep) in reps.iter().enumerate() {
            let pre = self.hidden(rep);
            let h: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
            let mut dh = vec![0.0; hd];
            for (a, labels) in groups.iter().enumerate() {
                let Some(g) = labels[i] else { continue };
                let scale = 1.0 / counts[a] as f64;
                let z = self.head_logits(a, &h);
                let p = softmax2(z);
                loss += scale * crate::models::neural::cross_entropy(z, g.index() as u8);
                let mut dz = [p[0] * scale, p[1] * scale];
                dz[g.index()] -= scale;
                let w = &self.head_weights[a];
                for c in 0..2 {
                    for j in 0..hd {
                        grads[2 + 2 * a][c * hd + j] += dz[c] * h[j];
                        dh[j] += dz[c] * w[c * hd + j];
                    }
                    grads[3 + 2 * a][c] += dz[c];
                }
            }
            let mut dr = vec![0.0; id];
            for j in 0..hd {
                if pre[j] <= 0.0 || dh[j] == 0.0 {
                    continue;
                }
                let g = dh[j];
                grads[1][j] += g;
                let row = j * id..(j + 1) * id;
                for ((gw, r), (d, w)) in grads[0][row.clone()].iter_mut().zip(rep).zip(dr.iter_mut().zip(&self.hidden_weight[row])) {
                    *gw += g * r;
                    *d += g * w;
                }
            }
            d_reps.push(dr);
        }
        (loss, grads, d_reps)
    }

    fn sgd(&mut self, grads: &AdversaryGrads, lr: f64) {
        let mut tensors: Vec<&mut Vec<f64>> = vec![&mut self.hidden_weight, &mut self.hidden_bias];
        for (w, b) in self.head_weights.iter_mut().zip(self.head_biases.iter_mut()) {
            tensors.push(w);
            tensors.push(b);
        }
        for (t, g) in tensors.into_iter().zip(grads) {
            for (w, d) in t.iter_mut().zip(g) {
                *w -= lr * d;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per tensor: `g = v - proj_u(v) - alpha * u` with `v` the predictor
/// gradient and `u` the adversary gradient. Returns the direction and the
/// largest `|<v - proj_u(v), u>|` seen.
pub fn compose_gradient(predictor: &Gradients, adversary: &Gradients, alpha: f64) -> (Gradients, f64) {
    let mut worst = 0.0f64;
    let tensors = predictor
        .tensors
        .iter()
        .zip(&adversary.tensors)
        .map(|(v, u)| {
            let uu = dot(u, u);
            let mut res = v.clone();
            if uu >= PROJECTION_EPS {
                // second pass removes the rounding left by the first
                for _ in 0..2 {
                    let c = dot(&res, u) / uu;
                    for (r, ui) in res.iter_mut().zip(u) {
                        *r -= c * ui;
                    }
                }
            }
            worst = worst.max(dot(&res, u).abs());
            for (r, ui) in res.iter_mut().zip(u) {
                *r -= alpha * ui;
            }
            res
        })
        .collect();
    (Gradients { tensors }, worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DebiasStep {
    pub predictor_loss: f64,
    /// Adversary loss before its update.
    pub adversary_loss: f64,
    pub max_residual_dot: f64,
}

/// One alternating update: the adversary steps on its loss, then the
/// predictor direction is composed against the updated adversary.
#[allow(clippy::too_many_arguments)]
fn debias_direction(
    model: &NeuralModel,
    adversary: &mut Adversary,
    xs: &[&Array2<f64>],
    ys: &[u8],
    groups: &[&[Option<Group>]],
    adv_cfg: &AdversaryConfig,
    adv_lr: f64,
    weights: ClassWeights,
) -> (DebiasStep, Gradients) {
    let rep_layer = model.layers.len() - 1;
    let traces: Vec<_> = xs.par_iter().map(|x| model.forward_trace(x)).collect();
    let reps: Vec<Vec<f64>> = traces.iter().map(|t| t[rep_layer].data.clone()).collect();
    let (adversary_loss, adv_grads, _) = adversary.loss_and_grads(&reps, groups);
    if !adv_cfg.frozen {
        adversary.sgd(&adv_grads, adv_lr);
    }
    let (_, _, d_reps) = adversary.loss_and_grads(&reps, groups);
    let per_sample: Vec<Gradients> = traces
        .par_iter()
        .zip(d_reps.into_par_iter())
        .map(|(acts, dr)| {
            let mut g = Gradients::zeros_like(model);
            backward_from(model, acts, rep_layer, dr, &mut g);
            g
        })
        .collect();
    let mut adv_pred_grads = Gradients::zeros_like(model);
    for g in &per_sample {
        adv_pred_grads.add_assign(g);
    }
    let (predictor_loss, pred_grads) = forward_backward(model, xs, ys, weights);
    let (direction, max_residual_dot) = compose_gradient(&pred_grads, &adv_pred_grads, adv_cfg.alpha);
    (
        DebiasStep {
            predictor_loss,
            adversary_loss,
            max_residual_dot,
        },
        direction,
    )
}

fn check_group_labels(adv_cfg: &AdversaryConfig, group_labels: &[Vec<Option<Group>>], n: usize) -> Result<()> {
    if group_labels.len() != adv_cfg.attributes.len() {
        return Err(Error::MissingGroupLabels(format!(
            "{} attributes configured, labels given for {}",
            adv_cfg.attributes.len(),
            group_labels.len()
        )));
    }
    for (attr, labels) in adv_cfg.attributes.iter().zip(group_labels) {
        if labels.len() != n || labels.iter().all(Option::is_none) {
            return Err(Error::MissingGroupLabels(attr.to_string()));
        }
    }
    Ok(())
}

/// One plain SGD step of the predictor along the composed direction.
#[allow(clippy::too_many_arguments)]
pub fn adversarial_step(
    model: &mut NeuralModel,
    adversary: &mut Adversary,
    xs: &[&Array2<f64>],
    ys: &[u8],
    group_labels: &[Vec<Option<Group>>],
    adv_cfg: &AdversaryConfig,
    learning_rate: f64,
    weights: ClassWeights,
) -> Result<DebiasStep> {
    adv_cfg.validate()?;
    check_group_labels(adv_cfg, group_labels, xs.len())?;
    let groups: Vec<&[Option<Group>]> = group_labels.iter().map(Vec::as_slice).collect();
    let lr_adv = adv_cfg.learning_rate.unwrap_or(learning_rate);
    let (step, dir) = debias_direction(model, adversary, xs, ys, &groups, adv_cfg, lr_adv, weights);
    let frozen = model.tensor_frozen();
    for ((w, g), fz) in model.params_mut().into_iter().zip(&dir.tensors).zip(frozen) {
        if !fz {
            for (wi, gi) in w.iter_mut().zip(g) {
                *wi -= learning_rate * gi;
            }
        }
    }
    Ok(step)
}

/// Debiased training of an existing predictor/adversary pair. `observe` sees
/// every step.
#[allow(clippy::too_many_arguments)]
pub fn fit_debiased(
    model: &mut NeuralModel,
    adversary: &mut Adversary,
    windows: &[&Array2<f64>],
    labels: &[u8],
    group_labels: &[Vec<Option<Group>>],
    cfg: &TrainConfig,
    adv_cfg: &AdversaryConfig,
    validation: Option<ValidationSet<'_>>,
    mut observe: impl FnMut(&DebiasStep),
) -> Result<()> {
    adv_cfg.validate()?;
    check_training_set(model, windows, labels)?;
    check_group_labels(adv_cfg, group_labels, windows.len())?;
    if adversary.input_dim != model.representation_dim() || adversary.n_heads() != adv_cfg.attributes.len() {
        return Err(Error::InvalidModel("adversary does not match the predictor representation".into()));
    }
    let weights = cfg.weights_for(labels);
    let adv_lr = adv_cfg.learning_rate.unwrap_or(cfg.learning_rate);
    run_training(model, windows.len(), cfg, validation, |m, batch| {
        let xs: Vec<&Array2<f64>> = batch.iter().map(|&i| windows[i]).collect();
        let ys: Vec<u8> = batch.iter().map(|&i| labels[i]).collect();
        let gl: Vec<Vec<Option<Group>>> = group_labels.iter().map(|g| batch.iter().map(|&i| g[i]).collect()).collect();
        let gl: Vec<&[Option<Group>]> = gl.iter().map(Vec::as_slice).collect();
        let (step, dir) = debias_direction(m, adversary, &xs, &ys, &gl, adv_cfg, adv_lr, weights);
        observe(&step);
        Ok((step.predictor_loss, dir))
    })
}

/// Train a fresh predictor against a fresh adversary; returns the predictor.
/// `group_labels[a][i]` is window `i`'s group for attribute `a`, `None`
/// where undefined (masked out of the adversary loss).
pub fn train_debiased(
    windows: &[&Array2<f64>],
    labels: &[u8],
    group_labels: &[Vec<Option<Group>>],
    arch: &[LayerSpec],
    cfg: &TrainConfig,
    adv_cfg: &AdversaryConfig,
    validation: Option<ValidationSet<'_>>,
) -> Result<NeuralModel> {
    let first = windows.first().ok_or(Error::SingleClassTraining)?;
    let mut model = NeuralModel::new(arch, first.nrows(), first.ncols(), derive_seed(cfg.rng_seed, &[0x1417]))?;
    let mut adversary = Adversary::new(
        model.representation_dim(),
        adv_cfg.hidden_dim,
        adv_cfg.attributes.len(),
        derive_seed(cfg.rng_seed, &[0xAD7]),
    );
    fit_debiased(&mut model, &mut adversary, windows, labels, group_labels, cfg, adv_cfg, validation, |_| {})?;
    Ok(model)
}
