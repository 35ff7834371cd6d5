//! Minibatch SGD for [`NeuralModel`], shared by plain, transfer and debiased training.

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::neural::{balanced_class_weights, forward_backward, ClassWeights, Gradients, LayerSpec, NeuralModel};
use crate::error::{Error, Result};
use crate::evaluation::macro_f1;
use crate::seed::{derive_seed, rng_for};

pub const DEFAULT_MAX_GRAD_NORM: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// `None` means inverse class frequency of the training labels.
    pub class_weights: Option<ClassWeights>,
    pub momentum: f64,
    /// Global L2 bound on each step's gradient over trainable tensors; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 20,
            batch_size: 32,
            class_weights: None,
            momentum: 0.9,
            max_grad_norm: Some(DEFAULT_MAX_GRAD_NORM),
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if self.max_grad_norm.is_some_and(|c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::Config("max_grad_norm must be positive".into()));
        }
        if let Some(w) = self.class_weights {
            if !w.iter().all(|v| *v > 0.0 && v.is_finite()) {
                return Err(Error::Config("class weights must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn weights_for(&self, labels: &[u8]) -> ClassWeights {
        self.class_weights.unwrap_or_else(|| balanced_class_weights(labels))
    }
}

/// Held-out windows used to keep the best-scoring epoch.
#[derive(Debug, Clone, Copy)]
pub struct ValidationSet<'a> {
    pub windows: &'a [&'a Array2<f64>],
    pub labels: &'a [u8],
}

pub(crate) fn check_training_set(model: &NeuralModel, windows: &[&Array2<f64>], labels: &[u8]) -> Result<()> {
    if windows.len() != labels.len() {
        return Err(Error::LengthMismatch(windows.len(), labels.len()));
    }
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    if n1 == 0 || n1 == labels.len() {
        return Err(Error::SingleClassTraining);
    }
    windows.iter().try_for_each(|w| model.check_input(w))
}

fn sgd_update(model: &mut NeuralModel, grads: &Gradients, velocity: &mut Gradients, frozen: &[bool], cfg: &TrainConfig) {
    for (((w, g), v), &fz) in model.params_mut().into_iter().zip(&grads.tensors).zip(&mut velocity.tensors).zip(frozen) {
        if fz {
            continue;
        }
        for ((wi, gi), vi) in w.iter_mut().zip(g).zip(v.iter_mut()) {
            *vi = cfg.momentum * *vi + gi;
            *wi -= cfg.learning_rate * *vi;
        }
    }
}

/// Shuffled minibatch loop. `step` returns the batch loss and the update
/// direction for the current model.
/// Rescale trainable tensors so their joint L2 norm is at most `limit`.
fn clip_norm(grads: &mut Gradients, frozen: &[bool], limit: f64) {
    let sq: f64 = grads.tensors.iter().zip(frozen).filter(|(_, &f)| !f).flat_map(|(t, _)| t.iter()).map(|v| v * v).sum();
    let norm = sq.sqrt();
    if norm > limit {
        grads.scale(limit / norm);
    }
}

pub(crate) fn run_training<F>(
    model: &mut NeuralModel,
    n: usize,
    cfg: &TrainConfig,
    validation: Option<ValidationSet<'_>>,
    mut step: F,
) -> Result<()>
where
    F: FnMut(&NeuralModel, &[usize]) -> Result<(f64, Gradients)>,
{
    cfg.validate()?;
    let frozen = model.tensor_frozen();
    let mut velocity = Gradients::zeros_like(model);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_for(cfg.rng_seed, &[0x5EED_0002]);
    let mut best: Option<(f64, NeuralModel)> = None;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (loss, mut grads) = step(model, batch)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::DivergedLoss { epoch });
            }
            if let Some(limit) = cfg.max_grad_norm {
                clip_norm(&mut grads, &frozen, limit);
            }
            sgd_update(model, &grads, &mut velocity, &frozen, cfg);
            if !model.all_finite() {
                return Err(Error::DivergedLoss { epoch });
            }
        }
        if let Some(val) = validation {
            let pred: Vec<u8> = val
                .windows
                .iter()
                .map(|w| u8::from(model.predict_score(w).map_or(0.0, |s| s) >= 0.5))
                .collect();
            let f1 = macro_f1(&pred, val.labels)?;
            if best.as_ref().is_none_or(|(b, _)| f1 > *b) {
                best = Some((f1, model.clone()));
            }
        }
    }
    if let Some((_, m)) = best {
        *model = m;
    }
    Ok(())
}

/// Continue training `model` in place on a labelled set with plain cross-entropy.
pub fn fit(model: &mut NeuralModel, windows: &[&Array2<f64>], labels: &[u8], cfg: &TrainConfig, validation: Option<ValidationSet<'_>>) -> Result<()> {
    check_training_set(model, windows, labels)?;
    let weights = cfg.weights_for(labels);
    run_training(model, windows.len(), cfg, validation, |m, batch| {
        let xs: Vec<&Array2<f64>> = batch.iter().map(|&i| windows[i]).collect();
        let ys: Vec<u8> = batch.iter().map(|&i| labels[i]).collect();
        Ok(forward_backward(m, &xs, &ys, weights))
    })
}

/// Initialize `arch` for the window shape and train it.
pub fn train_neural(
    windows: &[&Array2<f64>],
    labels: &[u8],
    arch: &[LayerSpec],
    cfg: &TrainConfig,
    validation: Option<ValidationSet<'_>>,
) -> Result<NeuralModel> {
    let first = windows.first().ok_or(Error::SingleClassTraining)?;
    let mut model = NeuralModel::new(arch, first.nrows(), first.ncols(), derive_seed(cfg.rng_seed, &[0x1417]))?;
    fit(&mut model, windows, labels, cfg, validation)?;
    Ok(model)
}

/// Fine-tune a copy of `pretrained` with its first `freeze_prefix` weight
/// layers held fixed.
pub fn transfer_finetune(
    pretrained: &NeuralModel,
    windows: &[&Array2<f64>],
    labels: &[u8],
    freeze_prefix: usize,
    cfg: &TrainConfig,
    validation: Option<ValidationSet<'_>>,
) -> Result<NeuralModel> {
    for w in windows {
        if w.ncols() != pretrained.input_channels || w.nrows() < pretrained.min_input_len() {
            return Err(Error::ShapeIncompatible(format!(
                "pretrained network takes {} channels and at least {} steps, target window is {} x {}",
                pretrained.input_channels,
                pretrained.min_input_len(),
                w.nrows(),
                w.ncols()
            )));
        }
    }
    let mut model = pretrained.clone();
    model.freeze_prefix(freeze_prefix)?;
    fit(&mut model, windows, labels, cfg, validation)?;
    model.set_all_frozen(false);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::models::neural::Layer;

    fn small_arch() -> Vec<LayerSpec> {
        use LayerSpec::*;
        vec![
            Conv1d { kernel_size: 5, out_channels: 4 },
            Relu,
            Conv1d { kernel_size: 5, out_channels: 4 },
            Relu,
            GlobalMeanPool,
            Dense { out_dim: 8 },
            Relu,
            Dense { out_dim: 2 },
        ]
    }

    /// 2 s windows at 32 Hz: 5 Hz tone (FOG) vs flat signal, both noisy.
    fn tone_set(n: usize, seed: u64) -> (Vec<Array2<f64>>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fs = 32.0;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let y = (i % 2) as u8;
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let x = Array2::from_shape_fn((64, 1), |(t, _)| {
                let tone = if y == 1 { (std::f64::consts::TAU * 5.0 * t as f64 / fs + phase).sin() } else { 0.0 };
                tone + 0.1 * rng.gen_range(-1.0..1.0)
            });
            xs.push(x);
            ys.push(y);
        }
        (xs, ys)
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 8,
            rng_seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn learns_tone_vs_flat() {
        let (xs, ys) = tone_set(80, 1);
        let refs: Vec<&Array2<f64>> = xs.iter().collect();
        let model = train_neural(&refs, &ys, &small_arch(), &cfg(), None).unwrap();
        let (xt, yt) = tone_set(200, 2);
        let correct = xt.iter().zip(&yt).filter(|(x, &y)| u8::from(model.predict_score(x).unwrap() >= 0.5) == y).count();
        assert!(correct as f64 / 200.0 >= 0.95, "accuracy {correct}/200");
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let (xs, ys) = tone_set(10, 1);
        let refs: Vec<&Array2<f64>> = xs.iter().collect();
        let c = TrainConfig { epochs: 0, ..cfg() };
        let trained = train_neural(&refs, &ys, &small_arch(), &c, None).unwrap();
        let init = NeuralModel::new(&small_arch(), 64, 1, derive_seed(c.rng_seed, &[0x1417])).unwrap();
        assert_eq!(trained, init);
    }

    #[test]
    fn huge_learning_rate_diverges() {
        // without ReLU nothing can die, so the coupled layers grow geometrically
        use LayerSpec::*;
        let linear = vec![
            Conv1d { kernel_size: 5, out_channels: 4 },
            GlobalMeanPool,
            Dense { out_dim: 4 },
            Dense { out_dim: 2 },
        ];
        let (xs, ys) = tone_set(40, 3);
        let refs: Vec<&Array2<f64>> = xs.iter().collect();
        let c = TrainConfig { learning_rate: 1e3, max_grad_norm: None, ..cfg() };
        let err = train_neural(&refs, &ys, &linear, &c, None).unwrap_err();
        assert!(matches!(err, Error::DivergedLoss { .. }), "{err:?}");
    }

    #[test]
    fn deterministic_weights() {
        let (xs, ys) = tone_set(30, 4);
        let refs: Vec<&Array2<f64>> = xs.iter().collect();
        let c = TrainConfig { epochs: 3, ..cfg() };
        let a = train_neural(&refs, &ys, &small_arch(), &c, None).unwrap();
        let b = train_neural(&refs, &ys, &small_arch(), &c, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_rejected() {
        let (xs, _) = tone_set(6, 1);
        let refs: Vec<&Array2<f64>> = xs.iter().collect();
        assert!(matches!(train_neural(&refs, &[1; 6], &small_arch(), &cfg(), None), Err(Error::SingleClassTraining)));
    }

    fn weight_tensors(m: &NeuralModel) -> Vec<Vec<f64>> {
        m.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Conv1d { weight, .. } | Layer::Dense { weight, .. } => Some(weight.clone()),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn freezing_keeps_prefix_bitwise() {
        let (xs, ys) = tone_set(30, 5);
        let refs: Vec<&Array2<f64>> = xs.iter().collect();
        let c = TrainConfig { epochs: 2, ..cfg() };
        let pre = train_neural(&refs, &ys, &small_arch(), &c, None).unwrap();
        let tuned = transfer_finetune(&pre, &refs, &ys, 2, &c, None).unwrap();
        let (a, b) = (weight_tensors(&pre), weight_tensors(&tuned));
        assert_eq!(a[..2], b[..2]);
        assert_ne!(a[2], b[2]);
        assert_ne!(a[3], b[3]);

        let all = transfer_finetune(&pre, &refs, &ys, 4, &c, None).unwrap();
        assert_eq!(all, pre);

        let mut manual = pre.clone();
        fit(&mut manual, &refs, &ys, &c, None).unwrap();
        assert_eq!(transfer_finetune(&pre, &refs, &ys, 0, &c, None).unwrap(), manual);
    }

    #[test]
    fn incompatible_target_shape() {
        let (xs, ys) = tone_set(10, 5);
        let refs: Vec<&Array2<f64>> = xs.iter().collect();
        let pre = train_neural(&refs, &ys, &small_arch(), &TrainConfig { epochs: 1, ..cfg() }, None).unwrap();
        let wide = vec![Array2::<f64>::zeros((64, 3)); 2];
        let wide: Vec<&Array2<f64>> = wide.iter().collect();
        assert!(matches!(transfer_finetune(&pre, &wide, &[0, 1], 1, &cfg(), None), Err(Error::ShapeIncompatible(_))));
    }

    #[test]
    fn validation_checkpoint_is_an_epoch_snapshot() {
        let (xs, ys) = tone_set(40, 6);
        let refs: Vec<&Array2<f64>> = xs.iter().collect();
        let (xv, yv) = tone_set(20, 7);
        let vrefs: Vec<&Array2<f64>> = xv.iter().collect();
        let val = ValidationSet { windows: &vrefs, labels: &yv };
        let c = TrainConfig { epochs: 5, ..cfg() };
        let best = train_neural(&refs, &ys, &small_arch(), &c, Some(val)).unwrap();
        let score = |m: &NeuralModel| {
            let p: Vec<u8> = vrefs.iter().map(|w| u8::from(m.predict_score(w).unwrap() >= 0.5)).collect();
            macro_f1(&p, &yv).unwrap()
        };
        for e in 1..=5 {
            let m = train_neural(&refs, &ys, &small_arch(), &TrainConfig { epochs: e, ..c.clone() }, None).unwrap();
            assert!(score(&best) >= score(&m));
        }
    }
}
