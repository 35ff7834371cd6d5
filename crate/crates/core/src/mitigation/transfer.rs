//! Multi-site transfer: pretrain on harmonized source datasets, then fine-tune
//! on the target with the early layers frozen.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::DatasetSpec;
use crate::models::{train_neural, LayerSpec, NeuralModel, TrainConfig};
use crate::windowing::WindowSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    /// Source datasets, harmonized against the target.
    pub sources: Vec<DatasetSpec>,
    /// Weight-bearing layers kept at their pretrained values.
    pub freeze_prefix: usize,
    /// Pretraining epochs; `None` reuses the fine-tuning setting.
    pub pretrain_epochs: Option<usize>,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            sources: Vec::new(),
            freeze_prefix: 2,
            pretrain_epochs: None,
        }
    }
}

/// Train one network on the pooled windows of every (already harmonized) source.
pub fn pretrain_on_sources(sources: &[WindowSet], arch: &[LayerSpec], cfg: &TrainConfig) -> Result<NeuralModel> {
    let windows: Vec<&Array2<f64>> = sources.iter().flat_map(|s| s.windows.iter().map(|w| &w.data)).collect();
    let labels: Vec<u8> = sources.iter().flat_map(|s| s.windows.iter().map(|w| w.label)).collect();
    train_neural(&windows, &labels, arch, cfg, None)
}
