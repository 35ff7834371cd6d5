//! Trainable FOG detectors and their on-disk artifact.

pub mod forest;
pub mod neural;
pub mod train;

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use forest::{train_forest, ForestConfig, ForestModel};
pub use neural::{default_architecture, forward_backward, Gradients, Layer, LayerSpec, NeuralModel};
pub use train::{fit, train_neural, transfer_finetune, TrainConfig, ValidationSet};

use crate::error::{Error, Result};
use crate::features::ecdf_features;
use crate::mitigation::ThresholdPolicy;
use crate::windowing::Window;

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Detector {
    Forest { model: ForestModel, n_quantiles: usize },
    Neural { model: NeuralModel },
}

impl Detector {
    /// FOG score in `[0, 1]` per window.
    pub fn predict_scores(&self, windows: &[Window]) -> Result<Vec<f64>> {
        match self {
            Detector::Forest { model, n_quantiles } => windows
                .iter()
                .map(|w| model.predict_score(&ecdf_features(w, *n_quantiles)?.values))
                .collect(),
            Detector::Neural { model } => {
                let xs: Vec<&Array2<f64>> = windows.iter().map(|w| &w.data).collect();
                model.predict_scores(&xs)
            }
        }
    }
}

/// Hard label at the default cut-off.
pub fn default_labels(scores: &[f64]) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s >= 0.5)).collect()
}

/// Everything needed to reproduce predictions: model, config, seed and an
/// optional frozen group-threshold policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub artifact_version: u32,
    pub detector: Detector,
    #[serde(default)]
    pub threshold_policy: Option<ThresholdPolicy>,
}

impl ModelArtifact {
    pub fn new(detector: Detector) -> Self {
        Self {
            artifact_version: ARTIFACT_VERSION,
            detector,
            threshold_policy: None,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        crate::ingest::write_file(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let artifact: Self = serde_json::from_str(&text)?;
        if artifact.artifact_version != ARTIFACT_VERSION {
            return Err(Error::InvalidModel(format!(
                "artifact version {} is not supported (expected {ARTIFACT_VERSION})",
                artifact.artifact_version
            )));
        }
        Ok(artifact)
    }
}
