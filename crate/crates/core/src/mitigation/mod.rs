//! Bias mitigation: post-hoc group thresholds, adversarial debiasing and
//! multi-site transfer.

pub mod adversarial;
pub mod thresholds;
pub mod transfer;

use serde::{Deserialize, Serialize};

pub use adversarial::{adversarial_step, compose_gradient, fit_debiased, train_debiased, Adversary, AdversaryConfig, AdversaryMode, DebiasStep};
pub use thresholds::{apply_thresholds, fit_thresholds, ThresholdCriterion, ThresholdPolicy, DEFAULT_GRID_RESOLUTION, FEASIBILITY_TOLERANCE};
pub use transfer::{pretrain_on_sources, TransferConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MitigationKind {
    #[default]
    None,
    Threshold,
    Adversarial,
    AdversarialMultihead,
    Transfer,
}

impl MitigationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Threshold => "threshold",
            Self::Adversarial => "adversarial",
            Self::AdversarialMultihead => "adversarial-multihead",
            Self::Transfer => "transfer",
        }
    }
}

impl std::str::FromStr for MitigationKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        [Self::None, Self::Threshold, Self::Adversarial, Self::AdversarialMultihead, Self::Transfer]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| crate::Error::Config(format!("unknown mitigation `{s}`")))
    }
}

impl std::fmt::Display for MitigationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
