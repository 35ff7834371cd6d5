//! Repeated subject-independent cross-validation and its statistics.

pub mod folds;
pub mod experiment;
pub mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use experiment::{run_experiment, DatasetRun, ExperimentConfig, ModelKind, NeuralConfig, ThresholdConfig, THREADS_ENV};
pub use folds::{plan_folds, FoldPlan, DEFAULT_MAX_RETRIES};
pub use stats::{macro_f1, macro_f1_from_counts, wilcoxon_one_sided, Summary, WilcoxonMethod, WilcoxonResult, EXACT_MAX_N, Z_95};

use crate::error::{Error, Result};
use crate::fairness::{FairnessResult, Metric, ProtectedAttribute};

/// Observations from one test fold of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub iteration: usize,
    pub fold: usize,
    pub f1: f64,
    pub fairness: BTreeMap<ProtectedAttribute, FairnessResult>,
    pub train_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub f1: Summary,
    pub fairness: BTreeMap<ProtectedAttribute, BTreeMap<Metric, Summary>>,
    pub n_samples: usize,
}

/// Mean and 95% interval per metric; degenerate fairness values are left out
/// and counted.
pub fn aggregate(samples: &[MetricSample]) -> Result<AggregateResult> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    let f1: Vec<f64> = samples.iter().map(|s| s.f1).collect();
    let attributes: std::collections::BTreeSet<ProtectedAttribute> = samples.iter().flat_map(|s| s.fairness.keys().copied()).collect();
    let mut fairness = BTreeMap::new();
    for attr in attributes {
        let mut per_metric = BTreeMap::new();
        for m in Metric::ALL {
            let mut values = Vec::new();
            let mut excluded = 0;
            let mut defined = false;
            for s in samples {
                let Some(r) = s.fairness.get(&attr) else {
                    excluded += 1;
                    continue;
                };
                if r.metric(m).is_none() {
                    continue;
                }
                defined = true;
                match r.usable(m) {
                    Some(v) => values.push(v),
                    None => excluded += 1,
                }
            }
            if defined {
                per_metric.insert(m, Summary::from_values(&values, excluded));
            }
        }
        fairness.insert(attr, per_metric);
    }
    Ok(AggregateResult {
        f1: Summary::from_values(&f1, 0),
        fairness,
        n_samples: samples.len(),
    })
}
