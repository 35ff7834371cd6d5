//! Experiment configuration and the repeated cross-validation driver.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{plan_folds, FoldPlan, DEFAULT_MAX_RETRIES};
use super::stats::macro_f1;
use super::MetricSample;
use crate::error::{Error, Result};
use crate::fairness::{
    assign_phenotype_groups, compute_fairness, dichotomize, AttributeLevel, Group, GroupAssignment, PredictionSet, ProtectedAttribute,
};
use crate::features::{ecdf_features, DEFAULT_N_QUANTILES};
use crate::ingest::{apply_scaling, fit_scaling, harmonize_pair, DatasetSpec, FitScope, SensorRecording, SubjectMetadata};
use crate::mitigation::{
    apply_thresholds, fit_thresholds, pretrain_on_sources, train_debiased, AdversaryConfig, AdversaryMode, MitigationKind, ThresholdCriterion,
    ThresholdPolicy, TransferConfig, DEFAULT_GRID_RESOLUTION,
};
use crate::models::{
    default_architecture, train_forest, train_neural, transfer_finetune, Detector, ForestConfig, LayerSpec, NeuralModel, TrainConfig,
    ValidationSet,
};
use crate::seed::{derive_seed, rng_for};
use crate::windowing::{extract_episodes, overlapping_episode, segment, Episode, Window, DEFAULT_MIN_EPISODE_S, DEFAULT_WINDOW_S};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "FOGFAIR_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Tree ensemble over ECDF features.
    #[default]
    Forest,
    /// Convolutional network over raw windows.
    Neural,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Forest => "forest",
            ModelKind::Neural => "neural",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralConfig {
    pub architecture: Vec<LayerSpec>,
    pub train: TrainConfig,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        Self {
            architecture: default_architecture(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    /// Attribute whose groups receive separate thresholds.
    pub attribute: ProtectedAttribute,
    pub criterion: ThresholdCriterion,
    pub grid_resolution: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            attribute: ProtectedAttribute::Sex,
            criterion: ThresholdCriterion::DemographicParity,
            grid_resolution: DEFAULT_GRID_RESOLUTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSpec>,
    pub model: ModelKind,
    pub mitigation: MitigationKind,
    pub seed: u64,
    pub iterations: usize,
    pub folds: usize,
    pub window_seconds: f64,
    pub min_episode_seconds: f64,
    pub attributes: Vec<ProtectedAttribute>,
    pub scaling: FitScope,
    /// Share of training subjects held out for checkpointing and threshold calibration.
    pub validation_fraction: f64,
    pub max_fold_retries: usize,
    pub n_quantiles: usize,
    pub forest: ForestConfig,
    pub neural: NeuralConfig,
    pub threshold: ThresholdConfig,
    pub adversarial: AdversaryConfig,
    pub transfer: TransferConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            model: ModelKind::Forest,
            mitigation: MitigationKind::None,
            seed: 0,
            iterations: 10,
            folds: 5,
            window_seconds: DEFAULT_WINDOW_S,
            min_episode_seconds: DEFAULT_MIN_EPISODE_S,
            attributes: ProtectedAttribute::ALL.to_vec(),
            scaling: FitScope::TrainOnly,
            validation_fraction: 0.2,
            max_fold_retries: DEFAULT_MAX_RETRIES,
            n_quantiles: DEFAULT_N_QUANTILES,
            forest: ForestConfig::default(),
            neural: NeuralConfig::default(),
            threshold: ThresholdConfig::default(),
            adversarial: AdversaryConfig::default(),
            transfer: TransferConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parse a config file; relative dataset paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.datasets.iter_mut().for_each(|d| resolve(&mut d.path));
        cfg.transfer.sources.iter_mut().for_each(|d| resolve(&mut d.path));
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("no datasets configured".into()));
        }
        if self.iterations == 0 || self.folds < 2 {
            return Err(Error::Config("iterations must be positive and folds at least 2".into()));
        }
        if !(self.window_seconds > 0.0) || !(self.min_episode_seconds >= 0.0) {
            return Err(Error::Config("window and episode durations must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config("validation_fraction must lie in [0, 1)".into()));
        }
        if self.attributes.is_empty() {
            return Err(Error::Config("no protected attributes configured".into()));
        }
        let needs_neural = matches!(
            self.mitigation,
            MitigationKind::Adversarial | MitigationKind::AdversarialMultihead | MitigationKind::Transfer
        );
        if needs_neural && self.model != ModelKind::Neural {
            return Err(Error::Config(format!("mitigation `{}` requires model = \"neural\"", self.mitigation)));
        }
        if self.mitigation == MitigationKind::Transfer && self.transfer.sources.is_empty() {
            return Err(Error::Config("transfer mitigation needs at least one source dataset".into()));
        }
        if self.mitigation == MitigationKind::Threshold && !self.attributes.contains(&self.threshold.attribute) {
            return Err(Error::Config(format!("threshold attribute `{}` is not audited", self.threshold.attribute)));
        }
        if self.mitigation == MitigationKind::Threshold && self.validation_fraction == 0.0 {
            return Err(Error::Config("threshold calibration needs validation_fraction > 0".into()));
        }
        self.neural.train.validate()?;
        self.adversary_config()?.validate()
    }

    /// Adversary settings for the configured mitigation mode.
    pub fn adversary_config(&self) -> Result<AdversaryConfig> {
        let mut adv = self.adversarial.clone();
        match self.mitigation {
            MitigationKind::AdversarialMultihead => {
                adv.mode = AdversaryMode::MultiHead;
                if adv.attributes.len() < 2 {
                    adv.attributes = self.attributes.clone();
                }
            }
            _ => {
                adv.mode = AdversaryMode::SingleAttribute;
                adv.attributes.truncate(1);
            }
        }
        if let Some(a) = adv.attributes.iter().find(|a| !self.attributes.contains(a)) {
            return Err(Error::Config(format!("adversary attribute `{a}` is not audited")));
        }
        Ok(adv)
    }
}

/// Samples of one (dataset, model, mitigation) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRun {
    pub dataset_id: String,
    pub model: ModelKind,
    pub mitigation: MitigationKind,
    /// Median used to dichotomize each continuous attribute.
    pub dichotomization: BTreeMap<ProtectedAttribute, f64>,
    /// Units per group `[g0, g1]`.
    pub group_sizes: BTreeMap<ProtectedAttribute, [usize; 2]>,
    pub fold_plans: Vec<FoldPlan>,
    pub samples: Vec<MetricSample>,
}

/// Run `f` inside a pool capped by [`THREADS_ENV`] when it is set.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            let n: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<DatasetRun>> {
    cfg.validate()?;
    with_thread_cap(|| cfg.datasets.iter().enumerate().map(|(i, d)| run_dataset(cfg, d, i as u64)).collect())?
}

struct Prepared {
    dataset_id: String,
    recordings: Vec<SensorRecording>,
    subjects: Vec<String>,
    subject_groups: Vec<GroupAssignment>,
    phenotype: Option<(Vec<Episode>, GroupAssignment)>,
    pretrained: Option<NeuralModel>,
}

impl Prepared {
    fn assignment(&self, attr: ProtectedAttribute) -> Option<&GroupAssignment> {
        match attr.level() {
            AttributeLevel::Subject => self.subject_groups.iter().find(|g| g.attribute == attr),
            AttributeLevel::Episode => self.phenotype.as_ref().map(|p| &p.1),
        }
    }

    /// Unit whose group applies to `w` under `attr`; `None` for windows outside episodes.
    fn unit_of(&self, w: &Window, attr: ProtectedAttribute) -> Option<String> {
        match attr.level() {
            AttributeLevel::Subject => Some(w.subject_id.clone()),
            AttributeLevel::Episode => {
                let (eps, _) = self.phenotype.as_ref()?;
                overlapping_episode(w, eps).map(|k| eps[k].id())
            }
        }
    }

    fn group_of(&self, w: &Window, attr: ProtectedAttribute) -> Option<Group> {
        let unit = self.unit_of(w, attr)?;
        self.assignment(attr)?.membership.get(&unit).copied()
    }
}

fn prepare(cfg: &ExperimentConfig, spec: &DatasetSpec, dataset_idx: u64) -> Result<Prepared> {
    let (mut recordings, metadata) = spec.load()?;
    let dataset_id = metadata.first().map(|m| m.dataset_id.clone()).unwrap_or_default();
    let mut pretrained = None;
    if cfg.mitigation == MitigationKind::Transfer {
        let mut sources = Vec::new();
        for s in &cfg.transfer.sources {
            sources.extend(s.load()?.0);
        }
        let (src, tgt) = harmonize_pair(&sources, &recordings)?;
        recordings = tgt;
        let params = fit_scaling(&src, FitScope::Global)?;
        let sets = src
            .iter()
            .map(|r| segment(&apply_scaling(r, &params)?, cfg.window_seconds))
            .collect::<Result<Vec<_>>>()?;
        let train = TrainConfig {
            epochs: cfg.transfer.pretrain_epochs.unwrap_or(cfg.neural.train.epochs),
            rng_seed: derive_seed(cfg.seed, &[dataset_idx, 0x7F]),
            ..cfg.neural.train.clone()
        };
        pretrained = Some(pretrain_on_sources(&sets, &cfg.neural.architecture, &train)?);
    }
    let subjects: Vec<String> = metadata.iter().map(|m| m.subject_id.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let subject_groups = cfg
        .attributes
        .iter()
        .filter(|a| a.level() == AttributeLevel::Subject)
        .map(|&a| dichotomize(&metadata, a))
        .collect::<Result<Vec<_>>>()?;
    let phenotype = if cfg.attributes.contains(&ProtectedAttribute::FogPhenotype) {
        let episodes: Vec<Episode> = recordings.iter().flat_map(|r| extract_episodes(r, cfg.min_episode_seconds)).collect();
        let rate = recordings.first().map_or(0.0, |r| r.sampling_rate_hz);
        let groups = assign_phenotype_groups(&episodes, rate)?;
        Some((episodes, groups))
    } else {
        None
    };
    check_subject_coverage(&metadata, &recordings)?;
    Ok(Prepared {
        dataset_id,
        recordings,
        subjects,
        subject_groups,
        phenotype,
        pretrained,
    })
}

fn check_subject_coverage(metadata: &[SubjectMetadata], recordings: &[SensorRecording]) -> Result<()> {
    let known: BTreeSet<&str> = metadata.iter().map(|m| m.subject_id.as_str()).collect();
    match recordings.iter().find(|r| !known.contains(r.subject_id.as_str())) {
        Some(r) => Err(Error::MissingMetadata(r.subject_id.clone())),
        None => Ok(()),
    }
}

fn run_dataset(cfg: &ExperimentConfig, spec: &DatasetSpec, dataset_idx: u64) -> Result<DatasetRun> {
    let prep = prepare(cfg, spec, dataset_idx)?;
    let plans = (0..cfg.iterations)
        .map(|it| {
            plan_folds(
                &prep.subjects,
                &prep.subject_groups,
                cfg.folds,
                derive_seed(cfg.seed, &[dataset_idx, it as u64]),
                cfg.max_fold_retries,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.iterations).flat_map(|it| (0..cfg.folds).map(move |f| (it, f))).collect();
    let samples = jobs
        .par_iter()
        .map(|&(it, fold)| run_fold(cfg, &prep, &plans[it], it, fold, derive_seed(cfg.seed, &[dataset_idx, it as u64, fold as u64])))
        .collect::<Result<Vec<_>>>()?;
    let mut dichotomization = BTreeMap::new();
    let mut group_sizes = BTreeMap::new();
    for g in prep.subject_groups.iter().chain(prep.phenotype.as_ref().map(|p| &p.1)) {
        if let Some(t) = g.dichotomization_threshold {
            dichotomization.insert(g.attribute, t);
        }
        let (a, b) = g.sizes();
        group_sizes.insert(g.attribute, [a, b]);
    }
    Ok(DatasetRun {
        dataset_id: prep.dataset_id.clone(),
        model: cfg.model,
        mitigation: cfg.mitigation,
        dichotomization,
        group_sizes,
        fold_plans: plans,
        samples,
    })
}

/// Hold out validation subjects, preferring a split where both the
/// validation and remaining subjects contain both groups of `stratify`.
fn split_validation(train: &[String], fraction: f64, seed: u64, stratify: Option<&GroupAssignment>) -> (Vec<String>, Vec<String>) {
    if fraction == 0.0 || train.len() < 2 {
        return (train.to_vec(), Vec::new());
    }
    // a stratified holdout needs room for one unit of each group on both sides
    let floor = if stratify.is_some() && train.len() >= 4 { 2 } else { 1 };
    let n_val = ((train.len() as f64 * fraction).round() as usize).clamp(floor, train.len() - floor);
    let both = |set: &[String], g: &GroupAssignment| {
        let mut seen = [false; 2];
        for s in set {
            if let Some(x) = g.membership.get(s) {
                seen[x.index()] = true;
            }
        }
        seen[0] && seen[1]
    };
    let mut split = (Vec::new(), Vec::new());
    for attempt in 0..100u64 {
        let mut order = train.to_vec();
        order.shuffle(&mut rng_for(seed, &[0x7A1, attempt]));
        let val: Vec<String> = order[..n_val].to_vec();
        let fit: Vec<String> = order[n_val..].to_vec();
        let ok = stratify.is_none_or(|g| both(&val, g) && both(&fit, g));
        split = (fit, val);
        if ok {
            break;
        }
    }
    split.0.sort();
    split.1.sort();
    split
}

fn refs(s: &BTreeSet<String>) -> BTreeSet<&str> {
    s.iter().map(String::as_str).collect()
}

fn windows_of(subjects: &BTreeSet<&str>, recs: &[SensorRecording], window_seconds: f64) -> Result<Vec<Window>> {
    let mut out = Vec::new();
    for r in recs.iter().filter(|r| subjects.contains(r.subject_id.as_str())) {
        out.extend(segment(r, window_seconds)?.windows);
    }
    Ok(out)
}

/// Scores, labels and groups of windows keyed for one attribute.
fn prediction_set(prep: &Prepared, windows: &[Window], scores: &[f64], y_pred: &[u8], attr: ProtectedAttribute) -> Result<PredictionSet> {
    let (mut ids, mut pred, mut truth, mut sc) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, w) in windows.iter().enumerate() {
        if let Some(u) = prep.unit_of(w, attr) {
            ids.push(u);
            pred.push(y_pred[i]);
            truth.push(w.label);
            sc.push(scores[i]);
        }
    }
    PredictionSet::new(ids, pred, truth, sc)
}

fn run_fold(cfg: &ExperimentConfig, prep: &Prepared, plan: &FoldPlan, iteration: usize, fold: usize, seed: u64) -> Result<MetricSample> {
    let test_subjects = plan.test_subjects(fold);
    let train_subjects = plan.train_subjects(fold);
    let needs_holdout = cfg.model == ModelKind::Neural || cfg.mitigation == MitigationKind::Threshold;
    let stratify = (cfg.mitigation == MitigationKind::Threshold)
        .then(|| prep.assignment(cfg.threshold.attribute))
        .flatten()
        .filter(|g| g.attribute.level() == AttributeLevel::Subject);
    let (fit_subjects, val_subjects) = if needs_holdout {
        split_validation(&train_subjects, cfg.validation_fraction, seed, stratify)
    } else {
        (train_subjects.clone(), Vec::new())
    };

    let train_set: BTreeSet<&str> = train_subjects.iter().map(String::as_str).collect();
    let params = match cfg.scaling {
        FitScope::TrainOnly => {
            let train_recs: Vec<SensorRecording> = prep.recordings.iter().filter(|r| train_set.contains(r.subject_id.as_str())).cloned().collect();
            fit_scaling(&train_recs, FitScope::TrainOnly)?
        }
        FitScope::Global => fit_scaling(&prep.recordings, FitScope::Global)?,
    };
    let scaled = prep.recordings.iter().map(|r| apply_scaling(r, &params)).collect::<Result<Vec<_>>>()?;
    let as_set = |v: &[String]| -> BTreeSet<String> { v.iter().cloned().collect() };
    let (fit_ids, val_ids, test_ids) = (as_set(&fit_subjects), as_set(&val_subjects), as_set(&test_subjects));
    let fit_w = windows_of(&refs(&fit_ids), &scaled, cfg.window_seconds)?;
    let val_w = windows_of(&refs(&val_ids), &scaled, cfg.window_seconds)?;
    let test_w = windows_of(&refs(&test_ids), &scaled, cfg.window_seconds)?;
    let fit_labels: Vec<u8> = fit_w.iter().map(|w| w.label).collect();

    let train_cfg = TrainConfig {
        rng_seed: derive_seed(seed, &[2]),
        ..cfg.neural.train.clone()
    };
    let fit_x: Vec<&Array2<f64>> = fit_w.iter().map(|w| &w.data).collect();
    let val_x: Vec<&Array2<f64>> = val_w.iter().map(|w| &w.data).collect();
    let val_labels: Vec<u8> = val_w.iter().map(|w| w.label).collect();
    let validation = (!val_w.is_empty()).then_some(ValidationSet {
        windows: &val_x,
        labels: &val_labels,
    });
    let detector = match (cfg.model, cfg.mitigation) {
        (ModelKind::Forest, _) => {
            let feats = fit_w
                .iter()
                .map(|w| ecdf_features(w, cfg.n_quantiles).map(|f| f.values))
                .collect::<Result<Vec<_>>>()?;
            let fc = ForestConfig {
                rng_seed: derive_seed(seed, &[1]),
                ..cfg.forest.clone()
            };
            Detector::Forest {
                model: train_forest(&feats, &fit_labels, &fc)?,
                n_quantiles: cfg.n_quantiles,
            }
        }
        (ModelKind::Neural, MitigationKind::Adversarial | MitigationKind::AdversarialMultihead) => {
            let adv = cfg.adversary_config()?;
            let group_labels: Vec<Vec<Option<Group>>> =
                adv.attributes.iter().map(|&a| fit_w.iter().map(|w| prep.group_of(w, a)).collect()).collect();
            let model = train_debiased(&fit_x, &fit_labels, &group_labels, &cfg.neural.architecture, &train_cfg, &adv, validation)?;
            Detector::Neural { model }
        }
        (ModelKind::Neural, MitigationKind::Transfer) => {
            let pre = prep.pretrained.as_ref().ok_or_else(|| Error::Config("transfer source model missing".into()))?;
            let model = transfer_finetune(pre, &fit_x, &fit_labels, cfg.transfer.freeze_prefix, &train_cfg, validation)?;
            Detector::Neural { model }
        }
        (ModelKind::Neural, _) => Detector::Neural {
            model: train_neural(&fit_x, &fit_labels, &cfg.neural.architecture, &train_cfg, validation)?,
        },
    };

    let scores = detector.predict_scores(&test_w)?;
    let y_pred = if cfg.mitigation == MitigationKind::Threshold {
        let attr = cfg.threshold.attribute;
        let groups = prep.assignment(attr).ok_or_else(|| Error::MissingGroupLabels(attr.to_string()))?;
        let val_scores = detector.predict_scores(&val_w)?;
        let calib = prediction_set(prep, &val_w, &val_scores, &vec![0; val_w.len()], attr)?;
        let policy = fit_thresholds(&calib, groups, cfg.threshold.criterion, cfg.threshold.grid_resolution)?;
        thresholded(prep, &test_w, &scores, attr, groups, &policy)?
    } else {
        crate::models::default_labels(&scores)
    };
    let y_true: Vec<u8> = test_w.iter().map(|w| w.label).collect();
    let f1 = macro_f1(&y_pred, &y_true)?;
    let mut fairness = BTreeMap::new();
    for &attr in &cfg.attributes {
        let Some(groups) = prep.assignment(attr) else { continue };
        let preds = prediction_set(prep, &test_w, &scores, &y_pred, attr)?;
        fairness.insert(attr, compute_fairness(&preds, groups)?);
    }
    Ok(MetricSample {
        iteration,
        fold,
        f1,
        fairness,
        train_subjects,
        test_subjects,
    })
}

/// Group thresholds where the unit has a group, the default cut-off elsewhere.
fn thresholded(
    prep: &Prepared,
    windows: &[Window],
    scores: &[f64],
    attr: ProtectedAttribute,
    groups: &GroupAssignment,
    policy: &ThresholdPolicy,
) -> Result<Vec<u8>> {
    windows
        .iter()
        .zip(scores)
        .map(|(w, &s)| match prep.unit_of(w, attr) {
            Some(u) => Ok(apply_thresholds(&[s], &[u], groups, policy)?[0]),
            None => Ok(u8::from(s >= 0.5)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrip_and_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            seed = 7
            folds = 3
            [[datasets]]
            path = "data"
            [forest]
            n_trees = 10
            "#,
        )
        .unwrap();
        assert_eq!(cfg.iterations, 10);
        assert_eq!(cfg.forest.n_trees, 10);
        assert_eq!(cfg.attributes.len(), 4);
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn mitigation_requires_matching_model() {
        let mut cfg = ExperimentConfig {
            datasets: vec![DatasetSpec { path: "x".into(), format: Default::default() }],
            mitigation: MitigationKind::Adversarial,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        cfg.model = ModelKind::Neural;
        assert!(cfg.validate().is_ok());
        cfg.mitigation = MitigationKind::Transfer;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn validation_split_keeps_both_groups() {
        let subjects: Vec<String> = (0..10).map(|i| format!("S{i}")).collect();
        let m = subjects.iter().enumerate().map(|(i, s)| (s.clone(), if i < 3 { Group::G0 } else { Group::G1 })).collect();
        let g = GroupAssignment::new(ProtectedAttribute::Sex, m, None);
        for seed in 0..20 {
            let (fit, val) = split_validation(&subjects, 0.2, seed, Some(&g));
            assert_eq!(val.len(), 2);
            assert_eq!(fit.len(), 8);
            assert!(val.iter().any(|s| g.membership[s] == Group::G0));
            assert!(fit.iter().all(|s| !val.contains(s)));
        }
    }
}
