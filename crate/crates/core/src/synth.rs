//! Synthetic datasets with a known, injected group bias.
//!
//! Non-FOG activity is walking: a 1 Hz lateral and a 2 Hz vertical sinusoid.
//! Tremulous FOG replaces both with 5 Hz sinusoids whose amplitude is scaled
//! per sex; at a ratio of 1 the female tremor has walking amplitude, so its
//! value distribution matches walking. Akinetic FOG is near-still posture.
//! Age and disease duration are balanced within each sex and carry no signal.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::distributions::Distribution;
use statrs::distribution::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{ExperimentConfig, ModelKind};
use crate::fairness::{Group, GroupAssignment, PredictionSet, ProtectedAttribute};
use crate::ingest::{
    write_metadata_csv, write_recording_csv, BodyLocation, ChannelDescriptor, DatasetManifest, DatasetSpec, SensorRecording, Sex,
    SubjectMetadata, MANIFEST_FILE,
};
use crate::seed::rng_for;

const LATERAL_HZ: f64 = 1.0;
const VERTICAL_HZ: f64 = 2.0;
const TREMOR_HZ: f64 = 5.0;
const LATERAL_AMP: f64 = 0.15;
const VERTICAL_AMP: f64 = 0.3;
const NOISE_SD: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub dataset_id: String,
    pub n_subjects: usize,
    pub duration_s: f64,
    pub sampling_rate_hz: f64,
    /// Male over female tremor amplitude; 1 means no injected bias.
    pub bias_ratio: f64,
    /// Female tremor amplitude relative to walking.
    pub female_tremor_scale: f64,
    pub episodes_per_subject: usize,
    pub episode_seconds: f64,
    /// Share of episodes that are tremulous; the rest are akinetic.
    pub tremulous_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            dataset_id: "synthetic".into(),
            n_subjects: 24,
            duration_s: 300.0,
            sampling_rate_hz: 64.0,
            bias_ratio: 2.0,
            female_tremor_scale: 1.0,
            episodes_per_subject: 6,
            episode_seconds: 12.0,
            tremulous_fraction: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fog_s = self.episodes_per_subject as f64 * self.episode_seconds;
        if self.n_subjects < 8 || !self.n_subjects.is_multiple_of(8) {
            return Err(Error::Config("n_subjects must be a positive multiple of 8 to balance attributes".into()));
        }
        if !(self.sampling_rate_hz >= 16.0) || !(self.bias_ratio > 0.0) || !(self.female_tremor_scale > 0.0) {
            return Err(Error::Config("sampling rate must be at least 16 Hz and amplitudes positive".into()));
        }
        if !(0.0..=1.0).contains(&self.tremulous_fraction) || !(self.episode_seconds >= 1.0) {
            return Err(Error::Config("tremulous_fraction must lie in [0, 1] and episodes last at least 1 s".into()));
        }
        if !(2.0 * fog_s <= self.duration_s) {
            return Err(Error::Config("FOG episodes must cover at most half the recording".into()));
        }
        Ok(())
    }
}

/// Metadata for subject `i`: sex alternates, age group and duration group
/// alternate in blocks of two and four, so every joint cell is equally filled.
fn subject_metadata(cfg: &SynthConfig, i: usize, rng: &mut impl Rng) -> SubjectMetadata {
    let sex = if i.is_multiple_of(2) { Sex::Male } else { Sex::Female };
    let older = (i / 2) % 2 == 1;
    let longer = (i / 4) % 2 == 1;
    SubjectMetadata {
        subject_id: format!("S{:02}", i + 1),
        sex,
        age_years: if older { rng.gen_range(70.0..80.0_f64) } else { rng.gen_range(55.0..65.0_f64) }.round(),
        disease_duration_years: if longer { rng.gen_range(10.0..15.0_f64) } else { rng.gen_range(2.0..6.0_f64) }.round(),
        dataset_id: cfg.dataset_id.clone(),
    }
}

#[derive(Clone, Copy)]
enum Activity {
    Walk,
    Tremor(f64),
    Still,
}

fn recording(cfg: &SynthConfig, meta: &SubjectMetadata, subject_idx: usize) -> SensorRecording {
    let mut rng = rng_for(cfg.seed, &[0x5111, subject_idx as u64]);
    let fs = cfg.sampling_rate_hz;
    let n = (cfg.duration_s * fs).round() as usize;
    let ep_len = (cfg.episode_seconds * fs).round() as usize;
    let n_tremor = (cfg.episodes_per_subject as f64 * cfg.tremulous_fraction).round() as usize;
    let tremor_scale = match meta.sex {
        Sex::Female => cfg.female_tremor_scale,
        Sex::Male => cfg.female_tremor_scale * cfg.bias_ratio,
    };
    let mut kinds: Vec<Activity> = (0..cfg.episodes_per_subject)
        .map(|k| if k < n_tremor { Activity::Tremor(tremor_scale) } else { Activity::Still })
        .collect();
    kinds.shuffle(&mut rng);
    // one episode per equal slot, placed at a random offset with walking gaps
    let slot = n / cfg.episodes_per_subject.max(1);
    let mut activity = vec![Activity::Walk; n];
    for (k, kind) in kinds.iter().enumerate() {
        let start = k * slot + rng.gen_range(fs as usize..=(slot - ep_len - fs as usize).max(fs as usize));
        activity[start..(start + ep_len).min(n)].fill(*kind);
    }
    let phase: [f64; 3] = [rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)];
    let noise = Normal::new(0.0, NOISE_SD).expect("positive sd");
    let mut samples = Array2::zeros((n, 3));
    let mut labels = vec![0u8; n];
    for (i, act) in activity.iter().enumerate() {
        let t = i as f64 / fs;
        let (x, y, z) = match *act {
            Activity::Walk => (
                LATERAL_AMP * (2.0 * PI * LATERAL_HZ * t + phase[0]).sin(),
                0.5 * LATERAL_AMP * (2.0 * PI * VERTICAL_HZ * t + phase[1]).sin(),
                1.0 + VERTICAL_AMP * (2.0 * PI * VERTICAL_HZ * t + phase[2]).sin(),
            ),
            Activity::Tremor(s) => (
                s * LATERAL_AMP * (2.0 * PI * TREMOR_HZ * t + phase[0]).sin(),
                s * 0.5 * LATERAL_AMP * (2.0 * PI * TREMOR_HZ * t + phase[1]).sin(),
                1.0 + s * VERTICAL_AMP * (2.0 * PI * TREMOR_HZ * t + phase[2]).sin(),
            ),
            Activity::Still => (0.0, 0.0, 1.0 + 0.02 * (2.0 * PI * 0.5 * t + phase[2]).sin()),
        };
        samples[[i, 0]] = x + noise.sample(&mut rng);
        samples[[i, 1]] = y + noise.sample(&mut rng);
        samples[[i, 2]] = z + noise.sample(&mut rng);
        labels[i] = u8::from(!matches!(act, Activity::Walk));
    }
    SensorRecording {
        recording_id: meta.subject_id.clone(),
        subject_id: meta.subject_id.clone(),
        dataset_id: cfg.dataset_id.clone(),
        sampling_rate_hz: fs,
        channels: ChannelDescriptor::triaxial(BodyLocation::LowerBack).to_vec(),
        samples,
        labels,
    }
}

/// Generate recordings and metadata in memory.
pub fn generate(cfg: &SynthConfig) -> Result<(Vec<SensorRecording>, Vec<SubjectMetadata>)> {
    cfg.validate()?;
    let mut meta_rng = rng_for(cfg.seed, &[0x5110]);
    let metadata: Vec<SubjectMetadata> = (0..cfg.n_subjects).map(|i| subject_metadata(cfg, i, &mut meta_rng)).collect();
    let recordings = metadata.iter().enumerate().map(|(i, m)| recording(cfg, m, i)).collect();
    Ok((recordings, metadata))
}

/// Relative path of the experiment config written next to a synthetic dataset.
pub const CONFIG_FILE: &str = "fogfair.toml";

/// Write a dataset directory (manifest, recordings, metadata) plus a ready
/// experiment config; returns the config path.
pub fn write_fixture(dir: &Path, cfg: &SynthConfig) -> Result<PathBuf> {
    let (recordings, metadata) = generate(cfg)?;
    let manifest = DatasetManifest {
        dataset_id: cfg.dataset_id.clone(),
        sampling_rate_hz: cfg.sampling_rate_hz,
        sensor_locations: vec![BodyLocation::LowerBack],
        recordings: vec!["recordings/*.csv".into()],
        metadata: "metadata.csv".into(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    crate::ingest::write_file(&dir.join(MANIFEST_FILE), text.as_bytes())?;
    for r in &recordings {
        write_recording_csv(&dir.join("recordings").join(format!("{}.csv", r.recording_id)), r)?;
    }
    write_metadata_csv(&dir.join("metadata.csv"), &metadata)?;
    let exp = ExperimentConfig {
        datasets: vec![DatasetSpec {
            path: ".".into(),
            format: Default::default(),
        }],
        model: ModelKind::Forest,
        seed: cfg.seed,
        iterations: 10,
        folds: 3,
        ..Default::default()
    };
    let path = dir.join(CONFIG_FILE);
    crate::ingest::write_file(&path, exp.to_toml()?.as_bytes())?;
    Ok(path)
}

/// Scored windows for two groups of units whose score distributions differ by
/// `offset`; labels are independent of group.
pub fn biased_scores(units_per_group: usize, windows_per_unit: usize, offset: f64, seed: u64) -> (PredictionSet, GroupAssignment) {
    let mut rng = rng_for(seed, &[0x5C0]);
    let noise = Normal::new(0.0, 0.15).expect("positive sd");
    let mut membership = std::collections::BTreeMap::new();
    let (mut ids, mut y_true, mut scores) = (Vec::new(), Vec::new(), Vec::new());
    for g in [Group::G0, Group::G1] {
        for u in 0..units_per_group {
            let id = format!("{}{u:03}", if g == Group::G0 { "a" } else { "b" });
            membership.insert(id.clone(), g);
            for _ in 0..windows_per_unit {
                let y = u8::from(rng.gen::<f64>() < 0.3);
                let base = if y == 1 { 0.6 } else { 0.35 };
                let shift = if g == Group::G1 { offset } else { 0.0 };
                ids.push(id.clone());
                y_true.push(y);
                scores.push((base + shift + noise.sample(&mut rng)).clamp(0.0, 1.0));
            }
        }
    }
    let y_pred = crate::models::default_labels(&scores);
    let preds = PredictionSet::new(ids, y_pred, y_true, scores).expect("equal lengths by construction");
    (preds, GroupAssignment::new(ProtectedAttribute::Sex, membership, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phenotype::{classify_episode, PhenotypeLabel};
    use crate::windowing::extract_episodes;

    #[test]
    fn balanced_cells_and_prevalence() {
        let cfg = SynthConfig::default();
        let (recs, meta) = generate(&cfg).unwrap();
        assert_eq!(recs.len(), 24);
        let mut cells = std::collections::BTreeMap::new();
        for m in &meta {
            *cells.entry((m.sex, m.age_years > 67.0, m.disease_duration_years > 8.0)).or_insert(0) += 1;
        }
        assert_eq!(cells.len(), 8);
        assert!(cells.values().all(|&c| c == 3));
        for r in &recs {
            let fog = r.labels.iter().filter(|&&l| l == 1).count() as f64 / r.len() as f64;
            assert!((fog - 0.24).abs() < 0.01, "{fog}");
        }
    }

    #[test]
    fn episodes_have_expected_phenotypes() {
        let cfg = SynthConfig::default();
        let (recs, _) = generate(&cfg).unwrap();
        for r in recs.iter().take(4) {
            let eps = extract_episodes(r, 0.5);
            assert_eq!(eps.len(), 6);
            let tremulous = eps
                .iter()
                .filter(|e| classify_episode(e, r.sampling_rate_hz).unwrap() == PhenotypeLabel::Tremulous)
                .count();
            assert_eq!(tremulous, 3);
        }
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig::default();
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
    }

    #[test]
    fn fixture_loads() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            n_subjects: 8,
            duration_s: 60.0,
            episode_seconds: 5.0,
            ..Default::default()
        };
        let path = write_fixture(tmp.path(), &cfg).unwrap();
        let exp = ExperimentConfig::from_file(&path).unwrap();
        let (recs, meta) = exp.datasets[0].load().unwrap();
        assert_eq!(recs.len(), 8);
        assert_eq!(meta.len(), 8);
    }
}
