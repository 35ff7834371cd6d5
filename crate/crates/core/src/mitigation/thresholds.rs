//! Group-specific decision thresholds chosen on a calibration split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::macro_f1_from_counts;
use crate::fairness::{Group, GroupAssignment, PredictionSet};

/// Largest calibration disparity accepted as parity.
pub const FEASIBILITY_TOLERANCE: f64 = 0.02;
pub const DEFAULT_GRID_RESOLUTION: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdCriterion {
    /// `|selection rate g0 - g1|`
    DemographicParity,
    /// `|TPR g0 - g1|`
    TruePositiveParity,
    /// `max(|dTPR|, |dFPR|)`
    EqualizedOdds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    /// `[g0, g1]`
    pub thresholds: [f64; 2],
    pub criterion: ThresholdCriterion,
    pub grid_resolution: usize,
    /// Disparity of the chosen pair on the calibration split.
    pub calibration_disparity: f64,
    pub calibration_macro_f1: f64,
    /// Whether the tolerance was met; otherwise the least disparate pairs were searched.
    pub feasible: bool,
}

impl ThresholdPolicy {
    pub fn uniform(t: f64, criterion: ThresholdCriterion) -> Self {
        Self {
            thresholds: [t, t],
            criterion,
            grid_resolution: 0,
            calibration_disparity: f64::NAN,
            calibration_macro_f1: f64::NAN,
            feasible: true,
        }
    }

    pub fn threshold(&self, g: Group) -> f64 {
        self.thresholds[g.index()]
    }
}

/// Per-group tallies of `score >= t` at every grid level.
struct GroupCurve {
    n: u64,
    positives: u64,
    negatives: u64,
    selected: Vec<u64>,
    true_pos: Vec<u64>,
    false_pos: Vec<u64>,
}

fn grid_level(i: usize, resolution: usize) -> f64 {
    i as f64 / resolution as f64
}

fn curve(rows: &[(f64, u8)], resolution: usize) -> GroupCurve {
    let levels: Vec<f64> = (0..=resolution).map(|i| grid_level(i, resolution)).collect();
    let mut c = GroupCurve {
        n: rows.len() as u64,
        positives: rows.iter().filter(|r| r.1 == 1).count() as u64,
        negatives: 0,
        selected: vec![0; levels.len()],
        true_pos: vec![0; levels.len()],
        false_pos: vec![0; levels.len()],
    };
    c.negatives = c.n - c.positives;
    for &(s, y) in rows {
        // levels at or below s select this unit
        let upto = levels.partition_point(|&t| t <= s);
        for i in 0..upto {
            c.selected[i] += 1;
            if y == 1 {
                c.true_pos[i] += 1;
            } else {
                c.false_pos[i] += 1;
            }
        }
    }
    c
}

fn rate(num: u64, den: u64) -> f64 {
    num as f64 / den as f64
}

pub(crate) fn disparity(criterion: ThresholdCriterion, sel: [f64; 2], tpr: [f64; 2], fpr: [f64; 2]) -> f64 {
    match criterion {
        ThresholdCriterion::DemographicParity => (sel[0] - sel[1]).abs(),
        ThresholdCriterion::TruePositiveParity => (tpr[0] - tpr[1]).abs(),
        ThresholdCriterion::EqualizedOdds => (tpr[0] - tpr[1]).abs().max((fpr[0] - fpr[1]).abs()),
    }
}

fn split_by_group(preds: &PredictionSet, groups: &GroupAssignment) -> Result<[Vec<(f64, u8)>; 2]> {
    let mut out = [Vec::new(), Vec::new()];
    for ((u, &s), &y) in preds.unit_ids.iter().zip(&preds.scores).zip(&preds.y_true) {
        out[groups.group_of(u)?.index()].push((s, y));
    }
    Ok(out)
}

/// Exhaustive search over `{0, 1/R, ..., 1}^2`. Only the calibration set is
/// consulted; `calibration.y_pred` is ignored.
pub fn fit_thresholds(
    calibration: &PredictionSet,
    groups: &GroupAssignment,
    criterion: ThresholdCriterion,
    grid_resolution: usize,
) -> Result<ThresholdPolicy> {
    if grid_resolution == 0 {
        return Err(Error::Config("grid_resolution must be positive".into()));
    }
    let rows = split_by_group(calibration, groups)?;
    let curves = [curve(&rows[0], grid_resolution), curve(&rows[1], grid_resolution)];
    for (c, name) in curves.iter().zip(["g0", "g1"]) {
        let missing = match criterion {
            ThresholdCriterion::DemographicParity => c.n == 0,
            ThresholdCriterion::TruePositiveParity => c.positives == 0,
            ThresholdCriterion::EqualizedOdds => c.positives == 0 || c.negatives == 0,
        };
        if missing {
            return Err(Error::EmptyGroup(name));
        }
    }
    let levels = grid_resolution + 1;
    let total_pos = curves[0].positives + curves[1].positives;
    let total_neg = curves[0].negatives + curves[1].negatives;
    let mut table = Vec::with_capacity(levels * levels);
    for i0 in 0..levels {
        for i1 in 0..levels {
            let (a, b) = (&curves[0], &curves[1]);
            let sel = [rate(a.selected[i0], a.n), rate(b.selected[i1], b.n)];
            let tpr = [rate(a.true_pos[i0], a.positives), rate(b.true_pos[i1], b.positives)];
            let fpr = [rate(a.false_pos[i0], a.negatives), rate(b.false_pos[i1], b.negatives)];
            let d = disparity(criterion, sel, tpr, fpr);
            let tp = a.true_pos[i0] + b.true_pos[i1];
            let fp = a.false_pos[i0] + b.false_pos[i1];
            let f1 = macro_f1_from_counts(tp, fp, total_pos - tp, total_neg - fp);
            table.push((i0, i1, d, f1));
        }
    }
    let tolerance = FEASIBILITY_TOLERANCE + 1e-12;
    let feasible = table.iter().any(|r| r.2 <= tolerance);
    let bound = if feasible {
        tolerance
    } else {
        table.iter().map(|r| r.2).fold(f64::INFINITY, f64::min)
    };
    let mut best: Option<&(usize, usize, f64, f64)> = None;
    // row-major order visits pairs lexicographically; only strict gains replace
    for r in table.iter().filter(|r| r.2 <= bound) {
        if best.is_none_or(|b| r.3 > b.3) {
            best = Some(r);
        }
    }
    let &(i0, i1, d, f1) = best.expect("grid is non-empty");
    Ok(ThresholdPolicy {
        thresholds: [grid_level(i0, grid_resolution), grid_level(i1, grid_resolution)],
        criterion,
        grid_resolution,
        calibration_disparity: d,
        calibration_macro_f1: f1,
        feasible,
    })
}

/// `1` iff the score reaches its unit's group threshold.
pub fn apply_thresholds(scores: &[f64], unit_ids: &[String], groups: &GroupAssignment, policy: &ThresholdPolicy) -> Result<Vec<u8>> {
    if scores.len() != unit_ids.len() {
        return Err(Error::LengthMismatch(scores.len(), unit_ids.len()));
    }
    scores
        .iter()
        .zip(unit_ids)
        .map(|(&s, u)| Ok(u8::from(s >= policy.threshold(groups.group_of(u)?))))
        .collect()
}
