//! Binary protected groups and group-fairness metrics.
//!
//! Every ratio is formed from integer counts so the result is the correctly
//! rounded value of the exact rational: `r0 / r1 = (a * d) / (b * c)` with a
//! single division.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Sex, SubjectMetadata};
use crate::phenotype::{classify_episode, PhenotypeLabel};
use crate::windowing::Episode;

/// Four-fifths rule cut-off.
pub const FOUR_FIFTHS: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtectedAttribute {
    Sex,
    Age,
    DiseaseDuration,
    FogPhenotype,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeLevel {
    Subject,
    Episode,
}

impl ProtectedAttribute {
    pub const ALL: [ProtectedAttribute; 4] = [Self::Sex, Self::Age, Self::DiseaseDuration, Self::FogPhenotype];
    pub const SUBJECT_LEVEL: [ProtectedAttribute; 3] = [Self::Sex, Self::Age, Self::DiseaseDuration];

    pub fn level(self) -> AttributeLevel {
        match self {
            Self::FogPhenotype => AttributeLevel::Episode,
            _ => AttributeLevel::Subject,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sex => "sex",
            Self::Age => "age",
            Self::DiseaseDuration => "disease_duration",
            Self::FogPhenotype => "fog_phenotype",
        }
    }

    /// Whether false-positive based metrics exist (phenotype is defined only
    /// inside true FOG).
    pub fn supports_false_positive_metrics(self) -> bool {
        self != Self::FogPhenotype
    }
}

impl fmt::Display for ProtectedAttribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ProtectedAttribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s.replace('-', "_"))
            .ok_or_else(|| Error::Config(format!("unknown protected attribute `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    G0,
    G1,
}

impl Group {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Group::G0 => "g0",
            Group::G1 => "g1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateFlag {
    EmptyGroup,
    ZeroRateBothGroups,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub attribute: ProtectedAttribute,
    pub membership: BTreeMap<String, Group>,
    /// Median used for continuous attributes.
    pub dichotomization_threshold: Option<f64>,
    /// Groups without members.
    pub empty_groups: Vec<Group>,
}

impl GroupAssignment {
    pub fn new(attribute: ProtectedAttribute, membership: BTreeMap<String, Group>, threshold: Option<f64>) -> Self {
        let mut out = Self {
            attribute,
            membership,
            dichotomization_threshold: threshold,
            empty_groups: Vec::new(),
        };
        let (n0, n1) = out.sizes();
        out.empty_groups = [(Group::G0, n0), (Group::G1, n1)].into_iter().filter(|(_, n)| *n == 0).map(|(g, _)| g).collect();
        out
    }

    pub fn sizes(&self) -> (usize, usize) {
        let n1 = self.membership.values().filter(|&&g| g == Group::G1).count();
        (self.membership.len() - n1, n1)
    }

    pub fn group_of(&self, unit: &str) -> Result<Group> {
        self.membership.get(unit).copied().ok_or_else(|| Error::UnknownGroupMember(unit.to_string()))
    }

    pub fn members(&self, g: Group) -> impl Iterator<Item = &str> {
        self.membership.iter().filter(move |(_, &m)| m == g).map(|(k, _)| k.as_str())
    }
}

/// Predictions keyed by the unit whose group applies (subject id or episode id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub unit_ids: Vec<String>,
    pub y_pred: Vec<u8>,
    pub y_true: Vec<u8>,
    pub scores: Vec<f64>,
}

impl PredictionSet {
    pub fn new(unit_ids: Vec<String>, y_pred: Vec<u8>, y_true: Vec<u8>, scores: Vec<f64>) -> Result<Self> {
        let n = unit_ids.len();
        for len in [y_pred.len(), y_true.len(), scores.len()] {
            if len != n {
                return Err(Error::LengthMismatch(n, len));
            }
        }
        Ok(Self { unit_ids, y_pred, y_true, scores })
    }

    pub fn len(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit_ids.is_empty()
    }
}

/// Per-group confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    n: u64,
    pred_pos: u64,
    actual_pos: u64,
    true_pos: u64,
    actual_neg: u64,
    false_pos: u64,
}

fn group_counts(preds: &PredictionSet, groups: &GroupAssignment) -> Result<[Counts; 2]> {
    let mut c = [Counts::default(); 2];
    for ((unit, &p), &t) in preds.unit_ids.iter().zip(&preds.y_pred).zip(&preds.y_true) {
        let g = &mut c[groups.group_of(unit)?.index()];
        let (p, t) = (u64::from(p == 1), u64::from(t == 1));
        g.n += 1;
        g.pred_pos += p;
        g.actual_pos += t;
        g.true_pos += p * t;
        g.actual_neg += 1 - t;
        g.false_pos += p * (1 - t);
    }
    Ok(c)
}

/// One metric value with its degeneracy flags. `value` is `None` only when
/// a group has no eligible units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: Option<f64>,
    pub flags: BTreeSet<DegenerateFlag>,
}

impl MetricValue {
    fn plain(v: f64) -> Self {
        Self {
            value: Some(v),
            flags: BTreeSet::new(),
        }
    }

    fn flagged(value: Option<f64>, flag: DegenerateFlag) -> Self {
        Self {
            value,
            flags: BTreeSet::from([flag]),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        !self.flags.is_empty() || self.value.is_none()
    }
}

/// `min(a/b, c/d) / max(a/b, c/d)` for a pair of count ratios.
fn ratio_of_rates(a: u64, b: u64, c: u64, d: u64) -> MetricValue {
    if b == 0 || d == 0 {
        return MetricValue::flagged(None, DegenerateFlag::EmptyGroup);
    }
    match (a == 0, c == 0) {
        (true, true) => MetricValue::flagged(Some(1.0), DegenerateFlag::ZeroRateBothGroups),
        (true, false) | (false, true) => MetricValue::plain(0.0),
        _ => {
            let (ad, cb) = (a * d, c * b);
            let v = if ad <= cb { ad as f64 / cb as f64 } else { cb as f64 / ad as f64 };
            MetricValue::plain(v)
        }
    }
}

/// `|a/b - c/d|`.
fn abs_rate_difference(a: u64, b: u64, c: u64, d: u64) -> MetricValue {
    if b == 0 || d == 0 {
        return MetricValue::flagged(None, DegenerateFlag::EmptyGroup);
    }
    MetricValue::plain((a * d).abs_diff(c * b) as f64 / (b * d) as f64)
}

fn rate(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn require_nonempty(c: &[Counts; 2]) -> Result<()> {
    if c[0].n == 0 {
        return Err(Error::EmptyGroup("g0"));
    }
    if c[1].n == 0 {
        return Err(Error::EmptyGroup("g1"));
    }
    Ok(())
}

pub fn demographic_parity_ratio(preds: &PredictionSet, groups: &GroupAssignment) -> Result<MetricValue> {
    let c = group_counts(preds, groups)?;
    require_nonempty(&c)?;
    Ok(ratio_of_rates(c[0].pred_pos, c[0].n, c[1].pred_pos, c[1].n))
}

fn require_false_positive_metrics(groups: &GroupAssignment, metric: &'static str) -> Result<()> {
    if groups.attribute.supports_false_positive_metrics() {
        Ok(())
    } else {
        Err(Error::MetricUndefined {
            metric,
            attribute: groups.attribute.as_str(),
        })
    }
}

/// True-positive and false-positive parity ratios.
pub fn parity_ratios(preds: &PredictionSet, groups: &GroupAssignment) -> Result<(MetricValue, MetricValue)> {
    require_false_positive_metrics(groups, "fprr")?;
    let c = group_counts(preds, groups)?;
    Ok(parity_from_counts(&c))
}

fn parity_from_counts(c: &[Counts; 2]) -> (MetricValue, MetricValue) {
    (
        ratio_of_rates(c[0].true_pos, c[0].actual_pos, c[1].true_pos, c[1].actual_pos),
        ratio_of_rates(c[0].false_pos, c[0].actual_neg, c[1].false_pos, c[1].actual_neg),
    )
}

/// Smallest non-degenerate component; flags of both components propagate.
pub fn combine_equalized_odds(tppr: &MetricValue, fprr: &MetricValue) -> MetricValue {
    let clean: Vec<f64> = [tppr, fprr].iter().filter(|m| !m.is_degenerate()).filter_map(|m| m.value).collect();
    let value = if clean.is_empty() {
        [tppr.value, fprr.value].into_iter().flatten().reduce(f64::min)
    } else {
        clean.into_iter().reduce(f64::min)
    };
    MetricValue {
        value,
        flags: tppr.flags.union(&fprr.flags).copied().collect(),
    }
}

pub fn equalized_odds_ratio(preds: &PredictionSet, groups: &GroupAssignment) -> Result<MetricValue> {
    require_false_positive_metrics(groups, "eor")?;
    let (tppr, fprr) = parity_ratios(preds, groups)?;
    Ok(combine_equalized_odds(&tppr, &fprr))
}

pub fn equality_of_opportunity_difference(preds: &PredictionSet, groups: &GroupAssignment) -> Result<f64> {
    let c = group_counts(preds, groups)?;
    if c[0].actual_pos == 0 {
        return Err(Error::EmptyGroup("g0"));
    }
    if c[1].actual_pos == 0 {
        return Err(Error::EmptyGroup("g1"));
    }
    Ok(abs_rate_difference(c[0].true_pos, c[0].actual_pos, c[1].true_pos, c[1].actual_pos)
        .value
        .expect("both groups have positives"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Fair,
    Biased,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Fair => "Fair",
            Verdict::Biased => "Biased",
        })
    }
}

pub fn four_fifths_verdict(metric_value: f64) -> Verdict {
    if metric_value >= FOUR_FIFTHS {
        Verdict::Fair
    } else {
        Verdict::Biased
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Dpr,
    Tppr,
    Fprr,
    Eor,
    Eod,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Dpr, Metric::Tppr, Metric::Fprr, Metric::Eor, Metric::Eod];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Dpr => "dpr",
            Metric::Tppr => "tppr",
            Metric::Fprr => "fprr",
            Metric::Eor => "eor",
            Metric::Eod => "eod",
        }
    }

    /// Ratio metrics are judged by the four-fifths rule; EOD is a difference.
    pub fn is_ratio(self) -> bool {
        self != Metric::Eod
    }
}

/// Conditional rates per group, `[g0, g1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub selection: [Option<f64>; 2],
    pub tpr: [Option<f64>; 2],
    pub fpr: [Option<f64>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessResult {
    pub attribute: ProtectedAttribute,
    pub dpr: MetricValue,
    /// Absent for attributes without false-positive metrics.
    pub tppr: Option<MetricValue>,
    pub fprr: Option<MetricValue>,
    pub eor: Option<MetricValue>,
    pub eod: MetricValue,
    pub group_rates: GroupRates,
}

impl FairnessResult {
    pub fn metric(&self, m: Metric) -> Option<&MetricValue> {
        match m {
            Metric::Dpr => Some(&self.dpr),
            Metric::Tppr => self.tppr.as_ref(),
            Metric::Fprr => self.fprr.as_ref(),
            Metric::Eor => self.eor.as_ref(),
            Metric::Eod => Some(&self.eod),
        }
    }

    /// Value usable for aggregation; `None` when excluded as degenerate.
    /// EOR stays usable while at least one component is clean.
    pub fn usable(&self, m: Metric) -> Option<f64> {
        let mv = self.metric(m)?;
        if m == Metric::Eor {
            let clean = [&self.tppr, &self.fprr].iter().any(|c| c.as_ref().is_some_and(|c| !c.is_degenerate()));
            return if clean { mv.value } else { None };
        }
        if mv.is_degenerate() {
            None
        } else {
            mv.value
        }
    }

    pub fn flags(&self) -> BTreeSet<DegenerateFlag> {
        Metric::ALL.iter().filter_map(|&m| self.metric(m)).flat_map(|v| v.flags.iter().copied()).collect()
    }
}

/// All metrics for one attribute. Missing groups are flagged, never an error;
/// an unassigned unit is.
pub fn compute_fairness(preds: &PredictionSet, groups: &GroupAssignment) -> Result<FairnessResult> {
    let c = group_counts(preds, groups)?;
    let dpr = ratio_of_rates(c[0].pred_pos, c[0].n, c[1].pred_pos, c[1].n);
    let eod = abs_rate_difference(c[0].true_pos, c[0].actual_pos, c[1].true_pos, c[1].actual_pos);
    let (tppr, fprr, eor) = if groups.attribute.supports_false_positive_metrics() {
        let (t, f) = parity_from_counts(&c);
        let e = combine_equalized_odds(&t, &f);
        (Some(t), Some(f), Some(e))
    } else {
        (None, None, None)
    };
    let fpr = if groups.attribute.supports_false_positive_metrics() {
        [rate(c[0].false_pos, c[0].actual_neg), rate(c[1].false_pos, c[1].actual_neg)]
    } else {
        [None, None]
    };
    Ok(FairnessResult {
        attribute: groups.attribute,
        dpr,
        tppr,
        fprr,
        eor,
        eod,
        group_rates: GroupRates {
            selection: [rate(c[0].pred_pos, c[0].n), rate(c[1].pred_pos, c[1].n)],
            tpr: [rate(c[0].true_pos, c[0].actual_pos), rate(c[1].true_pos, c[1].actual_pos)],
            fpr,
        },
    })
}

/// Median with the midpoint rule for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Split one dataset's subjects into two groups. Continuous attributes use
/// `value <= median` for g0.
pub fn dichotomize(metadata: &[SubjectMetadata], attribute: ProtectedAttribute) -> Result<GroupAssignment> {
    if let Some(first) = metadata.first() {
        if metadata.iter().any(|m| m.dataset_id != first.dataset_id) {
            return Err(Error::MixedDatasets);
        }
    }
    let value = |m: &SubjectMetadata| match attribute {
        ProtectedAttribute::Age => m.age_years,
        _ => m.disease_duration_years,
    };
    match attribute {
        ProtectedAttribute::FogPhenotype => Err(Error::Config(
            "fog_phenotype is an episode-level attribute; use assign_phenotype_groups".into(),
        )),
        ProtectedAttribute::Sex => {
            let membership = metadata
                .iter()
                .map(|m| (m.subject_id.clone(), if m.sex == Sex::Female { Group::G0 } else { Group::G1 }))
                .collect();
            Ok(GroupAssignment::new(attribute, membership, None))
        }
        ProtectedAttribute::Age | ProtectedAttribute::DiseaseDuration => {
            let values: Vec<f64> = metadata.iter().map(value).collect();
            let Some(med) = median(&values) else {
                return Err(Error::AllIdenticalValues(attribute.as_str().into()));
            };
            if values.iter().all(|&v| v == values[0]) {
                return Err(Error::AllIdenticalValues(attribute.as_str().into()));
            }
            let membership = metadata
                .iter()
                .map(|m| (m.subject_id.clone(), if value(m) <= med { Group::G0 } else { Group::G1 }))
                .collect();
            Ok(GroupAssignment::new(attribute, membership, Some(med)))
        }
    }
}

/// Akinetic episodes form g0, tremulous ones g1.
pub fn assign_phenotype_groups(episodes: &[Episode], sampling_rate_hz: f64) -> Result<GroupAssignment> {
    if episodes.is_empty() {
        return Err(Error::NoEpisodes);
    }
    let membership = episodes
        .iter()
        .map(|ep| {
            let g = match classify_episode(ep, sampling_rate_hz)? {
                PhenotypeLabel::Akinetic => Group::G0,
                PhenotypeLabel::Tremulous => Group::G1,
            };
            Ok((ep.id(), g))
        })
        .collect::<Result<_>>()?;
    Ok(GroupAssignment::new(ProtectedAttribute::FogPhenotype, membership, None))
}

/// Published per-dataset medians of the continuous subject attributes.
pub fn reference_median(dataset_id: &str, attribute: ProtectedAttribute) -> Option<f64> {
    let (age, duration) = match dataset_id.to_ascii_lowercase().as_str() {
        "daphnet" => (66.0, 12.5),
        "desouza" | "de_souza" => (69.0, 7.0),
        "tdcs" => (69.0, 9.0),
        "defog" => (69.0, 13.0),
        _ => return None,
    };
    match attribute {
        ProtectedAttribute::Age => Some(age),
        ProtectedAttribute::DiseaseDuration => Some(duration),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subjects(ages: &[f64]) -> Vec<SubjectMetadata> {
        ages.iter()
            .enumerate()
            .map(|(i, &a)| SubjectMetadata {
                subject_id: format!("S{i:02}"),
                sex: if i % 2 == 0 { Sex::Female } else { Sex::Male },
                age_years: a,
                disease_duration_years: 12.5,
                dataset_id: "toy".into(),
            })
            .collect()
    }

    fn two_groups(n0: usize, n1: usize) -> GroupAssignment {
        let m = (0..n0)
            .map(|i| (format!("a{i}"), Group::G0))
            .chain((0..n1).map(|i| (format!("b{i}"), Group::G1)))
            .collect();
        GroupAssignment::new(ProtectedAttribute::Sex, m, None)
    }

    /// `rows`: (group-0?, pred, true)
    fn preds(rows: &[(bool, u8, u8)]) -> PredictionSet {
        let ids = rows.iter().enumerate().map(|(i, r)| if r.0 { format!("a{}", i % 3) } else { format!("b{}", i % 3) }).collect();
        PredictionSet::new(ids, rows.iter().map(|r| r.1).collect(), rows.iter().map(|r| r.2).collect(), vec![0.5; rows.len()]).unwrap()
    }

    #[test]
    fn dichotomize_by_median() {
        let g = dichotomize(&subjects(&[60.0, 66.0, 70.0]), ProtectedAttribute::Age).unwrap();
        assert_eq!(g.dichotomization_threshold, Some(66.0));
        assert_eq!(g.sizes(), (2, 1));
        assert_eq!(g.membership["S01"], Group::G0);
        let even = dichotomize(&subjects(&[60.0, 64.0, 68.0, 70.0]), ProtectedAttribute::Age).unwrap();
        assert_eq!(even.dichotomization_threshold, Some(66.0));
        assert!(matches!(
            dichotomize(&subjects(&[1.0, 2.0]), ProtectedAttribute::DiseaseDuration),
            Err(Error::AllIdenticalValues(_))
        ));
        let sex = dichotomize(&subjects(&[1.0, 2.0, 3.0]), ProtectedAttribute::Sex).unwrap();
        assert_eq!(sex.sizes(), (2, 1));
    }

    #[test]
    fn daphnet_reference_medians() {
        assert_eq!(reference_median("daphnet", ProtectedAttribute::Age), Some(66.0));
        assert_eq!(reference_median("defog", ProtectedAttribute::DiseaseDuration), Some(13.0));
        let ages = [56.0, 59.0, 63.0, 66.0, 66.0, 66.0, 67.0, 71.0, 72.0, 73.0];
        let g = dichotomize(&subjects(&ages), ProtectedAttribute::Age).unwrap();
        assert_eq!(g.dichotomization_threshold, reference_median("daphnet", ProtectedAttribute::Age));
    }

    #[test]
    fn dpr_rates_point_three_and_point_six() {
        // 10 units per group; 3 vs 6 positive predictions
        let mut rows = Vec::new();
        for i in 0..10 {
            rows.push((true, u8::from(i < 3), 0));
            rows.push((false, u8::from(i < 6), 0));
        }
        let g = two_groups(3, 3);
        let d = demographic_parity_ratio(&preds(&rows), &g).unwrap();
        assert_eq!(d.value, Some(0.5));
        assert!(d.flags.is_empty());
    }

    #[test]
    fn dpr_degenerate_rules() {
        let g = two_groups(3, 3);
        let zero = preds(&[(true, 0, 0), (false, 0, 1)]);
        let d = demographic_parity_ratio(&zero, &g).unwrap();
        assert_eq!(d.value, Some(1.0));
        assert!(d.flags.contains(&DegenerateFlag::ZeroRateBothGroups));
        let one_sided = preds(&[(true, 0, 0), (false, 1, 1)]);
        assert_eq!(demographic_parity_ratio(&one_sided, &g).unwrap().value, Some(0.0));
        let same = preds(&[(true, 1, 0), (false, 1, 1)]);
        assert_eq!(demographic_parity_ratio(&same, &g).unwrap().value, Some(1.0));
        let only_g0 = preds(&[(true, 1, 0)]);
        assert!(matches!(demographic_parity_ratio(&only_g0, &g), Err(Error::EmptyGroup("g1"))));
    }

    #[test]
    fn parity_and_eod() {
        // TPR 0.8 (4/5) in g0, 1.0 in g1; FPR 1/4 vs 1/2
        let mut rows = Vec::new();
        rows.extend((0..5).map(|i| (true, u8::from(i < 4), 1)));
        rows.extend((0..5).map(|_| (false, 1, 1)));
        rows.extend((0..4).map(|i| (true, u8::from(i < 1), 0)));
        rows.extend((0..4).map(|i| (false, u8::from(i < 2), 0)));
        let p = preds(&rows);
        let g = two_groups(3, 3);
        let (t, f) = parity_ratios(&p, &g).unwrap();
        assert_eq!(t.value, Some(0.8));
        assert_eq!(f.value, Some(0.5));
        assert_eq!(equalized_odds_ratio(&p, &g).unwrap().value, Some(0.5));
        let eod = equality_of_opportunity_difference(&p, &g).unwrap();
        assert!((eod - 0.2).abs() < 1e-15);
    }

    #[test]
    fn eod_point_three_and_symmetry() {
        let mut rows = Vec::new();
        rows.extend((0..10).map(|i| (true, u8::from(i < 9), 1)));
        rows.extend((0..10).map(|i| (false, u8::from(i < 6), 1)));
        let p = preds(&rows);
        let g = two_groups(3, 3);
        let eod = equality_of_opportunity_difference(&p, &g).unwrap();
        assert!((eod - 0.3).abs() < 1e-15);
        let swapped = GroupAssignment::new(
            ProtectedAttribute::Sex,
            g.membership.iter().map(|(k, v)| (k.clone(), if *v == Group::G0 { Group::G1 } else { Group::G0 })).collect(),
            None,
        );
        assert_eq!(equality_of_opportunity_difference(&p, &swapped).unwrap(), eod);
        assert_eq!(compute_fairness(&p, &swapped).unwrap().dpr, compute_fairness(&p, &g).unwrap().dpr);
    }

    #[test]
    fn eor_excludes_flagged_component() {
        // g1 has no true negatives: FPRR flagged
        let mut rows = Vec::new();
        rows.extend((0..4).map(|i| (true, u8::from(i < 2), 1)));
        rows.extend((0..4).map(|_| (false, 1, 1)));
        rows.extend((0..2).map(|_| (true, 0, 0)));
        let p = preds(&rows);
        let g = two_groups(3, 3);
        let (t, f) = parity_ratios(&p, &g).unwrap();
        assert_eq!(t.value, Some(0.5));
        assert!(f.flags.contains(&DegenerateFlag::EmptyGroup));
        let e = equalized_odds_ratio(&p, &g).unwrap();
        assert_eq!(e.value, Some(0.5));
        assert!(e.flags.contains(&DegenerateFlag::EmptyGroup));
        let r = compute_fairness(&p, &g).unwrap();
        assert_eq!(r.usable(Metric::Eor), Some(0.5));
        assert_eq!(r.usable(Metric::Fprr), None);
    }

    #[test]
    fn phenotype_has_no_false_positive_metrics() {
        let m = [("e0".to_string(), Group::G0), ("e1".to_string(), Group::G1)].into_iter().collect();
        let g = GroupAssignment::new(ProtectedAttribute::FogPhenotype, m, None);
        let p = PredictionSet::new(vec!["e0".into(), "e1".into()], vec![1, 0], vec![1, 1], vec![0.9, 0.1]).unwrap();
        assert!(matches!(equalized_odds_ratio(&p, &g), Err(Error::MetricUndefined { .. })));
        let r = compute_fairness(&p, &g).unwrap();
        assert!(r.eor.is_none() && r.fprr.is_none());
        assert_eq!(r.dpr.value, Some(0.0));
        assert_eq!(r.eod.value, Some(1.0));
    }

    #[test]
    fn unknown_unit() {
        let g = two_groups(1, 1);
        let p = PredictionSet::new(vec!["zz".into()], vec![1], vec![1], vec![1.0]).unwrap();
        assert!(matches!(compute_fairness(&p, &g), Err(Error::UnknownGroupMember(_))));
    }

    #[test]
    fn verdict_boundary() {
        assert_eq!(four_fifths_verdict(0.85), Verdict::Fair);
        assert_eq!(four_fifths_verdict(0.79), Verdict::Biased);
        assert_eq!(four_fifths_verdict(0.8), Verdict::Fair);
    }

    #[test]
    fn phenotype_groups_from_episodes() {
        use crate::phenotype::tests::episode_from;
        let fs = 64.0;
        let tone = |f: f64| -> Vec<f64> { (0..640).map(|i| (std::f64::consts::TAU * f * i as f64 / fs).sin()).collect() };
        let mut eps: Vec<Episode> = [5.0, 6.0, 4.0, 1.0].iter().map(|&f| episode_from(&tone(f))).collect();
        for (i, e) in eps.iter_mut().enumerate() {
            e.start_index = i * 1000;
        }
        let g = assign_phenotype_groups(&eps, fs).unwrap();
        assert_eq!(g.sizes(), (1, 3));
        let all_trem = assign_phenotype_groups(&eps[..3], fs).unwrap();
        assert_eq!(all_trem.empty_groups, vec![Group::G0]);
        assert!(matches!(assign_phenotype_groups(&[], fs), Err(Error::NoEpisodes)));
    }
}
