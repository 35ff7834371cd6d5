//! Fairness reports: construction from experiment runs, mitigation
//! comparisons, and text, JSON and CSV rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::{aggregate, wilcoxon_one_sided, DatasetRun, ExperimentConfig, MetricSample, ModelKind, Summary, WilcoxonResult};
use crate::fairness::{four_fifths_verdict, Metric, ProtectedAttribute, Verdict};
use crate::mitigation::MitigationKind;

/// Bumped on any breaking change to the JSON layout.
pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Self::Text),
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            _ => Err(Error::Config(format!("unknown report format `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the effective configuration in TOML form.
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
}

impl Provenance {
    pub fn for_config(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            config_hash: hex(&Sha256::digest(cfg.to_toml()?.as_bytes())),
            seed: cfg.seed,
            tool_version: TOOL_VERSION.to_string(),
        })
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub summary: Summary,
    /// Four-fifths verdict on the mean; ratio metrics only.
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeReport {
    pub attribute: ProtectedAttribute,
    pub dichotomization_threshold: Option<f64>,
    pub group_sizes: [usize; 2],
    pub metrics: BTreeMap<Metric, MetricCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub dataset_id: String,
    pub model: ModelKind,
    pub mitigation: MitigationKind,
    pub f1: Summary,
    pub attributes: Vec<AttributeReport>,
    pub samples: Vec<MetricSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    /// Pair per (iteration, fold); requires identical seeds and fold plans.
    Fold,
    /// Pair per-dataset averages.
    Dataset,
}

impl FromStr for Pairing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fold" => Ok(Self::Fold),
            "dataset" => Ok(Self::Dataset),
            _ => Err(Error::Config(format!("unknown pairing `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    /// `None` for F1.
    pub attribute: Option<ProtectedAttribute>,
    /// `None` for F1.
    pub metric: Option<Metric>,
    pub mean_before: f64,
    pub mean_after: f64,
    /// `mean_after - mean_before`.
    pub delta: f64,
    /// Tested on values oriented so that larger is better (EOD negated).
    pub test: WilcoxonResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub model: ModelKind,
    pub baseline: MitigationKind,
    pub mitigation: MitigationKind,
    pub pairing: Pairing,
    /// Datasets contributing pairs.
    pub datasets: Vec<String>,
    pub deltas: Vec<MetricDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub entries: Vec<ReportEntry>,
    pub comparisons: Vec<Comparison>,
}

impl FairnessReport {
    pub fn from_runs(cfg: &ExperimentConfig, runs: Vec<DatasetRun>) -> Result<Self> {
        let entries = runs.into_iter().map(entry_from_run).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            provenance: Provenance::for_config(cfg)?,
            entries,
            comparisons: Vec::new(),
        })
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let r: Self = serde_json::from_slice(bytes)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "report schema version {} is not supported (expected {SCHEMA_VERSION})",
                r.schema_version
            )));
        }
        Ok(r)
    }
}

fn entry_from_run(run: DatasetRun) -> Result<ReportEntry> {
    let agg = aggregate(&run.samples)?;
    let attributes = agg
        .fairness
        .into_iter()
        .map(|(attribute, metrics)| AttributeReport {
            attribute,
            dichotomization_threshold: run.dichotomization.get(&attribute).copied(),
            group_sizes: run.group_sizes.get(&attribute).copied().unwrap_or_default(),
            metrics: metrics
                .into_iter()
                .map(|(m, summary)| {
                    let verdict = summary.mean.filter(|_| m.is_ratio()).map(four_fifths_verdict);
                    (m, MetricCell { summary, verdict })
                })
                .collect(),
        })
        .collect();
    Ok(ReportEntry {
        dataset_id: run.dataset_id,
        model: run.model,
        mitigation: run.mitigation,
        f1: agg.f1,
        attributes,
        samples: run.samples,
    })
}

/// Value of one metric in one sample; degenerate values are `None`.
type Extractor = Box<dyn Fn(&MetricSample) -> Option<f64>>;

fn metric_series(entries: &[&ReportEntry]) -> Vec<(Option<ProtectedAttribute>, Option<Metric>, Extractor)> {
    let mut out: Vec<(Option<ProtectedAttribute>, Option<Metric>, Extractor)> = vec![(None, None, Box::new(|s: &MetricSample| Some(s.f1)))];
    let mut keys: Vec<(ProtectedAttribute, Metric)> = entries
        .iter()
        .flat_map(|e| e.attributes.iter().flat_map(|a| a.metrics.keys().map(move |&m| (a.attribute, m))))
        .collect();
    keys.sort();
    keys.dedup();
    for (a, m) in keys {
        out.push((Some(a), Some(m), Box::new(move |s: &MetricSample| s.fairness.get(&a).and_then(|r| r.usable(m)))));
    }
    out
}

fn oriented(metric: Option<Metric>, v: f64) -> f64 {
    if metric == Some(Metric::Eod) {
        -v
    } else {
        v
    }
}

fn mean(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.iter().sum::<f64>() / s.len() as f64
}

/// Paired one-sided tests of `after` against `before`, per model present in both.
pub fn compare(before: &FairnessReport, after: &FairnessReport, pairing: Pairing) -> Result<Vec<Comparison>> {
    let mut out = Vec::new();
    let models: std::collections::BTreeSet<&str> = before.entries.iter().map(|e| e.model.as_str()).collect();
    for model_name in models {
        let b_entries: Vec<&ReportEntry> = before.entries.iter().filter(|e| e.model.as_str() == model_name).collect();
        let pairs: Vec<(&ReportEntry, &ReportEntry)> = b_entries
            .iter()
            .filter_map(|b| after.entries.iter().find(|a| a.model == b.model && a.dataset_id == b.dataset_id).map(|a| (*b, a)))
            .collect();
        if pairs.is_empty() {
            continue;
        }
        let all: Vec<&ReportEntry> = pairs.iter().flat_map(|(b, a)| [*b, *a]).collect();
        let mut deltas = Vec::new();
        for (attribute, metric, get) in metric_series(&all) {
            let (mut xb, mut xa) = (Vec::new(), Vec::new());
            for (b, a) in &pairs {
                match pairing {
                    Pairing::Fold => {
                        for sb in &b.samples {
                            let Some(sa) = a.samples.iter().find(|s| s.iteration == sb.iteration && s.fold == sb.fold) else {
                                continue;
                            };
                            if let (Some(vb), Some(va)) = (get(sb), get(sa)) {
                                xb.push(vb);
                                xa.push(va);
                            }
                        }
                    }
                    Pairing::Dataset => {
                        let vb: Vec<f64> = b.samples.iter().filter_map(&get).collect();
                        let va: Vec<f64> = a.samples.iter().filter_map(&get).collect();
                        if !vb.is_empty() && !va.is_empty() {
                            xb.push(mean(&vb));
                            xa.push(mean(&va));
                        }
                    }
                }
            }
            if xb.is_empty() {
                continue;
            }
            let ob: Vec<f64> = xb.iter().map(|&v| oriented(metric, v)).collect();
            let oa: Vec<f64> = xa.iter().map(|&v| oriented(metric, v)).collect();
            let (mean_before, mean_after) = (mean(&xb), mean(&xa));
            deltas.push(MetricDelta {
                attribute,
                metric,
                mean_before,
                mean_after,
                delta: mean_after - mean_before,
                test: wilcoxon_one_sided(&ob, &oa)?,
            });
        }
        let first = pairs[0];
        out.push(Comparison {
            model: first.0.model,
            baseline: first.0.mitigation,
            mitigation: first.1.mitigation,
            pairing,
            datasets: pairs.iter().map(|(b, _)| b.dataset_id.clone()).collect(),
            deltas,
        });
    }
    Ok(out)
}

/// Six significant digits with a `.` decimal separator.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..15).contains(&mag) {
        format!("{:.*}", (5 - mag).max(0) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

fn cell_text(s: &Summary, verdict: Option<Verdict>) -> String {
    let mut t = match (s.mean, s.ci_half_width) {
        (Some(m), Some(h)) => format!("{m:.3} ± {h:.3}"),
        (Some(m), None) => format!("{m:.3}"),
        _ => "n/a".into(),
    };
    if let Some(v) = verdict {
        let _ = write!(t, " [{v}]");
    }
    if s.n_excluded > 0 {
        let _ = write!(t, " ({} excl.)", s.n_excluded);
    }
    t
}

fn metric_label(m: Option<Metric>) -> String {
    m.map_or_else(|| "F1".to_string(), |m| m.as_str().to_uppercase())
}

fn render_text(r: &FairnessReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "fogfair {} | schema {} | seed {} | config {}",
        r.provenance.tool_version,
        r.schema_version,
        r.provenance.seed,
        r.provenance.config_hash
    );
    for e in &r.entries {
        let _ = writeln!(out, "\n{} / {} / {}", e.dataset_id, e.model.as_str(), e.mitigation);
        let _ = writeln!(out, "  F1: {}  (n = {})", cell_text(&e.f1, None), e.f1.n_samples);
        let mut rows = vec![std::iter::once("attribute".to_string()).chain(Metric::ALL.iter().map(|m| metric_label(Some(*m)))).collect::<Vec<_>>()];
        for a in &e.attributes {
            let mut row = vec![a.attribute.as_str().to_string()];
            for m in Metric::ALL {
                row.push(a.metrics.get(&m).map_or_else(|| "-".into(), |c| cell_text(&c.summary, c.verdict)));
            }
            rows.push(row);
        }
        push_table(&mut out, &rows);
    }
    for c in &r.comparisons {
        let _ = writeln!(
            out,
            "\n{} vs {} ({}, {} pairing, datasets: {})",
            c.mitigation,
            c.baseline,
            c.model.as_str(),
            match c.pairing {
                Pairing::Fold => "fold",
                Pairing::Dataset => "dataset",
            },
            c.datasets.join(", ")
        );
        let mut rows = vec![["attribute", "metric", "before", "after", "delta", "W", "p", "n"].map(String::from).to_vec()];
        for d in &c.deltas {
            rows.push(vec![
                d.attribute.map_or("-", |a| a.as_str()).to_string(),
                metric_label(d.metric),
                format!("{:.4}", d.mean_before),
                format!("{:.4}", d.mean_after),
                format!("{:+.4}", d.delta),
                format!("{:.1}", d.test.statistic),
                format!("{:.4}", d.test.p_value),
                d.test.n_effective.to_string(),
            ]);
        }
        push_table(&mut out, &rows);
    }
    out
}

fn push_table(out: &mut String, rows: &[Vec<String>]) {
    let n_cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..n_cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    for r in rows {
        let line: Vec<String> = r.iter().enumerate().map(|(c, s)| format!("{s:<w$}", w = widths[c])).collect();
        let _ = writeln!(out, "  {}", line.join("  ").trim_end());
    }
}

fn render_csv(r: &FairnessReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("csv rendering failed: {e}"));
    w.write_record(["dataset", "model", "mitigation", "attribute", "metric", "mean", "ci_half_width", "n_samples", "n_excluded", "verdict"])
        .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(format_sig6).unwrap_or_default();
    for e in &r.entries {
        let mut rows = vec![("all".to_string(), "f1".to_string(), &e.f1, None)];
        for a in &e.attributes {
            for (m, c) in &a.metrics {
                rows.push((a.attribute.as_str().to_string(), m.as_str().to_string(), &c.summary, c.verdict));
            }
        }
        for (attr, metric, s, verdict) in rows {
            w.write_record([
                e.dataset_id.clone(),
                e.model.as_str().to_string(),
                e.mitigation.to_string(),
                attr,
                metric,
                opt(s.mean),
                opt(s.ci_half_width),
                s.n_samples.to_string(),
                s.n_excluded.to_string(),
                verdict.map(|v| v.to_string()).unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv rendering failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render_report(r: &FairnessReport, format: ReportFormat) -> Result<Vec<u8>> {
    Ok(match format {
        ReportFormat::Json => {
            let mut v = serde_json::to_vec_pretty(r)?;
            v.push(b'\n');
            v
        }
        ReportFormat::Text => render_text(r).into_bytes(),
        ReportFormat::Csv => render_csv(r)?.into_bytes(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::{compute_fairness, Group, GroupAssignment, PredictionSet};

    fn sample(iteration: usize, fold: usize, f1: f64, pred: [u8; 4]) -> MetricSample {
        let m = [("a".to_string(), Group::G0), ("b".to_string(), Group::G1)].into_iter().collect();
        let g = GroupAssignment::new(ProtectedAttribute::Sex, m, None);
        let ids = ["a", "a", "b", "b"].iter().map(|s| s.to_string()).collect();
        let p = PredictionSet::new(ids, pred.to_vec(), vec![1, 0, 1, 0], vec![0.5; 4]).unwrap();
        MetricSample {
            iteration,
            fold,
            f1,
            fairness: [(ProtectedAttribute::Sex, compute_fairness(&p, &g).unwrap())].into_iter().collect(),
            train_subjects: vec!["x".into()],
            test_subjects: vec!["a".into(), "b".into()],
        }
    }

    fn report(samples: Vec<MetricSample>) -> FairnessReport {
        let run = DatasetRun {
            dataset_id: "toy".into(),
            model: ModelKind::Forest,
            mitigation: MitigationKind::None,
            dichotomization: BTreeMap::new(),
            group_sizes: [(ProtectedAttribute::Sex, [1, 1])].into_iter().collect(),
            fold_plans: vec![],
            samples,
        };
        let cfg = ExperimentConfig::default();
        FairnessReport::from_runs(&cfg, vec![run]).unwrap()
    }

    fn toy() -> FairnessReport {
        report(vec![
            sample(0, 0, 0.5, [1, 0, 1, 0]),
            sample(0, 1, 0.6, [1, 1, 1, 0]),
            sample(1, 0, 0.7, [1, 0, 0, 0]),
        ])
    }

    #[test]
    fn json_roundtrip_is_byte_identical() {
        let r = toy();
        let a = render_report(&r, ReportFormat::Json).unwrap();
        let back = FairnessReport::from_json(&a).unwrap();
        assert_eq!(back, r);
        assert_eq!(render_report(&back, ReportFormat::Json).unwrap(), a);
    }

    #[test]
    fn empty_report_renders() {
        let r = FairnessReport {
            schema_version: SCHEMA_VERSION,
            provenance: Provenance::for_config(&ExperimentConfig::default()).unwrap(),
            entries: vec![],
            comparisons: vec![],
        };
        let csv = String::from_utf8(render_report(&r, ReportFormat::Csv).unwrap()).unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(!render_report(&r, ReportFormat::Text).unwrap().is_empty());
        assert!(!r.provenance.config_hash.is_empty());
    }

    #[test]
    fn verdict_tags() {
        let r = toy();
        let dpr = &r.entries[0].attributes[0].metrics[&Metric::Dpr];
        let text = String::from_utf8(render_report(&r, ReportFormat::Text).unwrap()).unwrap();
        assert_eq!(dpr.verdict, Some(four_fifths_verdict(dpr.summary.mean.unwrap())));
        assert!(text.contains(&format!("[{}]", dpr.verdict.unwrap())));
        assert!(r.entries[0].attributes[0].metrics[&Metric::Eod].verdict.is_none());
        assert_eq!(four_fifths_verdict(0.85), Verdict::Fair);
        let s = Summary::from_values(&[0.85, 0.85], 0);
        assert!(cell_text(&s, Some(four_fifths_verdict(0.85))).contains("[Fair]"));
    }

    #[test]
    fn compare_identical_reports() {
        let r = toy();
        for pairing in [Pairing::Fold, Pairing::Dataset] {
            let c = compare(&r, &r, pairing).unwrap();
            assert_eq!(c.len(), 1);
            for d in &c[0].deltas {
                assert_eq!(d.delta, 0.0);
                assert_eq!(d.test.p_value, 1.0);
                assert!(d.test.all_zero_differences);
            }
        }
    }

    #[test]
    fn compare_orients_eod() {
        let before = toy();
        let mut after = toy();
        after.entries[0].mitigation = MitigationKind::Threshold;
        for s in &mut after.entries[0].samples {
            if let Some(r) = s.fairness.get_mut(&ProtectedAttribute::Sex) {
                r.eod.value = r.eod.value.map(|v| (v - 0.1).max(0.0));
            }
            s.f1 += 0.1;
        }
        let c = compare(&before, &after, Pairing::Fold).unwrap();
        let f1 = c[0].deltas.iter().find(|d| d.metric.is_none()).unwrap();
        assert!((f1.delta - 0.1).abs() < 1e-12);
        assert!(f1.test.statistic > 0.0);
        let eod = c[0].deltas.iter().find(|d| d.metric == Some(Metric::Eod)).unwrap();
        assert!(eod.delta <= 0.0);
        if !eod.test.all_zero_differences {
            assert!(eod.test.statistic > 0.0);
        }
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(0.123456789), "0.123457");
        assert_eq!(format_sig6(1.0), "1.00000");
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(123.456789), "123.457");
        assert_eq!(format_sig6(1e-7), "1.00000e-7");
    }

    #[test]
    fn csv_row_per_metric() {
        let r = toy();
        let csv = String::from_utf8(render_report(&r, ReportFormat::Csv).unwrap()).unwrap();
        let n_metrics: usize = r.entries[0].attributes.iter().map(|a| a.metrics.len()).sum();
        assert_eq!(csv.lines().count(), 1 + 1 + n_metrics);
    }
}
