//! Classification score, sample aggregation and the one-sided signed-rank test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Normal quantile for a two-sided 95% interval.
pub const Z_95: f64 = 1.96;

/// Largest effective sample size for which p-values are enumerated exactly.
pub const EXACT_MAX_N: usize = 12;

/// Unweighted mean of per-class F1 over the classes present in either vector.
/// A class with zero precision and recall contributes 0.
pub fn macro_f1(y_pred: &[u8], y_true: &[u8]) -> Result<f64> {
    if y_pred.len() != y_true.len() {
        return Err(Error::LengthMismatch(y_pred.len(), y_true.len()));
    }
    let (mut tp, mut fp, mut fneg, mut tn) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &t) in y_pred.iter().zip(y_true) {
        match (p == 1, t == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(macro_f1_from_counts(tp, fp, fneg, tn))
}

/// Macro F1 from the FOG-class confusion counts.
pub fn macro_f1_from_counts(tp: u64, fp: u64, fneg: u64, tn: u64) -> f64 {
    let mut total = 0.0;
    let mut classes = 0;
    // (hits, false alarms, misses) for FOG then no-FOG
    for (hit, alarm, miss) in [(tp, fp, fneg), (tn, fneg, fp)] {
        if hit + alarm + miss == 0 {
            continue;
        }
        classes += 1;
        // 2PR/(P+R) reduces to 2tp / (2tp + fp + fn)
        if hit > 0 {
            total += (2 * hit) as f64 / (2 * hit + alarm + miss) as f64;
        }
    }
    if classes == 0 {
        0.0
    } else {
        total / classes as f64
    }
}

/// Mean and 95% normal-approximation interval of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub ci_half_width: Option<f64>,
    pub n_samples: usize,
    /// Samples dropped as degenerate.
    pub n_excluded: usize,
}

impl Summary {
    /// Order-independent: values are sorted before any summation.
    pub fn from_values(values: &[f64], n_excluded: usize) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mean = (n > 0).then(|| v.iter().sum::<f64>() / n as f64);
        let ci_half_width = mean.filter(|_| n >= 2).map(|m| {
            let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
            let sd = (ss / (n - 1) as f64).sqrt();
            Z_95 * sd / (n as f64).sqrt()
        });
        Self {
            mean,
            ci_half_width,
            n_samples: n,
            n_excluded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of positive differences.
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub method: WilcoxonMethod,
    /// Every difference was zero; p is reported as 1.
    pub all_zero_differences: bool,
}

/// Average ranks of `|d|`, doubled so ties stay integral.
fn doubled_ranks(abs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0u64; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 averaged, times two
        let twice_avg = (i + 1 + j + 1) as u64;
        for &o in &order[i..=j] {
            ranks[o] = twice_avg;
        }
        i = j + 1;
    }
    ranks
}

/// Signed-rank test of `H1: median(after - before) > 0`. Zero differences
/// are dropped.
pub fn wilcoxon_one_sided(before: &[f64], after: &[f64]) -> Result<WilcoxonResult> {
    if before.len() != after.len() {
        return Err(Error::LengthMismatch(before.len(), after.len()));
    }
    if before.is_empty() {
        return Err(Error::TooFewSamples(0));
    }
    let d: Vec<f64> = after.iter().zip(before).map(|(a, b)| a - b).filter(|&x| x != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            p_value: 1.0,
            n_effective: 0,
            method: WilcoxonMethod::Exact,
            all_zero_differences: true,
        });
    }
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = doubled_ranks(&abs);
    let w2: u64 = ranks.iter().zip(&d).filter(|(_, &x)| x > 0.0).map(|(r, _)| r).sum();
    let statistic = w2 as f64 / 2.0;
    if n <= EXACT_MAX_N {
        // counts[s] = number of sign assignments with doubled positive-rank sum s
        let total: u64 = ranks.iter().sum();
        let mut counts = vec![0u64; total as usize + 1];
        counts[0] = 1;
        let mut reach = 0usize;
        for &r in &ranks {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] > 0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let tail: u64 = counts[w2 as usize..].iter().sum();
        return Ok(WilcoxonResult {
            statistic,
            p_value: tail as f64 / (1u64 << n) as f64,
            n_effective: n,
            method: WilcoxonMethod::Exact,
            all_zero_differences: false,
        });
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.clone();
    sorted.sort_unstable();
    for chunk in sorted.chunk_by(|a, b| a == b) {
        let t = chunk.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = (statistic - mean - 0.5) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(WilcoxonResult {
        statistic,
        p_value: (1.0 - normal.cdf(z)).clamp(0.0, 1.0),
        n_effective: n,
        method: WilcoxonMethod::NormalApprox,
        all_zero_differences: false,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    /// Enumerate every sign pattern of the nonzero |d| ranks.
    fn enumeration_oracle(before: &[f64], after: &[f64]) -> (f64, f64) {
        let d: Vec<f64> = after.iter().zip(before).map(|(a, b)| a - b).filter(|x| *x != 0.0).collect();
        let n = d.len();
        let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
        // average ranks by direct counting
        let rank = |x: f64| {
            let less = abs.iter().filter(|&&y| y < x).count() as f64;
            let eq = abs.iter().filter(|&&y| y == x).count() as f64;
            less + (eq + 1.0) / 2.0
        };
        let ranks: Vec<f64> = abs.iter().map(|&x| rank(x)).collect();
        let w: f64 = ranks.iter().zip(&d).filter(|(_, &x)| x > 0.0).map(|(r, _)| r).sum();
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if s >= w {
                hits += 1;
            }
        }
        (w, hits as f64 / (1u64 << n) as f64)
    }

    #[test]
    fn macro_f1_examples() {
        assert_eq!(macro_f1(&[1, 0, 0, 0], &[1, 1, 0, 0]).unwrap(), (2.0 / 3.0 + 0.8) / 2.0);
        assert!((macro_f1(&[1, 0, 0, 0], &[1, 1, 0, 0]).unwrap() - 11.0 / 15.0).abs() < 1e-15);
        assert_eq!(macro_f1(&[0, 1, 1, 0], &[0, 1, 1, 0]).unwrap(), 1.0);
        assert_eq!(macro_f1(&[1, 0, 0, 1], &[0, 1, 1, 0]).unwrap(), 0.0);
        assert!(matches!(macro_f1(&[1], &[1, 0]), Err(Error::LengthMismatch(1, 2))));
    }

    #[test]
    fn summary_examples() {
        let s = Summary::from_values(&[0.4, 0.6], 0);
        assert!((s.mean.unwrap() - 0.5).abs() < 1e-15);
        let expected = 1.96 * (0.02f64).sqrt() / 2f64.sqrt();
        assert!((s.ci_half_width.unwrap() - expected).abs() < 1e-12);
        assert!((s.ci_half_width.unwrap() - 0.196).abs() < 1e-3);
        assert_eq!(Summary::from_values(&[0.7; 5], 0).ci_half_width, Some(0.0));
    }

    #[test]
    fn wilcoxon_constant_shift_n6() {
        let before = [0.1, 0.5, 0.2, 0.9, 0.3, 0.4];
        let after: Vec<f64> = before.iter().map(|x| x + 1.0).collect();
        let r = wilcoxon_one_sided(&before, &after).unwrap();
        assert_eq!(r.statistic, 21.0);
        assert_eq!(r.p_value, 1.0 / 64.0);
        assert_eq!(r.method, WilcoxonMethod::Exact);
    }

    #[test]
    fn wilcoxon_degenerate_and_ties() {
        let r = wilcoxon_one_sided(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert!(r.all_zero_differences);
        assert_eq!(r.p_value, 1.0);
        let t = wilcoxon_one_sided(&[0.0, 0.0], &[1.0, -1.0]).unwrap();
        assert_eq!(t.statistic, 1.5);
        // sums {0, 1.5, 1.5, 3}: three of four reach 1.5
        assert_eq!(t.p_value, 0.75);
    }

    #[test]
    fn wilcoxon_large_sample_uses_normal_approximation() {
        let before = vec![0.0; 30];
        let after: Vec<f64> = (0..30).map(|i| if i % 5 == 0 { -(i as f64) } else { i as f64 }).collect();
        let r = wilcoxon_one_sided(&before, &after).unwrap();
        assert_eq!(r.method, WilcoxonMethod::NormalApprox);
        assert_eq!(r.n_effective, 29);
        assert!(r.p_value < 0.01);
        let r13 = wilcoxon_one_sided(&[0.0; 13], &[1.0; 13]).unwrap();
        assert_eq!(r13.method, WilcoxonMethod::NormalApprox);
    }

    proptest! {
        #[test]
        fn exact_p_matches_enumeration(pairs in prop::collection::vec((0i32..6, 0i32..6), 1..=10)) {
            let before: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let after: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let r = wilcoxon_one_sided(&before, &after).unwrap();
            let (w, p) = enumeration_oracle(&before, &after);
            if r.n_effective > 0 {
                prop_assert_eq!(r.statistic, w);
                prop_assert_eq!(r.p_value, p);
            }
        }

        #[test]
        fn macro_f1_relabel_symmetric(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..40)) {
            let p: Vec<u8> = pairs.iter().map(|x| x.0).collect();
            let t: Vec<u8> = pairs.iter().map(|x| x.1).collect();
            let pf: Vec<u8> = p.iter().map(|x| 1 - x).collect();
            let tf: Vec<u8> = t.iter().map(|x| 1 - x).collect();
            let a = macro_f1(&p, &t).unwrap();
            prop_assert_eq!(a, macro_f1(&pf, &tf).unwrap());
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn summary_permutation_invariant(mut v in prop::collection::vec(0f64..1.0, 2..30), seed in 0u64..100) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let a = Summary::from_values(&v, 0);
            v.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(a, Summary::from_values(&v, 0));
        }
    }
}
