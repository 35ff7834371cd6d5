//! ECDF window features for the tree ensemble.
//!
//! Each channel contributes `n_quantiles` quantile values at levels
//! `(k + 0.5) / n_quantiles` followed by the channel mean, so the vector
//! length depends only on the channel count.

use crate::error::{Error, Result};
use crate::windowing::Window;

pub const DEFAULT_N_QUANTILES: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub subject_id: String,
    pub start_index: usize,
}

/// Linear interpolation between order statistics at position `p * (n - 1)`.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 || sorted[lo] == sorted[hi] {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

pub fn ecdf_features(w: &Window, n_quantiles: usize) -> Result<FeatureVector> {
    if n_quantiles == 0 {
        return Err(Error::Config("n_quantiles must be positive".into()));
    }
    if w.len() < n_quantiles {
        return Err(Error::WindowTooShort {
            len: w.len(),
            n_quantiles,
        });
    }
    let mut values = Vec::with_capacity(w.data.ncols() * (n_quantiles + 1));
    let mut sorted = Vec::with_capacity(w.len());
    for col in w.data.columns() {
        sorted.clear();
        sorted.extend(col.iter().copied());
        sorted.sort_by(f64::total_cmp);
        for k in 0..n_quantiles {
            values.push(quantile_sorted(&sorted, (k as f64 + 0.5) / n_quantiles as f64));
        }
        // summing in sorted order keeps the mean permutation invariant
        values.push(sorted.iter().sum::<f64>() / sorted.len() as f64);
    }
    Ok(FeatureVector {
        values,
        subject_id: w.subject_id.clone(),
        start_index: w.start_index,
    })
}

pub fn ecdf_features_all(windows: &[Window], n_quantiles: usize) -> Result<Vec<FeatureVector>> {
    windows.iter().map(|w| ecdf_features(w, n_quantiles)).collect()
}

#[cfg(test)]
mod tests {
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    use super::*;

    fn window(cols: Vec<Vec<f64>>) -> Window {
        let n = cols[0].len();
        Window {
            subject_id: "s".into(),
            recording_id: "r".into(),
            start_index: 0,
            data: Array2::from_shape_fn((n, cols.len()), |(i, c)| cols[c][i]),
            label: 0,
        }
    }

    #[test]
    fn constant_channel() {
        let f = ecdf_features(&window(vec![vec![2.0; 30]]), 7).unwrap();
        assert_eq!(f.values, vec![2.0; 8]);
    }

    #[test]
    fn permutation_of_one_to_hundred() {
        let mut v: Vec<f64> = (1..=100).map(f64::from).collect();
        v.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(3));
        let f = ecdf_features(&window(vec![v]), 4).unwrap();
        // sort-and-interpolate: h = p * 99 for p in {1/8, 3/8, 5/8, 7/8}
        let expected = [13.375, 38.125, 62.875, 87.625, 50.5];
        for (got, want) in f.values.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        for (got, approx) in f.values.iter().zip([13.0, 38.0, 63.0, 88.0]) {
            assert!((got - approx).abs() <= 1.0);
        }
    }

    #[test]
    fn channels_concatenate_in_order() {
        let f = ecdf_features(&window(vec![vec![1.0; 10], vec![5.0; 10]]), 2).unwrap();
        assert_eq!(f.values, vec![1.0, 1.0, 1.0, 5.0, 5.0, 5.0]);
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            ecdf_features(&window(vec![vec![0.0; 3]]), 4),
            Err(Error::WindowTooShort { len: 3, n_quantiles: 4 })
        ));
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_monotone(v in prop::collection::vec(-50f64..50.0, 10..80), seed in 0u64..1000, q in 1usize..10) {
            let mut shuffled = v.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = ecdf_features(&window(vec![v.clone()]), q).unwrap();
            let b = ecdf_features(&window(vec![shuffled]), q).unwrap();
            prop_assert_eq!(a.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                            b.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
            for k in 1..q {
                prop_assert!(a.values[k] >= a.values[k - 1]);
            }
        }

        #[test]
        fn length_invariant(n1 in 10usize..60, n2 in 10usize..60) {
            let a = ecdf_features(&window(vec![vec![1.0; n1], vec![2.0; n1]]), 5).unwrap();
            let b = ecdf_features(&window(vec![vec![1.0; n2], vec![2.0; n2]]), 5).unwrap();
            prop_assert_eq!(a.values.len(), b.values.len());
        }
    }
}
