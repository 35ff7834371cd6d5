use serde::{Deserialize, Serialize};

use super::{ChannelDescriptor, SensorRecording};
use crate::error::{Error, Result};

/// Which recordings the Min-Max statistics were fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitScope {
    /// Training folds only.
    #[default]
    TrainOnly,
    /// Every subject, test folds included.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub channels: Vec<ChannelDescriptor>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub fit_scope: FitScope,
}

impl ScalingParams {
    #[inline]
    pub fn scale(&self, channel: usize, x: f64) -> f64 {
        let (lo, hi) = (self.min[channel], self.max[channel]);
        if hi > lo {
            (x - lo) / (hi - lo)
        } else {
            0.5
        }
    }

    /// Inverse of [`ScalingParams::scale`] for non-constant channels.
    pub fn unscale(&self, channel: usize, y: f64) -> f64 {
        let (lo, hi) = (self.min[channel], self.max[channel]);
        lo + y * (hi - lo)
    }
}

/// Per-channel Min-Max statistics over all given recordings.
pub fn fit_scaling(recordings: &[SensorRecording], scope: FitScope) -> Result<ScalingParams> {
    let first = recordings
        .first()
        .ok_or_else(|| Error::Config("cannot fit scaling on zero recordings".into()))?;
    let channels = first.channels.clone();
    let mut min = vec![f64::INFINITY; channels.len()];
    let mut max = vec![f64::NEG_INFINITY; channels.len()];
    for rec in recordings {
        if rec.channels != channels {
            return Err(Error::ChannelMismatch);
        }
        for row in rec.samples.rows() {
            for (c, &v) in row.iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
    }
    if min.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("cannot fit scaling on empty recordings".into()));
    }
    Ok(ScalingParams {
        channels,
        min,
        max,
        fit_scope: scope,
    })
}

/// `(x - min) / (max - min)` per channel; constant channels map to 0.5.
/// Values outside the fitted range are not clipped.
pub fn apply_scaling(rec: &SensorRecording, params: &ScalingParams) -> Result<SensorRecording> {
    if rec.channels != params.channels {
        return Err(Error::ChannelMismatch);
    }
    let mut out = rec.clone();
    for mut row in out.samples.rows_mut() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = params.scale(c, *v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use ndarray::Array2;
    use proptest::prelude::*;

    use super::*;
    use crate::ingest::BodyLocation;

    fn rec(values: &[f64]) -> SensorRecording {
        SensorRecording {
            recording_id: "r".into(),
            subject_id: "s".into(),
            dataset_id: "d".into(),
            sampling_rate_hz: 1.0,
            channels: vec![ChannelDescriptor::triaxial(BodyLocation::Shank)[0]],
            samples: Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap(),
            labels: vec![0; values.len()],
        }
    }

    fn column(r: &SensorRecording) -> Vec<f64> {
        r.samples.column(0).to_vec()
    }

    #[test]
    fn endpoints_map_to_unit_interval() {
        let r = rec(&[0.0, 5.0, 10.0]);
        let p = fit_scaling(std::slice::from_ref(&r), FitScope::Global).unwrap();
        assert_eq!(column(&apply_scaling(&r, &p).unwrap()), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_channel_maps_to_half() {
        let r = rec(&[3.0, 3.0, 3.0]);
        let p = fit_scaling(std::slice::from_ref(&r), FitScope::TrainOnly).unwrap();
        assert_eq!(column(&apply_scaling(&r, &p).unwrap()), vec![0.5; 3]);
    }

    #[test]
    fn test_values_below_train_min_are_not_clipped() {
        let train = rec(&[2.0, 6.0]);
        let p = fit_scaling(&[train], FitScope::TrainOnly).unwrap();
        let test = rec(&[0.0, 4.0, 8.0]);
        // (0-2)/4, (4-2)/4, (8-2)/4
        assert_eq!(column(&apply_scaling(&test, &p).unwrap()), vec![-0.5, 0.5, 1.5]);
    }

    #[test]
    fn channel_mismatch_rejected() {
        let p = fit_scaling(&[rec(&[0.0, 1.0])], FitScope::Global).unwrap();
        let mut other = rec(&[0.0, 1.0]);
        other.channels[0] = ChannelDescriptor::triaxial(BodyLocation::Thigh)[0];
        assert!(matches!(apply_scaling(&other, &p), Err(Error::ChannelMismatch)));
    }

    proptest! {
        #[test]
        fn round_trip_recovers_input(values in prop::collection::vec(-1e3f64..1e3, 2..40)) {
            let r = rec(&values);
            let p = fit_scaling(std::slice::from_ref(&r), FitScope::Global).unwrap();
            prop_assume!(p.max[0] > p.min[0]);
            let scaled = apply_scaling(&r, &p).unwrap();
            for (&x, &y) in values.iter().zip(scaled.samples.column(0)) {
                prop_assert!((0.0..=1.0).contains(&y));
                prop_assert!((p.unscale(0, y) - x).abs() <= 1e-12);
            }
        }

        #[test]
        fn affine_shift_of_fit_set_is_absorbed(values in prop::collection::vec(-10f64..10.0, 2..30),
                                               a in 0.5f64..4.0, b in -5f64..5.0) {
            let r = rec(&values);
            let shifted = rec(&values.iter().map(|x| a * x + b).collect::<Vec<_>>());
            let p1 = fit_scaling(std::slice::from_ref(&r), FitScope::Global).unwrap();
            let p2 = fit_scaling(std::slice::from_ref(&shifted), FitScope::Global).unwrap();
            let y1 = apply_scaling(&r, &p1).unwrap();
            let y2 = apply_scaling(&shifted, &p2).unwrap();
            for (u, v) in y1.samples.iter().zip(y2.samples.iter()) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }
    }
}
