use ndarray::Array2;

use super::SensorRecording;
use crate::error::{Error, Result};

/// Downsample a recording to `target_hz`.
///
/// Each channel is smoothed with a centred moving average of width
/// `ceil(source / target)` (truncated at the edges) and then linearly
/// interpolated onto the target grid `t_k = k / target_hz`. The output keeps
/// `floor(n * target / source)` samples. Labels take the value of the
/// nearest original sample.
pub fn resample(rec: &SensorRecording, target_hz: f64) -> Result<SensorRecording> {
    let source_hz = rec.sampling_rate_hz;
    if !(target_hz > 0.0 && target_hz.is_finite()) {
        return Err(Error::Config(format!("target rate {target_hz} must be positive")));
    }
    if target_hz > source_hz {
        return Err(Error::UpsampleRequested { source_hz, target_hz });
    }
    if target_hz == source_hz {
        return Ok(rec.clone());
    }

    let n = rec.len();
    let ratio = source_hz / target_hz;
    let width = ratio.ceil() as usize;
    let m = ((n as f64) * target_hz / source_hz + 1e-9).floor() as usize;

    let smoothed = moving_average(&rec.samples, width);
    let mut samples = Array2::<f64>::zeros((m, rec.n_channels()));
    let mut labels = Vec::with_capacity(m);
    for k in 0..m {
        let pos = (k as f64 * ratio).min((n - 1) as f64);
        let i0 = pos.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        let frac = pos - i0 as f64;
        for c in 0..rec.n_channels() {
            let a = smoothed[[i0, c]];
            let b = smoothed[[i1, c]];
            samples[[k, c]] = if frac == 0.0 { a } else { a + (b - a) * frac };
        }
        let nearest = (pos.round() as usize).min(n - 1);
        labels.push(rec.labels[nearest]);
    }

    Ok(SensorRecording {
        sampling_rate_hz: target_hz,
        samples,
        labels,
        ..rec.clone()
    })
}

fn moving_average(x: &Array2<f64>, width: usize) -> Array2<f64> {
    if width <= 1 {
        return x.clone();
    }
    let n = x.nrows();
    let back = (width - 1) / 2;
    let fwd = width - 1 - back;
    let mut out = Array2::<f64>::zeros(x.raw_dim());
    for c in 0..x.ncols() {
        let col = x.column(c);
        // prefix sums keep this O(n) per channel
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &v in col {
            acc += v;
            prefix.push(acc);
        }
        for i in 0..n {
            let lo = i.saturating_sub(back);
            let hi = (i + fwd).min(n - 1);
            let count = (hi - lo + 1) as f64;
            let mean = (prefix[hi + 1] - prefix[lo]) / count;
            // a window of identical values must return that value exactly
            out[[i, c]] = if col.slice(ndarray::s![lo..=hi]).iter().all(|&v| v == col[i]) {
                col[i]
            } else {
                mean
            };
        }
    }
    out
}
