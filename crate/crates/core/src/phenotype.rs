//! Spectral FOG phenotyping.
//!
//! An episode is tremulous when the acceleration-magnitude power in the
//! freezing band (3, 8] Hz exceeds the power in the locomotion band (0, 3] Hz,
//! and akinetic otherwise. Power is the plain Hann-windowed periodogram of the
//! whole episode after mean removal.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{BodyLocation, ChannelDescriptor};
use crate::windowing::Episode;

pub const LOCOMOTION_BAND_HZ: (f64, f64) = (0.0, 3.0);
pub const FREEZE_BAND_HZ: (f64, f64) = (3.0, 8.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPower {
    pub freeze_band_power: f64,
    pub locomotion_band_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhenotypeLabel {
    Akinetic,
    Tremulous,
}

/// One-sided periodogram of a mean-removed, Hann-windowed signal, zero-padded
/// to at least `min_len` samples. Returns `(frequency, power)` pairs.
fn periodogram(signal: &[f64], sampling_rate_hz: f64, min_len: usize) -> Vec<(f64, f64)> {
    let n = signal.len();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let window: Vec<f64> = if n == 1 {
        vec![1.0]
    } else {
        (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
            .collect()
    };
    let norm = sampling_rate_hz * window.iter().map(|w| w * w).sum::<f64>();
    let padded = n.max(min_len);
    let mut buf: Vec<Complex<f64>> = signal
        .iter()
        .zip(&window)
        .map(|(x, w)| Complex::new((x - mean) * w, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(padded)
        .collect();
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);

    (0..=padded / 2)
        .map(|k| {
            let mut p = buf[k].norm_sqr() / norm;
            if k != 0 && !(padded.is_multiple_of(2) && k == padded / 2) {
                p *= 2.0;
            }
            (k as f64 * sampling_rate_hz / padded as f64, p)
        })
        .collect()
}

fn check_band(lo: f64, hi: f64, sampling_rate_hz: f64) -> Result<()> {
    let nyquist = sampling_rate_hz / 2.0;
    if !(lo >= 0.0 && hi > lo && hi <= nyquist + 1e-12) {
        return Err(Error::BandOutOfRange { lo, hi, nyquist });
    }
    Ok(())
}

fn sum_band(spectrum: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    spectrum
        .iter()
        .filter(|(f, _)| *f > lo && *f <= hi)
        .map(|(_, p)| p)
        .sum()
}

/// Sum of periodogram power over bins with `band_lo < f <= band_hi`.
///
/// The signal must cover at least one second.
pub fn band_power(signal: &[f64], sampling_rate_hz: f64, band_lo_hz: f64, band_hi_hz: f64) -> Result<f64> {
    if (signal.len() as f64) < sampling_rate_hz || signal.len() < 2 {
        return Err(Error::SignalTooShort {
            len: signal.len(),
            sampling_rate_hz,
        });
    }
    check_band(band_lo_hz, band_hi_hz, sampling_rate_hz)?;
    let spectrum = periodogram(signal, sampling_rate_hz, 0);
    Ok(sum_band(&spectrum, band_lo_hz, band_hi_hz))
}

/// Channels of the sensor used for phenotyping: the lower back when present,
/// else the first lower-extremity location in channel order.
pub fn primary_sensor_channels(channels: &[ChannelDescriptor]) -> Vec<usize> {
    let loc = if channels.iter().any(|c| c.body_location == BodyLocation::LowerBack) {
        Some(BodyLocation::LowerBack)
    } else {
        channels.iter().map(|c| c.body_location).find(|l| l.is_lower_extremity())
    };
    match loc {
        Some(loc) => channels
            .iter()
            .enumerate()
            .filter(|(_, c)| c.body_location == loc)
            .map(|(i, _)| i)
            .collect(),
        None => Vec::new(),
    }
}

/// Freeze- and locomotion-band power of the episode's acceleration magnitude.
/// Episodes shorter than one second are zero-padded to one second.
pub fn episode_band_power(ep: &Episode, sampling_rate_hz: f64) -> Result<BandPower> {
    let cols = primary_sensor_channels(&ep.channels);
    if cols.is_empty() {
        return Err(Error::InvalidRecording(format!("episode {} has no usable sensor", ep.id())));
    }
    if ep.data.nrows() == 0 {
        return Err(Error::SignalTooShort {
            len: 0,
            sampling_rate_hz,
        });
    }
    check_band(FREEZE_BAND_HZ.0, FREEZE_BAND_HZ.1, sampling_rate_hz)?;
    let magnitude: Vec<f64> = ep
        .data
        .rows()
        .into_iter()
        .map(|row| cols.iter().map(|&c| row[c] * row[c]).sum::<f64>().sqrt())
        .collect();
    let spectrum = periodogram(&magnitude, sampling_rate_hz, sampling_rate_hz.ceil() as usize);
    Ok(BandPower {
        freeze_band_power: sum_band(&spectrum, FREEZE_BAND_HZ.0, FREEZE_BAND_HZ.1),
        locomotion_band_power: sum_band(&spectrum, LOCOMOTION_BAND_HZ.0, LOCOMOTION_BAND_HZ.1),
    })
}

pub fn classify_band_power(bp: &BandPower) -> PhenotypeLabel {
    if bp.freeze_band_power > bp.locomotion_band_power {
        PhenotypeLabel::Tremulous
    } else {
        PhenotypeLabel::Akinetic
    }
}

pub fn classify_episode(ep: &Episode, sampling_rate_hz: f64) -> Result<PhenotypeLabel> {
    Ok(classify_band_power(&episode_band_power(ep, sampling_rate_hz)?))
}

#[cfg(test)]
pub(crate) mod tests {
    use std::f64::consts::PI;

    use ndarray::Array2;

    use super::*;

    fn tone(freq: f64, rate: f64, secs: f64, amp: f64) -> Vec<f64> {
        let n = (rate * secs) as usize;
        (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / rate).sin()).collect()
    }

    /// Direct O(n^2) DFT periodogram with the same windowing and scaling.
    fn dft_band(signal: &[f64], rate: f64, lo: f64, hi: f64) -> f64 {
        let n = signal.len();
        let mean = signal.iter().sum::<f64>() / n as f64;
        let w: Vec<f64> = (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()).collect();
        let norm = rate * w.iter().map(|v| v * v).sum::<f64>();
        let mut total = 0.0;
        for k in 0..=n / 2 {
            let f = k as f64 * rate / n as f64;
            if !(f > lo && f <= hi) {
                continue;
            }
            let (mut re, mut im) = (0.0, 0.0);
            for (t, (&x, &wt)) in signal.iter().zip(&w).enumerate() {
                let ang = -2.0 * PI * (k * t) as f64 / n as f64;
                re += (x - mean) * wt * ang.cos();
                im += (x - mean) * wt * ang.sin();
            }
            let scale = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
            total += scale * (re * re + im * im) / norm;
        }
        total
    }

    pub(crate) fn episode_from(signal: &[f64]) -> Episode {
        // gravity on z keeps the magnitude a faithful copy of the tone
        let n = signal.len();
        let data = Array2::from_shape_fn((n, 3), |(i, c)| if c == 2 { 1.0 + signal[i] } else { 0.0 });
        Episode {
            subject_id: "s".into(),
            recording_id: "r".into(),
            start_index: 0,
            end_index: n,
            channels: ChannelDescriptor::triaxial(BodyLocation::LowerBack).to_vec(),
            data,
        }
    }

    #[test]
    fn tones_land_in_their_bands() {
        let five = tone(5.0, 64.0, 4.0, 1.0);
        assert!(band_power(&five, 64.0, 3.0, 8.0).unwrap() > 100.0 * band_power(&five, 64.0, 0.0, 3.0).unwrap());
        let one = tone(1.0, 64.0, 4.0, 1.0);
        assert!(band_power(&one, 64.0, 0.0, 3.0).unwrap() > 100.0 * band_power(&one, 64.0, 3.0, 8.0).unwrap());
    }

    #[test]
    fn two_tone_mix_splits_evenly_and_matches_dft() {
        let a = tone(1.0, 64.0, 4.0, 1.0);
        let b = tone(5.0, 64.0, 4.0, 1.0);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let lo = band_power(&mix, 64.0, 0.0, 3.0).unwrap();
        let hi = band_power(&mix, 64.0, 3.0, 8.0).unwrap();
        assert!((lo - hi).abs() / hi < 0.05, "{lo} vs {hi}");
        let lo_ref = dft_band(&mix, 64.0, 0.0, 3.0);
        let hi_ref = dft_band(&mix, 64.0, 3.0, 8.0);
        assert!((lo - lo_ref).abs() < 1e-9 * lo_ref);
        assert!((hi - hi_ref).abs() < 1e-9 * hi_ref);
    }

    #[test]
    fn band_errors() {
        assert!(matches!(band_power(&[0.0; 10], 64.0, 0.0, 3.0), Err(Error::SignalTooShort { .. })));
        let x = tone(1.0, 64.0, 2.0, 1.0);
        assert!(matches!(band_power(&x, 64.0, 3.0, 40.0), Err(Error::BandOutOfRange { .. })));
        assert!(matches!(band_power(&x, 64.0, 3.0, 3.0), Err(Error::BandOutOfRange { .. })));
    }

    #[test]
    fn classify_simple_tones() {
        let ep = episode_from(&tone(5.0, 64.0, 3.0, 0.3));
        assert_eq!(classify_episode(&ep, 64.0).unwrap(), PhenotypeLabel::Tremulous);
        let ep = episode_from(&tone(1.0, 64.0, 3.0, 0.3));
        assert_eq!(classify_episode(&ep, 64.0).unwrap(), PhenotypeLabel::Akinetic);
    }

    #[test]
    fn short_episode_is_padded() {
        let ep = episode_from(&tone(6.0, 64.0, 0.6, 0.3));
        assert_eq!(classify_episode(&ep, 64.0).unwrap(), PhenotypeLabel::Tremulous);
    }

    #[test]
    fn white_noise_matches_direct_comparison() {
        use rand::{Rng, SeedableRng};
        let mut tremulous = 0;
        for seed in 0..40 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let noise: Vec<f64> = (0..256).map(|_| rng.gen_range(-0.2..0.2)).collect();
            let ep = episode_from(&noise);
            let label = classify_episode(&ep, 64.0).unwrap();
            let mag: Vec<f64> = (0..256).map(|i| (1.0 + noise[i]).abs()).collect();
            let expected = if dft_band(&mag, 64.0, 3.0, 8.0) > dft_band(&mag, 64.0, 0.0, 3.0) {
                PhenotypeLabel::Tremulous
            } else {
                PhenotypeLabel::Akinetic
            };
            assert_eq!(label, expected);
            assert_eq!(classify_episode(&ep, 64.0).unwrap(), label);
            tremulous += usize::from(label == PhenotypeLabel::Tremulous);
        }
        // (3,8] is 5/3 as wide as (0,3], so flat noise leans tremulous
        assert!(tremulous > 20, "{tremulous}");
    }

    #[test]
    fn primary_sensor_prefers_lower_back() {
        use BodyLocation::*;
        let mut ch: Vec<_> = ChannelDescriptor::triaxial(Ankle).to_vec();
        ch.extend(ChannelDescriptor::triaxial(LowerBack));
        assert_eq!(primary_sensor_channels(&ch), vec![3, 4, 5]);
        let ch: Vec<_> = [Thigh, Ankle].iter().flat_map(|&l| ChannelDescriptor::triaxial(l)).collect();
        assert_eq!(primary_sensor_channels(&ch), vec![0, 1, 2]);
    }
}
