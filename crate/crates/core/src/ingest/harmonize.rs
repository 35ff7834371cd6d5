use super::{resample, BodyLocation, ChannelDescriptor, SensorRecording};
use crate::error::{Error, Result};

/// Placements considered comparable across datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocationClass {
    LowerBack,
    /// Ankle, shank and thigh.
    LowerExtremity,
}

impl LocationClass {
    pub fn contains(self, loc: BodyLocation) -> bool {
        match self {
            LocationClass::LowerBack => loc == BodyLocation::LowerBack,
            LocationClass::LowerExtremity => loc.is_lower_extremity(),
        }
    }
}

/// First body location in channel order that belongs to `class`, with its channels.
fn channels_for_class(rec: &SensorRecording, class: LocationClass) -> Option<Vec<ChannelDescriptor>> {
    let loc = rec.channels.iter().map(|c| c.body_location).find(|&l| class.contains(l))?;
    Some(rec.channels.iter().copied().filter(|c| c.body_location == loc).collect())
}

fn all_have(recs: &[SensorRecording], class: LocationClass) -> bool {
    !recs.is_empty() && recs.iter().all(|r| channels_for_class(r, class).is_some())
}

/// Restrict source and target recordings to one shared placement class and
/// resample both to the lower of their sampling rates.
///
/// The lower back is preferred when both sides carry it. Each recording keeps
/// the channels of its first sensor inside the chosen class, so a Daphnet ankle
/// triple pairs with a De Souza shank triple.
pub fn harmonize_pair(
    source: &[SensorRecording],
    target: &[SensorRecording],
) -> Result<(Vec<SensorRecording>, Vec<SensorRecording>)> {
    let class = [LocationClass::LowerBack, LocationClass::LowerExtremity]
        .into_iter()
        .find(|&c| all_have(source, c) && all_have(target, c))
        .ok_or(Error::NoCompatiblePlacement)?;

    let rate = source
        .iter()
        .chain(target)
        .map(|r| r.sampling_rate_hz)
        .fold(f64::INFINITY, f64::min);

    let convert = |recs: &[SensorRecording]| -> Result<Vec<SensorRecording>> {
        recs.iter()
            .map(|r| {
                let keep = channels_for_class(r, class).ok_or(Error::NoCompatiblePlacement)?;
                resample(&r.select_channels(&keep)?, rate)
            })
            .collect()
    };
    let src = convert(source)?;
    let tgt = convert(target)?;

    let n_ch = src[0].n_channels();
    if src.iter().chain(&tgt).any(|r| r.n_channels() != n_ch) {
        return Err(Error::NoCompatiblePlacement);
    }
    Ok((src, tgt))
}

#[cfg(test)]
mod tests {
    use ndarray::Array2;

    use super::*;

    fn rec(locs: &[BodyLocation], rate: f64, n: usize) -> SensorRecording {
        let channels: Vec<_> = locs.iter().flat_map(|&l| ChannelDescriptor::triaxial(l)).collect();
        SensorRecording {
            recording_id: "r".into(),
            subject_id: "s".into(),
            dataset_id: "d".into(),
            sampling_rate_hz: rate,
            samples: Array2::from_shape_fn((n, channels.len()), |(i, c)| (i + c) as f64),
            channels,
            labels: vec![0; n],
        }
    }

    #[test]
    fn daphnet_with_de_souza_uses_lower_extremity_at_64hz() {
        use BodyLocation::*;
        let daphnet = rec(&[Ankle, Thigh, LowerBack], 64.0, 640);
        let de_souza = rec(&[Shank], 128.0, 1280);
        let (s, t) = harmonize_pair(&[daphnet], &[de_souza]).unwrap();
        assert_eq!(s[0].sampling_rate_hz, 64.0);
        assert_eq!(t[0].sampling_rate_hz, 64.0);
        assert_eq!(s[0].channels, ChannelDescriptor::triaxial(Ankle).to_vec());
        assert_eq!(t[0].channels, ChannelDescriptor::triaxial(Shank).to_vec());
        assert_eq!(t[0].len(), 640);
    }

    #[test]
    fn multi_source_lower_back_to_64hz() {
        use BodyLocation::*;
        let defog = rec(&[LowerBack], 100.0, 1000);
        let daphnet = rec(&[Ankle, Thigh, LowerBack], 64.0, 640);
        let tdcs = rec(&[LowerBack], 128.0, 1280);
        let (s, t) = harmonize_pair(&[defog, daphnet], &[tdcs]).unwrap();
        for r in s.iter().chain(&t) {
            assert_eq!(r.sampling_rate_hz, 64.0);
            assert_eq!(r.channels, ChannelDescriptor::triaxial(LowerBack).to_vec());
        }
    }

    #[test]
    fn identical_datasets_only_restricted() {
        use BodyLocation::*;
        let a = rec(&[LowerBack], 64.0, 100);
        let (s, t) = harmonize_pair(std::slice::from_ref(&a), std::slice::from_ref(&a)).unwrap();
        assert_eq!(s[0], a);
        assert_eq!(t[0], a);
    }

    #[test]
    fn disjoint_placements_fail() {
        use BodyLocation::*;
        let r = harmonize_pair(&[rec(&[LowerBack], 64.0, 10)], &[rec(&[Shank], 64.0, 10)]);
        assert!(matches!(r, Err(Error::NoCompatiblePlacement)));
    }
}
