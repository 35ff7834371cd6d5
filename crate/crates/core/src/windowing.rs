//! Fixed-length window segmentation and FOG episode extraction.

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::ingest::{ChannelDescriptor, SensorRecording};

/// Minimum FOG run kept as an episode, in seconds.
pub const DEFAULT_MIN_EPISODE_S: f64 = 0.5;

/// Window length used for Daphnet.
pub const DAPHNET_WINDOW_S: f64 = 4.5;
/// Window length used for tDCS FOG, DeFOG and De Souza.
pub const DEFAULT_WINDOW_S: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub subject_id: String,
    pub recording_id: String,
    pub start_index: usize,
    /// `[window_len, n_channels]`
    pub data: Array2<f64>,
    pub label: u8,
}

impl Window {
    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn end_index(&self) -> usize {
        self.start_index + self.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub windows: Vec<Window>,
    pub window_seconds: f64,
    pub sampling_rate_hz: f64,
    pub dataset_id: String,
}

impl WindowSet {
    pub fn labels(&self) -> Vec<u8> {
        self.windows.iter().map(|w| w.label).collect()
    }
}

/// A maximal run of FOG-labelled samples, `[start_index, end_index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub subject_id: String,
    pub recording_id: String,
    pub start_index: usize,
    pub end_index: usize,
    pub channels: Vec<ChannelDescriptor>,
    pub data: Array2<f64>,
}

impl Episode {
    /// Stable identifier used as a fairness unit id.
    pub fn id(&self) -> String {
        format!("{}#{}", self.recording_id, self.start_index)
    }

    pub fn len(&self) -> usize {
        self.end_index - self.start_index
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn window_len(window_seconds: f64, sampling_rate_hz: f64) -> usize {
    (window_seconds * sampling_rate_hz).round() as usize
}

/// Tile a recording with non-overlapping windows from sample 0.
///
/// A trailing partial window is dropped. Each window is labelled with the
/// annotation of its last sample.
pub fn segment(rec: &SensorRecording, window_seconds: f64) -> Result<WindowSet> {
    let len = window_len(window_seconds, rec.sampling_rate_hz);
    if len == 0 {
        return Err(Error::Config(format!("window of {window_seconds} s has zero samples")));
    }
    if rec.len() < len {
        return Err(Error::RecordingTooShort {
            len: rec.len(),
            window_len: len,
        });
    }
    let windows = (0..rec.len() / len)
        .map(|i| {
            let start = i * len;
            Window {
                subject_id: rec.subject_id.clone(),
                recording_id: rec.recording_id.clone(),
                start_index: start,
                data: rec.samples.slice(s![start..start + len, ..]).to_owned(),
                label: rec.labels[start + len - 1],
            }
        })
        .collect();
    Ok(WindowSet {
        windows,
        window_seconds,
        sampling_rate_hz: rec.sampling_rate_hz,
        dataset_id: rec.dataset_id.clone(),
    })
}

/// Maximal label-1 runs lasting at least `min_duration_s`, in temporal order.
pub fn extract_episodes(rec: &SensorRecording, min_duration_s: f64) -> Vec<Episode> {
    let min_len = (min_duration_s * rec.sampling_rate_hz).ceil().max(1.0) as usize;
    let mut out = Vec::new();
    let mut i = 0;
    let n = rec.len();
    while i < n {
        if rec.labels[i] != 1 {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && rec.labels[i] == 1 {
            i += 1;
        }
        if i - start >= min_len {
            out.push(Episode {
                subject_id: rec.subject_id.clone(),
                recording_id: rec.recording_id.clone(),
                start_index: start,
                end_index: i,
                channels: rec.channels.clone(),
                data: rec.samples.slice(s![start..i, ..]).to_owned(),
            });
        }
    }
    out
}

/// Index of the episode (same recording) sharing the most samples with the
/// window; ties go to the earlier episode. `None` when no episode overlaps.
pub fn overlapping_episode(window: &Window, episodes: &[Episode]) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (k, ep) in episodes.iter().enumerate() {
        if ep.recording_id != window.recording_id {
            continue;
        }
        let lo = ep.start_index.max(window.start_index);
        let hi = ep.end_index.min(window.end_index());
        if hi > lo && best.is_none_or(|(_, b)| hi - lo > b) {
            best = Some((k, hi - lo));
        }
    }
    best.map(|(k, _)| k)
}
