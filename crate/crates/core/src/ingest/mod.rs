//! Dataset loading, sensor harmonization and channel scaling.
//!
//! A [`SensorRecording`] holds one recording session of one subject: a
//! sample matrix (rows are time steps, columns are channels) together with
//! the per-sample FOG annotation. Everything downstream of this module works
//! on recordings that have passed [`SensorRecording::validate`].

mod harmonize;
mod load;
mod resample;
mod scaling;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use harmonize::{harmonize_pair, LocationClass};
pub use load::{load_dataset, read_metadata_csv, read_recording_csv, write_metadata_csv, write_recording_csv, DatasetFormat, DatasetManifest, DatasetSpec, MANIFEST_FILE};
pub use resample::resample;
pub use scaling::{apply_scaling, fit_scaling, FitScope, ScalingParams};
pub(crate) use load::write_file;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyLocation {
    LowerBack,
    Ankle,
    Shank,
    Thigh,
}

impl BodyLocation {
    pub fn as_str(self) -> &'static str {
        match self {
            BodyLocation::LowerBack => "lower_back",
            BodyLocation::Ankle => "ankle",
            BodyLocation::Shank => "shank",
            BodyLocation::Thigh => "thigh",
        }
    }

    pub fn is_lower_extremity(self) -> bool {
        !matches!(self, BodyLocation::LowerBack)
    }
}

impl FromStr for BodyLocation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "lower_back" | "lowerback" | "back" | "trunk" => Ok(BodyLocation::LowerBack),
            "ankle" => Ok(BodyLocation::Ankle),
            "shank" => Ok(BodyLocation::Shank),
            "thigh" => Ok(BodyLocation::Thigh),
            other => Err(Error::Manifest(format!("unknown body location `{other}`"))),
        }
    }
}

impl fmt::Display for BodyLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChannelDescriptor {
    pub body_location: BodyLocation,
    pub axis: Axis,
}

impl ChannelDescriptor {
    pub fn new(body_location: BodyLocation, axis: Axis) -> Self {
        Self {
            body_location,
            axis,
        }
    }

    /// Tri-axial channel triple for one location.
    pub fn triaxial(body_location: BodyLocation) -> [ChannelDescriptor; 3] {
        [Axis::X, Axis::Y, Axis::Z].map(|axis| ChannelDescriptor::new(body_location, axis))
    }

    /// Column name used in recording CSV headers, e.g. `lower_back_x`.
    pub fn column_name(&self) -> String {
        format!("{}_{}", self.body_location, self.axis.as_str())
    }
}

impl FromStr for ChannelDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (loc, axis) = s
            .rsplit_once('_')
            .ok_or_else(|| Error::Manifest(format!("channel column `{s}` is not <location>_<axis>")))?;
        let axis = match axis.to_ascii_lowercase().as_str() {
            "x" => Axis::X,
            "y" => Axis::Y,
            "z" => Axis::Z,
            other => return Err(Error::Manifest(format!("unknown axis `{other}` in `{s}`"))),
        };
        Ok(ChannelDescriptor::new(loc.parse()?, axis))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sex {
    Female,
    Male,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMetadata {
    pub subject_id: String,
    pub sex: Sex,
    pub age_years: f64,
    pub disease_duration_years: f64,
    pub dataset_id: String,
}

/// One subject's multi-channel IMU recording with sample-level FOG labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRecording {
    /// Unique within a dataset; usually the file stem.
    pub recording_id: String,
    pub subject_id: String,
    pub dataset_id: String,
    pub sampling_rate_hz: f64,
    pub channels: Vec<ChannelDescriptor>,
    /// `[n_samples, n_channels]`
    pub samples: Array2<f64>,
    /// 0 = no FOG, 1 = FOG
    pub labels: Vec<u8>,
}

impl SensorRecording {
    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return Err(Error::InvalidRecording(format!(
                "{}: sampling rate must be positive",
                self.recording_id
            )));
        }
        if self.samples.nrows() != self.labels.len() {
            return Err(Error::InvalidRecording(format!(
                "{}: {} sample rows but {} labels",
                self.recording_id,
                self.samples.nrows(),
                self.labels.len()
            )));
        }
        if self.samples.ncols() != self.channels.len() {
            return Err(Error::InvalidRecording(format!(
                "{}: {} columns but {} channel descriptors",
                self.recording_id,
                self.samples.ncols(),
                self.channels.len()
            )));
        }
        for (i, c) in self.channels.iter().enumerate() {
            if self.channels[..i].contains(c) {
                return Err(Error::InvalidRecording(format!(
                    "{}: duplicate channel {}",
                    self.recording_id,
                    c.column_name()
                )));
            }
        }
        if self.samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRecording(format!(
                "{}: non-finite sample value",
                self.recording_id
            )));
        }
        if self.labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidRecording(format!(
                "{}: labels must be 0 or 1",
                self.recording_id
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sampling_rate_hz
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Keep only the listed channel columns, in the given order.
    pub fn select_channels(&self, keep: &[ChannelDescriptor]) -> Result<SensorRecording> {
        let idx = keep
            .iter()
            .map(|c| self.channels.iter().position(|x| x == c).ok_or(Error::ChannelMismatch))
            .collect::<Result<Vec<_>>>()?;
        let samples = self.samples.select(ndarray::Axis(1), &idx);
        Ok(SensorRecording {
            channels: keep.to_vec(),
            samples,
            ..self.clone()
        })
    }
}
