use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{BodyLocation, ChannelDescriptor, SensorRecording, Sex, SubjectMetadata};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    /// Manifest plus one CSV per recording and a metadata CSV.
    #[default]
    Csv,
    /// Daphnet whitespace-separated `SxxRyy.txt` files plus a metadata CSV.
    Daphnet,
}

/// Where a dataset lives and how to read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub path: std::path::PathBuf,
    #[serde(default)]
    pub format: DatasetFormat,
}

impl DatasetSpec {
    pub fn load(&self) -> Result<(Vec<SensorRecording>, Vec<SubjectMetadata>)> {
        load_dataset(&self.path, self.format)
    }
}

/// `manifest.toml` at the dataset root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub sampling_rate_hz: f64,
    #[serde(default)]
    pub sensor_locations: Vec<BodyLocation>,
    /// Glob patterns relative to the dataset root.
    pub recordings: Vec<String>,
    #[serde(default = "default_metadata")]
    pub metadata: String,
}

fn default_metadata() -> String {
    "metadata.csv".to_string()
}

pub const MANIFEST_FILE: &str = "manifest.toml";

impl DatasetManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: DatasetManifest =
            toml::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        if !(m.sampling_rate_hz > 0.0 && m.sampling_rate_hz.is_finite()) {
            return Err(Error::Manifest("sampling_rate_hz must be positive".into()));
        }
        Ok(m)
    }

    fn daphnet_default() -> Self {
        Self {
            dataset_id: "daphnet".into(),
            sampling_rate_hz: 64.0,
            sensor_locations: vec![BodyLocation::Ankle, BodyLocation::Thigh, BodyLocation::LowerBack],
            recordings: vec!["**/S*R*.txt".into()],
            metadata: default_metadata(),
        }
    }
}

/// Load every recording and the metadata table of one dataset directory.
pub fn load_dataset(dir: &Path, format: DatasetFormat) -> Result<(Vec<SensorRecording>, Vec<SubjectMetadata>)> {
    let manifest = match format {
        DatasetFormat::Csv => DatasetManifest::read(dir)?,
        DatasetFormat::Daphnet if dir.join(MANIFEST_FILE).exists() => DatasetManifest::read(dir)?,
        DatasetFormat::Daphnet => DatasetManifest::daphnet_default(),
    };

    let mut files = BTreeSet::new();
    for pattern in &manifest.recordings {
        let full = dir.join(pattern);
        let full = full.to_string_lossy();
        let paths = glob::glob(&full).map_err(|e| Error::Manifest(format!("bad glob `{pattern}`: {e}")))?;
        for p in paths {
            let p = p.map_err(|e| Error::Manifest(e.to_string()))?;
            if p.is_file() {
                files.insert(p);
            }
        }
    }
    if files.is_empty() {
        return Err(Error::Manifest(format!("no recording files match {:?}", manifest.recordings)));
    }

    let mut recordings = Vec::with_capacity(files.len());
    for file in &files {
        let rec = match format {
            DatasetFormat::Csv => read_recording_csv(file, &manifest.dataset_id, manifest.sampling_rate_hz)?,
            DatasetFormat::Daphnet => read_daphnet_file(file, &manifest.dataset_id)?,
        };
        if !manifest.sensor_locations.is_empty() {
            if let Some(c) = rec.channels.iter().find(|c| !manifest.sensor_locations.contains(&c.body_location)) {
                return Err(Error::Manifest(format!(
                    "{}: channel {} is not at a manifest sensor location",
                    file.display(),
                    c.column_name()
                )));
            }
        }
        recordings.push(rec);
    }

    let metadata = read_metadata_csv(&dir.join(&manifest.metadata), &manifest.dataset_id)?;
    let meta_ids: BTreeSet<&str> = metadata.iter().map(|m| m.subject_id.as_str()).collect();
    let rec_ids: BTreeSet<&str> = recordings.iter().map(|r| r.subject_id.as_str()).collect();
    if let Some(missing) = rec_ids.difference(&meta_ids).next() {
        return Err(Error::MissingMetadata(missing.to_string()));
    }
    if let Some(extra) = meta_ids.difference(&rec_ids).next() {
        return Err(Error::MetadataWithoutRecording(extra.to_string()));
    }
    Ok((recordings, metadata))
}

/// Subject id encoded in a recording file name: the stem up to an optional `__`.
fn subject_from_stem(stem: &str) -> String {
    stem.split("__").next().unwrap_or(stem).to_string()
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn malformed(file: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedRow {
        file: file.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn parse_label(file: &Path, line: usize, s: &str) -> Result<u8> {
    match s.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(malformed(file, line, format!("fog_label `{other}` is not 0 or 1"))),
    }
}

fn check_timestamps(file: &Path, times: &[f64], sampling_rate_hz: f64, first_line: usize) -> Result<()> {
    let max_step = 1.5 / sampling_rate_hz;
    for (i, w) in times.windows(2).enumerate() {
        let dt = w[1] - w[0];
        if dt <= 0.0 {
            return Err(Error::NonMonotonicTimestamps(file.to_path_buf()));
        }
        if dt > max_step {
            return Err(Error::GapInRecording {
                file: file.to_path_buf(),
                line: first_line + i + 1,
            });
        }
    }
    Ok(())
}

/// Read one recording CSV: `time_s,<loc>_<axis>...,fog_label`.
pub fn read_recording_csv(path: &Path, dataset_id: &str, sampling_rate_hz: f64) -> Result<SensorRecording> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let n = headers.len();
    if n < 3 || &headers[0] != "time_s" || &headers[n - 1] != "fog_label" {
        return Err(malformed(path, 1, "header must be time_s,<loc>_<axis>...,fog_label"));
    }
    let channels = headers
        .iter()
        .skip(1)
        .take(n - 2)
        .map(|h| h.parse::<ChannelDescriptor>())
        .collect::<Result<Vec<_>>>()
        .map_err(|e| malformed(path, 1, e.to_string()))?;
    let n_ch = channels.len();

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| malformed(path, line, e.to_string()))?;
        if row.len() != n {
            return Err(malformed(path, line, format!("expected {n} fields, found {}", row.len())));
        }
        let t: f64 = row[0]
            .parse()
            .map_err(|_| malformed(path, line, format!("time_s `{}` is not a number", &row[0])))?;
        times.push(t);
        for field in row.iter().skip(1).take(n_ch) {
            let v: f64 = field
                .parse()
                .map_err(|_| malformed(path, line, format!("value `{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(malformed(path, line, "non-finite sample value"));
            }
            values.push(v);
        }
        labels.push(parse_label(path, line, &row[n - 1])?);
    }
    check_timestamps(path, &times, sampling_rate_hz, 2)?;

    let samples = Array2::from_shape_vec((labels.len(), n_ch), values)
        .map_err(|e| malformed(path, 1, e.to_string()))?;
    let stem = file_stem(path);
    let rec = SensorRecording {
        subject_id: subject_from_stem(&stem),
        recording_id: stem,
        dataset_id: dataset_id.to_string(),
        sampling_rate_hz,
        channels,
        samples,
        labels,
    };
    rec.validate()?;
    Ok(rec)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => malformed(path, 1, format!("{other:?}")),
    }
}

/// Daphnet rows: time (ms), ankle xyz, thigh xyz, trunk xyz (mg), annotation
/// (0 = outside the protocol, 1 = no freeze, 2 = freeze).
fn read_daphnet_file(path: &Path, dataset_id: &str) -> Result<SensorRecording> {
    const RATE: f64 = 64.0;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut channels = Vec::with_capacity(9);
    for loc in [BodyLocation::Ankle, BodyLocation::Thigh, BodyLocation::LowerBack] {
        channels.extend(ChannelDescriptor::triaxial(loc));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 11 {
            return Err(malformed(path, line_no, format!("expected 11 fields, found {}", fields.len())));
        }
        let nums = fields
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| malformed(path, line_no, format!("`{f}` is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        times.push(nums[0] / 1000.0);
        values.extend(nums[1..10].iter().map(|mg| mg / 1000.0));
        labels.push(match nums[10] as i64 {
            0 | 1 if nums[10].fract() == 0.0 => 0,
            2 if nums[10].fract() == 0.0 => 1,
            _ => return Err(malformed(path, line_no, format!("annotation `{}` not in {{0,1,2}}", fields[10]))),
        });
    }
    check_timestamps(path, &times, RATE, 1)?;
    let samples =
        Array2::from_shape_vec((labels.len(), 9), values).map_err(|e| malformed(path, 1, e.to_string()))?;
    let stem = file_stem(path);
    // S01R02 -> S01
    let subject_id = match stem.find('R') {
        Some(pos) if stem.starts_with('S') => stem[..pos].to_string(),
        _ => subject_from_stem(&stem),
    };
    let rec = SensorRecording {
        recording_id: stem,
        subject_id,
        dataset_id: dataset_id.to_string(),
        sampling_rate_hz: RATE,
        channels,
        samples,
        labels,
    };
    rec.validate()?;
    Ok(rec)
}

/// Read `subject_id,sex,age_years,disease_duration_years`.
pub fn read_metadata_csv(path: &Path, dataset_id: &str) -> Result<Vec<SubjectMetadata>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let expected = ["subject_id", "sex", "age_years", "disease_duration_years"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(malformed(path, 1, format!("header must be {}", expected.join(","))));
    }
    let mut out = Vec::new();
    let mut seen = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| malformed(path, line, e.to_string()))?;
        let subject_id = row[0].to_string();
        if seen.insert(subject_id.clone(), line).is_some() {
            return Err(malformed(path, line, format!("duplicate subject `{subject_id}`")));
        }
        let sex = match row[1].to_ascii_uppercase().as_str() {
            "M" => Sex::Male,
            "F" => Sex::Female,
            other => return Err(malformed(path, line, format!("sex `{other}` is not M or F"))),
        };
        let age_years: f64 = row[2]
            .parse()
            .map_err(|_| malformed(path, line, "age_years is not a number"))?;
        let disease_duration_years: f64 = row[3]
            .parse()
            .map_err(|_| malformed(path, line, "disease_duration_years is not a number"))?;
        if !(age_years > 0.0 && age_years.is_finite()) {
            return Err(malformed(path, line, "age_years must be positive"));
        }
        if !(disease_duration_years >= 0.0 && disease_duration_years.is_finite()) {
            return Err(malformed(path, line, "disease_duration_years must be non-negative"));
        }
        out.push(SubjectMetadata {
            subject_id,
            sex,
            age_years,
            disease_duration_years,
            dataset_id: dataset_id.to_string(),
        });
    }
    Ok(out)
}

pub fn write_recording_csv(path: &Path, rec: &SensorRecording) -> Result<()> {
    let mut out = String::with_capacity(rec.len() * 16 * (rec.n_channels() + 2));
    out.push_str("time_s");
    for c in &rec.channels {
        out.push(',');
        out.push_str(&c.column_name());
    }
    out.push_str(",fog_label\n");
    for (i, row) in rec.samples.rows().into_iter().enumerate() {
        out.push_str(&format!("{}", i as f64 / rec.sampling_rate_hz));
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{}\n", rec.labels[i]));
    }
    write_file(path, out.as_bytes())
}

pub fn write_metadata_csv(path: &Path, metadata: &[SubjectMetadata]) -> Result<()> {
    let mut out = String::from("subject_id,sex,age_years,disease_duration_years\n");
    for m in metadata {
        let sex = match m.sex {
            Sex::Male => "M",
            Sex::Female => "F",
        };
        out.push_str(&format!("{},{sex},{},{}\n", m.subject_id, m.age_years, m.disease_duration_years));
    }
    write_file(path, out.as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
