use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // ingest
    #[error("no metadata row for subject `{0}`")]
    MissingMetadata(String),
    #[error("metadata lists subject `{0}` but no recording was found for it")]
    MetadataWithoutRecording(String),
    #[error("malformed row in {file}:{line}: {reason}")]
    MalformedRow {
        file: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("timestamps are not strictly increasing in {0}")]
    NonMonotonicTimestamps(PathBuf),
    #[error("missing sample rows in {file} near line {line}")]
    GapInRecording { file: PathBuf, line: usize },
    #[error("upsampling requested: {target_hz} Hz exceeds the source rate {source_hz} Hz")]
    UpsampleRequested { source_hz: f64, target_hz: f64 },
    #[error("channel layout does not match the scaling parameters")]
    ChannelMismatch,
    #[error("source and target share no comparable sensor placement")]
    NoCompatiblePlacement,
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("invalid dataset manifest: {0}")]
    Manifest(String),

    // windowing / features / phenotype
    #[error("recording has {len} samples, fewer than one window of {window_len}")]
    RecordingTooShort { len: usize, window_len: usize },
    #[error("window has {len} samples, fewer than {n_quantiles} quantiles")]
    WindowTooShort { len: usize, n_quantiles: usize },
    #[error("signal of {len} samples is shorter than one second at {sampling_rate_hz} Hz")]
    SignalTooShort { len: usize, sampling_rate_hz: f64 },
    #[error("band ({lo}, {hi}] Hz is outside [0, {nyquist}] Hz or empty")]
    BandOutOfRange { lo: f64, hi: f64, nyquist: f64 },

    // models
    #[error("training data contains a single class")]
    SingleClassTraining,
    #[error("input dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training loss became non-finite at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("model is incompatible with the input shape: {0}")]
    ShapeIncompatible(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),

    // fairness / mitigation
    #[error("all values of `{0}` are identical; a median split is impossible")]
    AllIdenticalValues(String),
    #[error("no FOG episodes to stratify")]
    NoEpisodes,
    #[error("group {0} is empty")]
    EmptyGroup(&'static str),
    #[error("unit `{0}` has no group assignment")]
    UnknownGroupMember(String),
    #[error("metric `{metric}` is not defined for attribute `{attribute}`")]
    MetricUndefined {
        metric: &'static str,
        attribute: &'static str,
    },
    #[error("group labels missing for attribute `{0}`")]
    MissingGroupLabels(String),
    #[error("metadata spans several datasets; dichotomize one dataset at a time")]
    MixedDatasets,

    // evaluation
    #[error("cannot plan {k} folds with every group represented in each test fold")]
    InfeasibleCoverage { k: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("at least two samples are needed, got {0}")]
    TooFewSamples(usize),

    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by invalid input data rather than configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MissingMetadata(_)
                | Error::MetadataWithoutRecording(_)
                | Error::MalformedRow { .. }
                | Error::NonMonotonicTimestamps(_)
                | Error::GapInRecording { .. }
                | Error::InvalidRecording(_)
                | Error::RecordingTooShort { .. }
                | Error::NoCompatiblePlacement
                | Error::AllIdenticalValues(_)
                | Error::NoEpisodes
                | Error::MixedDatasets
                | Error::InfeasibleCoverage { .. }
                | Error::SingleClassTraining
        )
    }
}
