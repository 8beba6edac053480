use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("subject {subject_id}: {path} line {line}: {message}")]
    SignalFile {
        subject_id: String,
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("subject {subject_id}: non-finite sample at {path} line {line}")]
    NonFiniteSample {
        subject_id: String,
        path: PathBuf,
        line: u64,
    },

    #[error("duplicate subject id {subject_id:?} (manifest entry {index})")]
    DuplicateSubject { subject_id: String, index: usize },

    #[error("subject {subject_id}: sprouting day {sprouting_day} precedes start day {start_day}")]
    SproutingBeforeStart {
        subject_id: String,
        start_day: chrono::NaiveDate,
        sprouting_day: chrono::NaiveDate,
    },

    #[error("subject {subject_id}: no ground-truth sprouting day")]
    MissingGroundTruth { subject_id: String },

    #[error("invalid recording {subject_id}: {message}")]
    InvalidRecording { subject_id: String, message: String },

    #[error("{what} {value} Hz is at or above the Nyquist frequency {nyquist} Hz")]
    AboveNyquist {
        what: &'static str,
        value: f64,
        nyquist: f64,
    },

    #[error("cannot downsample {from} Hz to {to} Hz: ratio is not a positive integer")]
    NonIntegerRatio { from: f64, to: f64 },

    #[error("window length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("feature layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("invalid scale plan: {0}")]
    ScalePlan(String),

    #[error("invalid training data: {0}")]
    Training(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no windows observed before day {observation_day} for subject {subject_id}")]
    NothingObserved {
        subject_id: String,
        observation_day: i64,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
