use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced anywhere in the analysis, training and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed wav header: {0}")]
    MalformedWav(String),
    #[error("unsupported wav encoding: {0}")]
    UnsupportedWav(String),
    #[error("invalid corpus spec: {0}")]
    InvalidCorpusSpec(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("invalid frame grid: {0}")]
    InvalidGrid(String),
    #[error("empty waveform")]
    EmptyWaveform,
    #[error("length mismatch: {what} (expected {expected}, got {actual})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("unstable LP filter: {0}")]
    UnstableFilter(String),
    #[error("LSF conversion failed: {0}")]
    LsfConversion(String),
    #[error("LSF ordering violated: {0}")]
    LsfOrdering(String),
    #[error("coefficient track source mismatch: {0}")]
    TrackSource(String),
    #[error("silent utterance: excitation has zero peak")]
    SilentExcitation,
    #[error("NaN input to mu-law encoder")]
    NanInput,
    #[error("invalid surrogate config: {0}")]
    InvalidSurrogate(String),
    #[error("invalid network config: {0}")]
    InvalidNetConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty valid range")]
    EmptyRange,
    #[error("training precondition failed: {0}")]
    Training(String),
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error("feature container format error: {0}")]
    Container(String),
    #[error("utterance {id}: {source}")]
    Utterance {
        id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error("excitation decomposition residual {0:e} above tolerance")]
    Decomposition(f64),
    #[error("metric error: {0}")]
    Metric(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_utterance(self, id: &str) -> Self {
        Error::Utterance {
            id: id.to_string(),
            source: Box::new(self),
        }
    }
}
