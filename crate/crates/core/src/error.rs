use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),

    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),

    #[error("length mismatch: {0} vs {1} samples")]
    LengthMismatch(usize, usize),

    #[error("malformed WAV: {0}")]
    MalformedWav(String),

    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("empty audio file: {0}")]
    EmptyAudio(PathBuf),

    #[error("invalid STFT configuration: {0}")]
    InvalidStft(String),

    #[error("signal too short: {len} samples, need at least {needed}")]
    SignalTooShort { len: usize, needed: usize },

    #[error("invalid stimulus: {0}")]
    InvalidStimulus(String),

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("unknown preset: {0}")]
    UnknownPreset(String),

    #[error("zero-energy reference")]
    ZeroReference,

    #[error("channel count mismatch: {estimates} estimates vs {references} references")]
    ChannelMismatch { estimates: usize, references: usize },

    #[error("unsupported channel count {0}: {1}")]
    UnsupportedChannels(usize, &'static str),

    #[error("invalid analysis parameters: {0}")]
    InvalidAnalysis(String),

    #[error("no mixtures with voiced output channels")]
    NoUsableMixtures,

    #[error("invalid separator: {0}")]
    InvalidSeparator(String),

    #[error("external separator exited with {status}: {stderr}")]
    ExternalFailed { status: String, stderr: String },

    #[error("external separator timed out after {0:.1} s")]
    ExternalTimeout(f64),

    #[error("expected {expected} estimates, found {found}")]
    EstimateCount { expected: usize, found: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
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
}
