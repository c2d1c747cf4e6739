use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing manifest at {0}")]
    MissingManifest(PathBuf),
    #[error("malformed manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown class label {0:?}")]
    UnknownLabel(String),
    #[error("non-finite sample at range bin {range_bin}, slow-time {slow_time}")]
    NonFinite { range_bin: usize, slow_time: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("aliasing: micro-Doppler extent {extent_hz} Hz exceeds PRF/2 = {nyquist_hz} Hz")]
    Aliasing { extent_hz: f64, nyquist_hz: f64 },
    #[error("empty segment {0}")]
    EmptySegment(usize),
    #[error("segment {0} carries no signal power")]
    ZeroPower(usize),
    #[error("degenerate spectrogram for measurement {0}: all bins are zero")]
    DegenerateSpectrogram(String),
    #[error("every spectrogram column is padding")]
    AllPadded,
    #[error("invalid probability mass function: {0}")]
    InvalidPmf(String),
    #[error("malformed noise spec {input:?}: {reason}")]
    NoiseSpecParse { input: String, reason: String },
    #[error("training data must contain at least two classes")]
    SingleClass,
    #[error("SMO did not converge within {passes} passes (KKT violation {residual:.3e})")]
    NonConvergence { passes: usize, residual: f64 },
    #[error("class {class} has {count} measurements, fewer than {needed} needed for the split")]
    ClassTooSmall {
        class: String,
        count: usize,
        needed: usize,
    },
    #[error("leakage detected: {0}")]
    Leakage(String),
    #[error("degenerate fold {fold}: {reason}")]
    DegenerateFold { fold: usize, reason: String },
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// Short stable identifier of the error family, for machine parsing.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MissingManifest(_) | Error::Manifest { .. } => "manifest",
            Error::DimensionMismatch(_) => "dimension",
            Error::UnknownLabel(_) => "label",
            Error::NonFinite { .. } => "non-finite",
            Error::InvalidParam(_) => "param",
            Error::Aliasing { .. } => "aliasing",
            Error::EmptySegment(_) | Error::ZeroPower(_) => "segment",
            Error::DegenerateSpectrogram(_) | Error::AllPadded => "degenerate",
            Error::InvalidPmf(_) => "pmf",
            Error::NoiseSpecParse { .. } => "noise-spec",
            Error::SingleClass => "single-class",
            Error::NonConvergence { .. } => "convergence",
            Error::ClassTooSmall { .. } => "split",
            Error::Leakage(_) => "leakage",
            Error::DegenerateFold { .. } => "fold",
            Error::Config(_) => "config",
            Error::Serde(_) => "serde",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
