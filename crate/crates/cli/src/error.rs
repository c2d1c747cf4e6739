use std::path::{Path, PathBuf};

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const NOISE_USAGE: &str = "raw | awgn:<dB> | phase:<deg> | combined:<dB>:<deg>";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] mdrobust::Error),
    #[error("{source}; usage: --noise {NOISE_USAGE}")]
    NoiseSpec { source: mdrobust::Error },
    #[error("output directory {0} is not empty; pass --force to overwrite")]
    OutputExists(PathBuf),
    #[error("no measurement containers under {0}")]
    EmptyDataset(PathBuf),
    #[error("dataset {0} does not exist")]
    MissingDataset(PathBuf),
    #[error("bad dataset reference {0:?}; expected a directory or synth:<per-class|paper-ratio>:<n>[:<seed>]")]
    DatasetRef(String),
    #[error("config file {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.class(),
            CliError::NoiseSpec { .. } => "noise-spec",
            CliError::OutputExists(_) => "output-exists",
            CliError::EmptyDataset(_) | CliError::MissingDataset(_) | CliError::DatasetRef(_) => "dataset",
            CliError::ConfigFile { .. } => "config",
            CliError::Io { .. } => "io",
            CliError::Usage(_) => "usage",
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Parses a noise spec, attaching the grammar to any parse error.
pub fn parse_noise(s: &str) -> CliResult<mdrobust::NoiseSpec> {
    s.parse().map_err(|source| match source {
        e @ mdrobust::Error::NoiseSpecParse { .. } => CliError::NoiseSpec { source: e },
        e => CliError::Core(e),
    })
}
