//! TOML run configuration. Keys mirror the long flags (with `_` for `-`);
//! a flag given on the command line overrides the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::CommonArgs;

/// `noise = "awgn:-5"` or `noise = ["raw", "awgn:-5"]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    pub fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub force: Option<bool>,
    pub json: Option<bool>,
    pub out: Option<PathBuf>,
    pub dataset: Option<String>,
    // synth
    pub per_class: Option<usize>,
    pub paper_ratio: Option<bool>,
    pub total: Option<usize>,
    pub range_bins: Option<usize>,
    pub segment_len: Option<usize>,
    // extract / evaluate
    pub noise: Option<OneOrMany>,
    pub window: Option<usize>,
    pub spectrograms: Option<bool>,
    pub classifier: Option<String>,
    pub schedule: Option<String>,
    pub features: Option<String>,
    pub importance_repeats: Option<usize>,
    pub skip_ablation: Option<bool>,
    pub single_feature: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<FileConfig> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::ConfigFile {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })
    }

    pub fn for_args(common: &CommonArgs) -> CliResult<FileConfig> {
        match &common.config {
            Some(p) => FileConfig::load(p),
            None => Ok(FileConfig::default()),
        }
    }
}

/// Settings every command resolves the same way.
#[derive(Debug, Clone)]
pub struct Shared {
    pub seed: u64,
    pub jobs: usize,
    pub force: bool,
    pub json: bool,
}

impl Shared {
    pub fn resolve(common: &CommonArgs, file: &FileConfig, problems: &mut Vec<String>) -> Shared {
        let jobs = common
            .jobs
            .or(file.jobs)
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
        if jobs == 0 {
            problems.push("jobs must be >= 1".into());
        }
        Shared {
            seed: common.seed.or(file.seed).unwrap_or(mdrobust::DEFAULT_SEED),
            jobs: jobs.max(1),
            force: common.force || file.force.unwrap_or(false),
            json: common.json || file.json.unwrap_or(false),
        }
    }
}

/// Flag first, then file, then a "missing" problem.
pub fn required<T: Clone>(flag: Option<T>, file: Option<T>, name: &str, problems: &mut Vec<String>) -> Option<T> {
    let v = flag.or(file);
    if v.is_none() {
        problems.push(format!("{name} is required"));
    }
    v
}

pub fn check(problems: Vec<String>) -> CliResult<()> {
    if problems.is_empty() {
        Ok(())
    } else {
        Err(mdrobust::Error::Config(problems).into())
    }
}
