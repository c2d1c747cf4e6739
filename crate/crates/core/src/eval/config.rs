use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Feature, FeatureConfig};
use crate::ml::{ForestParams, SvmParams};
use crate::noise::NoiseSpec;
use crate::spectro::DEFAULT_WINDOW;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "svm-linear")]
    SvmLinearSingle,
    #[serde(rename = "svm-rbf")]
    SvmRbfMulti,
    #[serde(rename = "rf")]
    RandomForest,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::SvmLinearSingle => "svm-linear",
            ClassifierKind::SvmRbfMulti => "svm-rbf",
            ClassifierKind::RandomForest => "rf",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "svm-linear" | "linear" => Ok(ClassifierKind::SvmLinearSingle),
            "svm-rbf" | "svm" | "rbf" => Ok(ClassifierKind::SvmRbfMulti),
            "rf" | "random-forest" | "forest" => Ok(ClassifierKind::RandomForest),
            other => Err(Error::InvalidParam(format!(
                "unknown classifier {other:?} (expected rf, svm-rbf or svm-linear)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub feature_set: Vec<Feature>,
    pub classifier: ClassifierKind,
    pub noise_specs: Vec<NoiseSpec>,
    pub seed: u64,
    pub window: usize,
    pub features: FeatureConfig,
    pub svm_linear: SvmParams,
    pub svm_rbf: SvmParams,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub importance_repeats: usize,
}

impl ExperimentConfig {
    pub fn new(feature_set: Vec<Feature>, classifier: ClassifierKind, noise_specs: Vec<NoiseSpec>) -> Self {
        let rf = ForestParams::default();
        ExperimentConfig {
            feature_set,
            classifier,
            noise_specs,
            seed: crate::DEFAULT_SEED,
            window: DEFAULT_WINDOW,
            features: FeatureConfig::default(),
            svm_linear: SvmParams::linear(),
            svm_rbf: SvmParams::rbf(),
            n_estimators: rf.n_estimators,
            max_depth: rf.max_depth,
            importance_repeats: crate::ml::importance::DEFAULT_REPEATS,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Noise specs carrying the experiment seed.
    pub fn seeded_specs(&self) -> Vec<NoiseSpec> {
        self.noise_specs.iter().map(|s| s.with_seed(self.seed)).collect()
    }

    pub fn forest_params(&self) -> ForestParams {
        ForestParams {
            n_estimators: self.n_estimators,
            max_depth: self.max_depth,
            seed: self.seed,
        }
    }

    /// Every problem found, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = validate_feature_set(&self.feature_set) {
            out.push(e.to_string());
        }
        if self.classifier == ClassifierKind::SvmLinearSingle && self.feature_set.len() != 1 {
            out.push(format!(
                "svm-linear takes exactly one feature, got {}",
                self.feature_set.len()
            ));
        }
        if self.noise_specs.is_empty() {
            out.push("no noise conditions given".into());
        }
        for s in &self.noise_specs {
            if let Err(e) = s.validate() {
                out.push(e.to_string());
            }
        }
        let mut seen = HashSet::new();
        for s in &self.noise_specs {
            if !seen.insert(s.to_string()) {
                out.push(format!("noise condition {s} listed twice"));
            }
        }
        if self.window < 1 {
            out.push("window must be >= 1".into());
        }
        if let Err(e) = self.features.validate() {
            out.push(e.to_string());
        }
        if self.n_estimators == 0 {
            out.push("n_estimators must be >= 1".into());
        }
        if self.importance_repeats == 0 {
            out.push("importance repeats must be >= 1".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }
}

pub fn validate_feature_set(features: &[Feature]) -> Result<()> {
    if features.is_empty() {
        return Err(Error::InvalidParam("feature set is empty".into()));
    }
    let mut seen = HashSet::new();
    for f in features {
        if !seen.insert(*f) {
            return Err(Error::InvalidParam(format!("feature {f} listed twice")));
        }
    }
    Ok(())
}

/// A named feature set: `selected5`, `full10`, or a comma-separated list.
pub fn parse_feature_set(s: &str) -> Result<Vec<Feature>> {
    let v = match s.trim() {
        "selected5" | "selected" => Feature::SELECTED.to_vec(),
        "full10" | "full" | "all" => Feature::ALL.to_vec(),
        list => list.split(',').map(|p| p.trim().parse()).collect::<Result<Vec<Feature>>>()?,
    };
    validate_feature_set(&v)?;
    Ok(v)
}

/// The six ablation subsets, in report order.
pub fn ablation_subsets() -> Vec<(String, Vec<Feature>)> {
    let sel = Feature::SELECTED.to_vec();
    let with = |extra: &[Feature]| {
        let mut v = sel.clone();
        v.extend(extra.iter().filter(|f| !sel.contains(f)));
        v
    };
    let without = |f: Feature| sel.iter().copied().filter(|&g| g != f).collect::<Vec<_>>();
    vec![
        ("selected".into(), sel.clone()),
        ("all".into(), Feature::ALL.to_vec()),
        ("selected+doppler".into(), with(&Feature::DOPPLER)),
        ("selected+statistical".into(), with(&Feature::STATISTICAL)),
        ("selected-sler".into(), without(Feature::Sler)),
        ("selected-temporal_energy_variance".into(), without(Feature::TemporalEnergyVariance)),
    ]
}
