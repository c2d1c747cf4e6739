//! Experiment protocol: measurement-level splits, cross-validated noise
//! sweeps, single-feature runs, permutation importance and ablation.

pub mod config;
pub mod protocol;
pub mod report;
pub mod split;
pub mod table;

pub use config::{ablation_subsets, parse_feature_set, ClassifierKind, ExperimentConfig};
pub use protocol::{cross_validate, holdout_confusion, pooled_importance, Experiment, Trained};
pub use report::{AblationRow, Aggregate, ConditionReport, EvalReport, FoldRecord, ImportanceMap};
pub use split::{make_split, make_split_with, SplitPlan};
pub use table::{FeatureCache, FeatureRow, FeatureTable};
