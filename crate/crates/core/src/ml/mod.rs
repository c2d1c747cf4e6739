//! Classifiers and evaluation metrics.
//!
//! Feature matrices are `ndarray::Array2<f64>` with one row per sample;
//! labels are dense integer class ids `0..k`.

pub mod forest;
pub mod importance;
pub mod labels;
pub mod metrics;
pub mod scaler;
pub mod svm;

pub use forest::{rf_predict, rf_train, ForestModel, ForestParams};
pub use importance::{permutation_importance, permutation_importance_with, FeatureImportance};
pub use labels::{decode_labels, encode_labels};
pub use metrics::{compute_metrics, Metrics};
pub use scaler::{apply_scaler, fit_scaler, ScalerParams};
pub use svm::{svm_predict, svm_train, Kernel, SvmModel, SvmParams};
