use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accuracy plus macro-averaged precision, recall and F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Rows are true classes, columns predictions.
    pub confusion: Array2<u64>,
    /// Classes whose precision or recall was 0/0 (scored as 0).
    pub degenerate_classes: Vec<usize>,
}

pub fn compute_metrics(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<Metrics> {
    if y_true.is_empty() {
        return Err(Error::InvalidParam("metrics of an empty prediction set".into()));
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut confusion = Array2::<u64>::zeros((k, k));
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= k || p >= k {
            return Err(Error::InvalidParam(format!("label {} outside 0..{k}", t.max(p))));
        }
        confusion[[t, p]] += 1;
    }
    let total = y_true.len() as f64;
    let correct: u64 = (0..k).map(|c| confusion[[c, c]]).sum();

    let mut degenerate = Vec::new();
    let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
    for c in 0..k {
        let tp = confusion[[c, c]] as f64;
        let predicted: u64 = confusion.column(c).sum();
        let actual: u64 = confusion.row(c).sum();
        if predicted == 0 || actual == 0 {
            degenerate.push(c);
        }
        let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
        let recall = if actual > 0 { tp / actual as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        sp += precision;
        sr += recall;
        sf += f1;
    }
    let kf = k as f64;
    Ok(Metrics {
        accuracy: correct as f64 / total,
        macro_precision: sp / kf,
        macro_recall: sr / kf,
        macro_f1: sf / kf,
        confusion,
        degenerate_classes: degenerate,
    })
}

/// Macro-F1 only; shorthand used by permutation importance.
pub fn macro_f1(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<f64> {
    compute_metrics(y_true, y_pred, k).map(|m| m.macro_f1)
}
