//! Report types and their flat-table renderings.

use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::config::ClassifierKind;
use crate::features::Feature;
use crate::ingest::Class;
use crate::ml::{metrics::Metrics, FeatureImportance};
use crate::noise::NoiseSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: Metrics,
}

/// Fold-level summary. Standard deviations are population (divide by n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub median_f1: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_pop(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

impl Aggregate {
    pub fn from_folds(folds: &[FoldRecord]) -> Aggregate {
        let pick = |f: fn(&Metrics) -> f64| folds.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>();
        let acc = pick(|m| m.accuracy);
        let f1 = pick(|m| m.macro_f1);
        Aggregate {
            mean_accuracy: mean(&acc),
            std_accuracy: std_pop(&acc),
            mean_precision: mean(&pick(|m| m.macro_precision)),
            mean_recall: mean(&pick(|m| m.macro_recall)),
            mean_f1: mean(&f1),
            std_f1: std_pop(&f1),
            median_f1: median(&f1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: Feature,
    pub mean_drop: f64,
    pub std_drop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub noise: NoiseSpec,
    pub folds: Vec<FoldRecord>,
    pub aggregate: Aggregate,
    pub importance: Option<Vec<ImportanceEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub classifier: ClassifierKind,
    pub feature_set: Vec<Feature>,
    pub seed: u64,
    pub conditions: Vec<ConditionReport>,
    /// Rows are true classes, columns predictions; raw data, model trained
    /// on all folds and scored on the holdout.
    pub holdout_confusion: Option<Array2<u64>>,
}

fn spec_cols(s: &NoiseSpec) -> String {
    format!("{},{},{},{}", s, s.mode.as_str(), s.param_string(), s.severity)
}

impl EvalReport {
    pub fn condition(&self, spec: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.noise.to_string() == spec)
    }

    /// Largest gap between stored aggregates and a recomputation from folds.
    pub fn aggregate_discrepancy(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.conditions {
            let a = Aggregate::from_folds(&c.folds);
            let s = c.aggregate;
            for (x, y) in [
                (a.mean_accuracy, s.mean_accuracy),
                (a.std_accuracy, s.std_accuracy),
                (a.mean_precision, s.mean_precision),
                (a.mean_recall, s.mean_recall),
                (a.mean_f1, s.mean_f1),
                (a.std_f1, s.std_f1),
                (a.median_f1, s.median_f1),
            ] {
                worst = worst.max((x - y).abs());
            }
        }
        worst
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn folds_csv(&self) -> String {
        let mut out = String::from(
            "noise,noise_mode,noise_param,severity,fold,n_train,n_test,accuracy,macro_precision,macro_recall,macro_f1\n",
        );
        for c in &self.conditions {
            for f in &c.folds {
                let m = &f.metrics;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    spec_cols(&c.noise),
                    f.fold,
                    f.n_train,
                    f.n_test,
                    m.accuracy,
                    m.macro_precision,
                    m.macro_recall,
                    m.macro_f1
                );
            }
        }
        out
    }

    pub fn aggregate_csv(&self) -> String {
        let mut out = String::from(
            "noise,noise_mode,noise_param,severity,mean_accuracy,std_accuracy,mean_precision,mean_recall,mean_f1,std_f1,median_f1\n",
        );
        for c in &self.conditions {
            let a = &c.aggregate;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                spec_cols(&c.noise),
                a.mean_accuracy,
                a.std_accuracy,
                a.mean_precision,
                a.mean_recall,
                a.mean_f1,
                a.std_f1,
                a.median_f1
            );
        }
        out
    }

    /// Empty (header only) unless importance was computed.
    pub fn importance_csv(&self) -> String {
        let mut out = String::from("noise,noise_mode,noise_param,severity,feature,mean_drop,std_drop\n");
        for c in &self.conditions {
            for e in c.importance.iter().flatten() {
                let _ = writeln!(out, "{},{},{},{}", spec_cols(&c.noise), e.feature, e.mean_drop, e.std_drop);
            }
        }
        out
    }

    pub fn confusion_csv(&self) -> Option<String> {
        self.holdout_confusion.as_ref().map(confusion_csv)
    }
}

pub fn confusion_csv(cm: &Array2<u64>) -> String {
    let names: Vec<&str> = Class::ALL.iter().map(|c| c.as_str()).collect();
    let mut out = format!("true\\pred,{}\n", names.join(","));
    for (i, row) in cm.rows().into_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{},{}", names.get(i).copied().unwrap_or("?"), cells.join(","));
    }
    out
}

/// Permutation importance per (feature, condition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceMap {
    pub features: Vec<Feature>,
    pub specs: Vec<NoiseSpec>,
    /// `values[feature][spec]`.
    pub values: Vec<Vec<FeatureImportance>>,
}

impl ImportanceMap {
    pub fn get(&self, feature: Feature, spec: usize) -> Option<FeatureImportance> {
        let i = self.features.iter().position(|&f| f == feature)?;
        self.values[i].get(spec).copied()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,noise,noise_mode,noise_param,severity,mean_drop,std_drop\n");
        for (f, row) in self.features.iter().zip(&self.values) {
            for (s, v) in self.specs.iter().zip(row) {
                let _ = writeln!(out, "{f},{},{},{}", spec_cols(s), v.mean_drop, v.std_drop);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub features: Vec<Feature>,
    pub noise: NoiseSpec,
    pub folds: Vec<FoldRecord>,
    pub aggregate: Aggregate,
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from(
        "subset,n_features,features,noise,mean_accuracy,std_accuracy,mean_precision,mean_recall,mean_f1,std_f1\n",
    );
    for r in rows {
        let names: Vec<&str> = r.features.iter().map(|f| f.name()).collect();
        let a = &r.aggregate;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.name,
            r.features.len(),
            names.join(";"),
            r.noise,
            a.mean_accuracy,
            a.std_accuracy,
            a.mean_precision,
            a.mean_recall,
            a.mean_f1,
            a.std_f1
        );
    }
    out
}
