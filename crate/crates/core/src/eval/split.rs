use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Class;
use crate::seed;

pub const HOLDOUT_FRACTION: f64 = 0.2;
pub const N_FOLDS: usize = 5;

/// Measurement-level partition: a stratified holdout plus stratified CV
/// folds over the remainder. All id lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub holdout: Vec<String>,
    pub folds: Vec<Vec<String>>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn n_folds(&self) -> usize {
        self.folds.len()
    }

    /// Ids of every fold except `fold`, sorted.
    pub fn train_ids(&self, fold: usize) -> Vec<String> {
        let mut ids: Vec<String> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != fold)
            .flat_map(|(_, ids)| ids.iter().cloned())
            .collect();
        ids.sort();
        ids
    }

    /// All non-holdout ids, sorted.
    pub fn pool_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.folds.iter().flatten().cloned().collect();
        ids.sort();
        ids
    }

    /// Checks partition, disjointness and stratification against `labels`.
    pub fn check(&self, labels: &[(String, Class)]) -> Result<()> {
        let mut seen = HashSet::new();
        for id in self.holdout.iter().chain(self.folds.iter().flatten()) {
            if !seen.insert(id.as_str()) {
                return Err(Error::Leakage(format!("id {id} assigned more than once")));
            }
        }
        let all: HashSet<&str> = labels.iter().map(|(id, _)| id.as_str()).collect();
        if seen != all {
            return Err(Error::Leakage("split does not cover exactly the labelled ids".into()));
        }
        let class_of: BTreeMap<&str, Class> = labels.iter().map(|(id, c)| (id.as_str(), *c)).collect();
        let k = self.folds.len() as f64;
        for class in Class::ALL {
            let pool = self
                .folds
                .iter()
                .flatten()
                .filter(|id| class_of[id.as_str()] == class)
                .count() as f64;
            for (f, fold) in self.folds.iter().enumerate() {
                let n = fold.iter().filter(|id| class_of[id.as_str()] == class).count() as f64;
                if (n - pool / k).abs() > 1.0 {
                    return Err(Error::Leakage(format!(
                        "fold {f} holds {n} {class} measurements, proportional share is {:.2}",
                        pool / k
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn make_split(labels: &[(String, Class)], seed: u64) -> Result<SplitPlan> {
    make_split_with(labels, seed, HOLDOUT_FRACTION, N_FOLDS)
}

/// Stratified holdout of `round(fraction · n_class)` per class, then
/// round-robin fold assignment of each shuffled class. The fold cursor
/// carries over between classes so fold sizes stay balanced.
pub fn make_split_with(labels: &[(String, Class)], seed_v: u64, holdout_fraction: f64, n_folds: usize) -> Result<SplitPlan> {
    if n_folds < 2 {
        return Err(Error::InvalidParam("need at least 2 folds".into()));
    }
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::InvalidParam(format!(
            "holdout fraction must lie in [0, 1), got {holdout_fraction}"
        )));
    }
    let mut by_class: BTreeMap<Class, Vec<String>> = BTreeMap::new();
    let mut unique = HashSet::new();
    for (id, class) in labels {
        if !unique.insert(id.as_str()) {
            return Err(Error::InvalidParam(format!("duplicate measurement id {id}")));
        }
        by_class.entry(*class).or_default().push(id.clone());
    }

    let mut holdout = Vec::new();
    let mut folds = vec![Vec::new(); n_folds];
    let mut cursor = 0;
    for (class, mut ids) in by_class {
        ids.sort();
        let mut rng = seed::rng(seed::derive_tag(seed_v, class.as_str()));
        ids.shuffle(&mut rng);
        let n_hold = (holdout_fraction * ids.len() as f64).round() as usize;
        let pool = &ids[n_hold..];
        if pool.len() < n_folds {
            return Err(Error::ClassTooSmall {
                class: class.to_string(),
                count: pool.len(),
                needed: n_folds,
            });
        }
        holdout.extend_from_slice(&ids[..n_hold]);
        for (i, id) in pool.iter().enumerate() {
            folds[(cursor + i) % n_folds].push(id.clone());
        }
        cursor = (cursor + pool.len()) % n_folds;
    }
    holdout.sort();
    folds.iter_mut().for_each(|f| f.sort());
    Ok(SplitPlan {
        holdout,
        folds,
        seed: seed_v,
    })
}
