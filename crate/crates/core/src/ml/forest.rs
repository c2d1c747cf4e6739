//! Random Forest of depth-limited Gini CART trees.
//!
//! Splits are `x[f] <= v` with `v` taken from the training values
//! themselves (the lower side of the gap), so a strictly increasing
//! transform of any feature leaves every prediction unchanged.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 300,
            max_depth: 5,
            seed: crate::DEFAULT_SEED,
        }
    }
}

/// Flat tree arrays. A node is a leaf when `feature[n]` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<Option<usize>>,
    pub threshold: Vec<f64>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    /// Majority class at the node.
    pub value: Vec<usize>,
    pub depth: Vec<usize>,
}

impl Tree {
    fn push_leaf(&mut self, class: usize, depth: usize) -> usize {
        self.feature.push(None);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(class);
        self.depth.push(depth);
        self.feature.len() - 1
    }

    pub fn predict_row(&self, x: ArrayView1<f64>) -> usize {
        let mut node = 0;
        while let Some(f) = self.feature[node] {
            node = if x[f] <= self.threshold[node] {
                self.left[node]
            } else {
                self.right[node]
            };
        }
        self.value[node]
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub params: ForestParams,
    pub n_features: usize,
    pub n_classes: usize,
    /// Training labels had a single class; every tree is one leaf.
    pub degenerate: bool,
    /// Accuracy of out-of-bag votes over samples left out by at least one tree.
    pub oob_accuracy: Option<f64>,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

struct Builder<'a, R: Rng> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    n_classes: usize,
    max_depth: usize,
    mtry: usize,
    rng: R,
    tree: Tree,
}

impl<R: Rng> Builder<'_, R> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &r in rows {
            c[self.y[r]] += 1;
        }
        c
    }

    /// Best `(feature, threshold, gain)` among `mtry` random features.
    fn best_split(&mut self, rows: &[usize], parent: f64) -> Option<(usize, f64, f64)> {
        let d = self.x.ncols();
        let mut features: Vec<usize> = sample(&mut self.rng, d, self.mtry).into_vec();
        features.sort_unstable();
        let n = rows.len();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order: Vec<usize> = rows.to_vec();
        for f in features {
            order.sort_by(|&a, &b| self.x[[a, f]].total_cmp(&self.x[[b, f]]).then(a.cmp(&b)));
            let mut left = vec![0usize; self.n_classes];
            let mut right = self.counts(rows);
            for s in 0..n - 1 {
                let r = order[s];
                left[self.y[r]] += 1;
                right[self.y[r]] -= 1;
                let v = self.x[[r, f]];
                let next = self.x[[order[s + 1], f]];
                if v == next {
                    continue;
                }
                let nl = s + 1;
                let nr = n - nl;
                let child = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
                let gain = parent - child;
                if gain > 1e-12 && best.is_none_or(|b| gain > b.2) {
                    best = Some((f, v, gain));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        let counts = self.counts(rows);
        let node = self.tree.push_leaf(majority(&counts), depth);
        let impurity = gini(&counts, rows.len());
        if depth >= self.max_depth || rows.len() < 2 || impurity == 0.0 {
            return node;
        }
        let Some((f, thr, _)) = self.best_split(rows, impurity) else {
            return node;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[[i, f]] <= thr);
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.tree.feature[node] = Some(f);
        self.tree.threshold[node] = thr;
        self.tree.left[node] = left;
        self.tree.right[node] = right;
        node
    }
}

/// Trains `n_estimators` trees on bootstrap samples with `⌈√d⌉` candidate
/// features per split. Each tree's randomness is keyed by (seed, tree index).
pub fn rf_train(x: ArrayView2<f64>, y: &[usize], params: &ForestParams) -> Result<ForestModel> {
    let n = x.nrows();
    let d = x.ncols();
    if n == 0 || d == 0 {
        return Err(Error::InvalidParam("empty training matrix".into()));
    }
    if n != y.len() {
        return Err(Error::DimensionMismatch(format!("{n} rows vs {} labels", y.len())));
    }
    if params.n_estimators == 0 {
        return Err(Error::InvalidParam("n_estimators must be >= 1".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("training features must be finite".into()));
    }
    let n_classes = y.iter().copied().max().unwrap() + 1;
    let distinct = {
        let mut c = y.to_vec();
        c.sort_unstable();
        c.dedup();
        c.len()
    };
    let mtry = ((d as f64).sqrt().ceil() as usize).clamp(1, d);

    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut oob_votes = vec![vec![0usize; n_classes]; n];
    for t in 0..params.n_estimators {
        let mut rng = seed::rng(seed::derive(params.seed, t as u64));
        let mut in_bag = vec![false; n];
        let rows: Vec<usize> = (0..n)
            .map(|_| {
                let r = rng.random_range(0..n);
                in_bag[r] = true;
                r
            })
            .collect();
        let mut b = Builder {
            x,
            y,
            n_classes,
            max_depth: params.max_depth,
            mtry,
            rng,
            tree: Tree {
                feature: vec![],
                threshold: vec![],
                left: vec![],
                right: vec![],
                value: vec![],
                depth: vec![],
            },
        };
        b.grow(&rows, 0);
        let tree = b.tree;
        for (i, bagged) in in_bag.iter().enumerate() {
            if !bagged {
                oob_votes[i][tree.predict_row(x.row(i))] += 1;
            }
        }
        trees.push(tree);
    }

    let scored: Vec<(usize, usize)> = oob_votes
        .iter()
        .enumerate()
        .filter(|(_, v)| v.iter().any(|&c| c > 0))
        .map(|(i, v)| (i, majority(v)))
        .collect();
    let oob_accuracy = (!scored.is_empty())
        .then(|| scored.iter().filter(|(i, p)| y[*i] == *p).count() as f64 / scored.len() as f64);

    Ok(ForestModel {
        trees,
        params: *params,
        n_features: d,
        n_classes,
        degenerate: distinct < 2,
        oob_accuracy,
    })
}

/// Majority vote over trees; ties go to the lower class id.
pub fn rf_predict(model: &ForestModel, x: ArrayView2<f64>) -> Result<Vec<usize>> {
    if x.ncols() != model.n_features {
        return Err(Error::DimensionMismatch(format!(
            "forest expects {} features, got {}",
            model.n_features,
            x.ncols()
        )));
    }
    Ok(x
        .rows()
        .into_iter()
        .map(|row| {
            let mut votes = vec![0usize; model.n_classes];
            for t in &model.trees {
                votes[t.predict_row(row)] += 1;
            }
            majority(&votes)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(n_per: usize, seed_v: u64) -> (Array2<f64>, Vec<usize>) {
        let centers = [[0.0, 0.0], [5.0, 5.0], [-5.0, 5.0]];
        let mut rng = seed::rng(seed_v);
        let mut x = Array2::zeros((3 * n_per, 2));
        let mut y = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for i in 0..n_per {
                let r = c * n_per + i;
                for j in 0..2 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x[[r, j]] = center[j] + z;
                }
                y.push(c);
            }
        }
        (x, y)
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[5, 0], 5), 0.0);
        assert!((gini(&[2, 2], 4) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn blobs_oob_accuracy() {
        let (x, y) = blobs(40, 3);
        let m = rf_train(x.view(), &y, &ForestParams::default()).unwrap();
        assert!(m.oob_accuracy.unwrap() > 0.9);
        assert!(m.trees.iter().all(|t| t.max_depth() <= 5));
        assert_eq!(rf_predict(&m, x.view()).unwrap(), y);
    }

    #[test]
    fn deterministic_given_seed() {
        let (x, y) = blobs(20, 4);
        let p = ForestParams {
            n_estimators: 25,
            ..ForestParams::default()
        };
        let a = rf_train(x.view(), &y, &p).unwrap();
        let b = rf_train(x.view(), &y, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_is_constant() {
        let x = array![[1.0], [2.0], [3.0]];
        let m = rf_train(x.view(), &[2, 2, 2], &ForestParams::default()).unwrap();
        assert!(m.degenerate);
        assert_eq!(rf_predict(&m, array![[10.0]].view()).unwrap(), vec![2]);
        assert!(m.trees.iter().all(|t| t.n_nodes() == 1));
    }

    #[test]
    fn errors() {
        let x = array![[1.0], [2.0]];
        assert!(rf_train(x.view(), &[0], &ForestParams::default()).is_err());
        let m = rf_train(x.view(), &[0, 1], &ForestParams::default()).unwrap();
        assert!(rf_predict(&m, array![[1.0, 2.0]].view()).is_err());
    }
}
