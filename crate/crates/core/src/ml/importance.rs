//! Permutation importance: the drop in macro-F1 when one feature column is
//! shuffled while the others stay fixed.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ml::metrics::macro_f1;
use crate::seed;

pub const DEFAULT_REPEATS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub mean_drop: f64,
    /// Population standard deviation over repeats.
    pub std_drop: f64,
}

impl FeatureImportance {
    pub fn from_drops(drops: &[f64]) -> Self {
        let n = drops.len() as f64;
        let mean = drops.iter().sum::<f64>() / n;
        let var = drops.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
        FeatureImportance {
            mean_drop: mean,
            std_drop: var.sqrt(),
        }
    }
}

/// Importance with caller-supplied permutations. `permutation(j, r)` returns
/// the row order used for column `j` in repeat `r`: row `i` receives the
/// value originally at row `perm[i]`.
pub fn permutation_importance_with<P, G>(
    predict: P,
    x: ArrayView2<f64>,
    y: &[usize],
    k: usize,
    n_repeats: usize,
    mut permutation: G,
) -> Result<Vec<FeatureImportance>>
where
    P: Fn(ArrayView2<f64>) -> Result<Vec<usize>>,
    G: FnMut(usize, usize) -> Vec<usize>,
{
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidParam(format!(
            "permutation importance needs at least 2 rows, got {n}"
        )));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("{n} rows vs {} labels", y.len())));
    }
    if n_repeats == 0 {
        return Err(Error::InvalidParam("n_repeats must be >= 1".into()));
    }
    let baseline = macro_f1(y, &predict(x)?, k)?;
    let mut shuffled: Array2<f64> = x.to_owned();
    let mut out = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let mut drops = Vec::with_capacity(n_repeats);
        for r in 0..n_repeats {
            let perm = permutation(j, r);
            if perm.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "permutation of length {} for {n} rows",
                    perm.len()
                )));
            }
            for (i, &src) in perm.iter().enumerate() {
                shuffled[[i, j]] = x[[src, j]];
            }
            drops.push(baseline - macro_f1(y, &predict(shuffled.view())?, k)?);
        }
        shuffled.column_mut(j).assign(&x.column(j));
        out.push(FeatureImportance::from_drops(&drops));
    }
    Ok(out)
}

/// Seeded row permutation for (feature, repeat); independent of call order.
pub fn seeded_permutation(n: usize, seed_v: u64, feature: usize, repeat: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(seed::derive(seed::derive(seed_v, feature as u64), repeat as u64));
    perm.shuffle(&mut rng);
    perm
}

pub fn permutation_importance<P>(
    predict: P,
    x: ArrayView2<f64>,
    y: &[usize],
    k: usize,
    n_repeats: usize,
    seed_v: u64,
) -> Result<Vec<FeatureImportance>>
where
    P: Fn(ArrayView2<f64>) -> Result<Vec<usize>>,
{
    let n = x.nrows();
    permutation_importance_with(predict, x, y, k, n_repeats, |j, r| seeded_permutation(n, seed_v, j, r))
}
