//! Support vector classification trained by sequential minimal optimization.
//!
//! Each binary sub-problem solves the C-SVC dual
//!
//! ```text
//! min_α ½ αᵀQα − eᵀα   s.t.  0 ≤ α_i ≤ C,  yᵀα = 0,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! with second-order working-set selection. Iteration stops once the maximal
//! KKT violation `m(α) − M(α)` drops below the tolerance. Multiclass problems
//! use one-vs-one voting.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    /// `exp(−γ ‖u − v‖²)`.
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, u: ArrayView1<f64>, v: ArrayView1<f64>) -> f64 {
        match *self {
            Kernel::Linear => u.dot(&v),
            Kernel::Rbf { gamma } => {
                let d2: f64 = u.iter().zip(v.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
        }
    }

    pub fn gram(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let n = x.nrows();
        let mut k = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v = self.eval(x.row(i), x.row(j));
                k[[i, j]] = v;
                k[[j, i]] = v;
            }
        }
        k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c: f64,
    /// KKT violation tolerance.
    pub tol: f64,
    /// Iteration budget in units of the sub-problem size.
    pub max_passes: usize,
}

impl SvmParams {
    /// Linear kernel, C = 1 (single-feature runs).
    pub fn linear() -> Self {
        SvmParams {
            kernel: Kernel::Linear,
            c: 1.0,
            tol: 1e-3,
            max_passes: 10_000,
        }
    }

    /// RBF kernel, C = 100, γ = 0.1 (multi-feature runs).
    pub fn rbf() -> Self {
        SvmParams {
            kernel: Kernel::Rbf { gamma: 0.1 },
            c: 100.0,
            tol: 1e-3,
            max_passes: 10_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParam(format!("C must be > 0, got {}", self.c)));
        }
        if let Kernel::Rbf { gamma } = self.kernel {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::InvalidParam(format!("gamma must be > 0, got {gamma}")));
            }
        }
        if !(self.tol > 0.0) || self.max_passes == 0 {
            return Err(Error::InvalidParam("tolerance and pass budget must be positive".into()));
        }
        Ok(())
    }
}

/// Solution of one binary dual problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    pub alpha: Vec<f64>,
    /// Decision function is `Σ α_i y_i K(x_i, x) − rho`.
    pub rho: f64,
    pub objective: f64,
    /// Final `m(α) − M(α)`.
    pub kkt_violation: f64,
    pub iterations: usize,
}

/// Dual objective `½ αᵀQα − Σα` for labels `y ∈ {±1}`.
pub fn dual_objective(gram: &Array2<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram[[i, j]];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// Iterations continue past `tol` down to `tol · REFINE` while budget
/// remains; only the caller's `tol` decides convergence.
const REFINE: f64 = 1e-4;

/// SMO on a precomputed Gram matrix. `y` holds ±1 labels.
pub fn solve_binary(gram: &Array2<f64>, y: &[f64], c: f64, tol: f64, max_passes: usize) -> Result<BinarySolution> {
    let n = y.len();
    if gram.dim() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "gram matrix {:?} for {n} labels",
            gram.dim()
        )));
    }
    if !y.iter().any(|&v| v > 0.0) || !y.iter().any(|&v| v < 0.0) {
        return Err(Error::SingleClass);
    }
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let at_upper = |a: f64| a >= c;
    let at_lower = |a: f64| a <= 0.0;
    let max_iter = max_passes.saturating_mul(n.max(1));
    let mut iter = 0;
    let mut violation;

    loop {
        // i: maximal violating index in I_up (lowest index on ties)
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let eligible = if y[t] > 0.0 { !at_upper(alpha[t]) } else { !at_lower(alpha[t]) };
            if eligible && -y[t] * grad[t] > g_max {
                g_max = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        // j: second-order selection over I_low
        let mut g_max2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                let eligible = if y[t] > 0.0 { !at_lower(alpha[t]) } else { !at_upper(alpha[t]) };
                if !eligible {
                    continue;
                }
                let ygt = y[t] * grad[t];
                g_max2 = g_max2.max(ygt);
                let b = g_max + ygt;
                if b > 0.0 {
                    let mut a = gram[[i, i]] + gram[[t, t]] - 2.0 * gram[[i, t]];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        violation = (g_max + g_max2).max(0.0);
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) if g_max + g_max2 >= tol * REFINE => (i, j),
            _ => break,
        };
        if iter >= max_iter {
            if violation < tol {
                break;
            }
            return Err(Error::NonConvergence {
                passes: max_passes,
                residual: violation,
            });
        }
        iter += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let k_ij = gram[[i, j]];
        if y[i] != y[j] {
            let mut quad = gram[[i, i]] + gram[[j, j]] + 2.0 * (y[i] * y[j] * k_ij);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = gram[[i, i]] + gram[[j, j]] - 2.0 * (y[i] * y[j] * k_ij);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let d_i = alpha[i] - old_i;
        let d_j = alpha[j] - old_j;
        for (t, g) in grad.iter_mut().enumerate() {
            *g += y[t] * (y[i] * gram[[i, t]] * d_i + y[j] * gram[[j, t]] * d_j);
        }
    }

    polish(gram, y, c, &mut alpha, &mut grad);

    // rho from free variables, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if at_upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    // ½αᵀQα − eᵀα = ½ Σ α_i (G_i − 1)
    let objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();

    Ok(BinarySolution {
        alpha,
        rho,
        objective,
        kkt_violation: violation,
        iterations: iter,
    })
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting; `None`
/// when a pivot is numerically zero.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[r][k] -= f * a[col][k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    Some(x)
}

/// Exact minimization over the free set found by SMO, with bounded
/// variables held fixed. Kept only if it stays feasible and does not
/// raise the objective; `grad` is recomputed when accepted.
fn polish(gram: &Array2<f64>, y: &[f64], c: f64, alpha: &mut [f64], grad: &mut [f64]) {
    let n = y.len();
    let free: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0 && alpha[t] < c).collect();
    if free.is_empty() {
        return;
    }
    let m = free.len();
    let q = |i: usize, j: usize| y[i] * y[j] * gram[[i, j]];
    let mut a = vec![vec![0.0; m + 1]; m + 1];
    let mut b = vec![0.0; m + 1];
    let mut bound_y = 0.0;
    for t in (0..n).filter(|t| !free.contains(t)) {
        bound_y += y[t] * alpha[t];
    }
    for (r, &i) in free.iter().enumerate() {
        for (s, &j) in free.iter().enumerate() {
            a[r][s] = q(i, j);
        }
        a[r][m] = y[i];
        a[m][r] = y[i];
        let fixed: f64 = (0..n)
            .filter(|t| !free.contains(t) && alpha[*t] != 0.0)
            .map(|t| q(i, t) * alpha[t])
            .sum();
        b[r] = 1.0 - fixed;
    }
    b[m] = -bound_y;
    let Some(sol) = solve_dense(a, b) else {
        return;
    };
    if sol[..m].iter().any(|&v| !(v.is_finite() && v > 0.0 && v < c)) {
        return;
    }
    let mut candidate = alpha.to_vec();
    for (r, &i) in free.iter().enumerate() {
        candidate[i] = sol[r];
    }
    if dual_objective(gram, y, &candidate) > dual_objective(gram, y, alpha) {
        return;
    }
    alpha.copy_from_slice(&candidate);
    for (t, g) in grad.iter_mut().enumerate() {
        *g = (0..n).filter(|&s| alpha[s] != 0.0).map(|s| q(t, s) * alpha[s]).sum::<f64>() - 1.0;
    }
}

/// One one-vs-one sub-model: `positive` wins when the decision value is > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub positive: usize,
    pub negative: usize,
    /// Rows of [`SvmModel::support_vectors`].
    pub sv_index: Vec<usize>,
    /// `α_i y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub intercept: f64,
    pub kkt_violation: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    /// Class ids seen in training, ascending.
    pub class_ids: Vec<usize>,
    pub support_vectors: Array2<f64>,
    pub pairs: Vec<PairModel>,
}

impl SvmModel {
    pub fn n_features(&self) -> usize {
        self.support_vectors.ncols()
    }

    /// Decision value of every pair model for one sample, in `pairs` order.
    pub fn decision_values(&self, x: ArrayView1<f64>) -> Vec<f64> {
        let kv: Vec<f64> = self
            .support_vectors
            .rows()
            .into_iter()
            .map(|sv| self.kernel.eval(sv, x))
            .collect();
        self.pairs
            .iter()
            .map(|p| {
                p.sv_index
                    .iter()
                    .zip(&p.dual_coef)
                    .map(|(&s, coef)| coef * kv[s])
                    .sum::<f64>()
                    + p.intercept
            })
            .collect()
    }

    fn vote(&self, x: ArrayView1<f64>) -> usize {
        let dv = self.decision_values(x);
        let k = self.class_ids.iter().copied().max().map_or(0, |m| m + 1);
        let mut votes = vec![0usize; k];
        let mut margin = vec![0.0f64; k];
        for (p, d) in self.pairs.iter().zip(&dv) {
            if *d > 0.0 {
                votes[p.positive] += 1;
            } else {
                votes[p.negative] += 1;
            }
            margin[p.positive] += d;
            margin[p.negative] -= d;
        }
        let mut best = self.class_ids[0];
        for &c in &self.class_ids[1..] {
            if votes[c] > votes[best] || (votes[c] == votes[best] && margin[c] > margin[best]) {
                best = c;
            }
        }
        best
    }
}

/// Trains a one-vs-one SVM. Deterministic: no randomness is involved and
/// working-set ties resolve to the lowest index.
pub fn svm_train(x: ArrayView2<f64>, y: &[usize], params: &SvmParams) -> Result<SvmModel> {
    params.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} rows vs {} labels", x.nrows(), y.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("training features must be finite".into()));
    }
    let mut class_ids: Vec<usize> = y.to_vec();
    class_ids.sort_unstable();
    class_ids.dedup();
    if class_ids.len() < 2 {
        return Err(Error::SingleClass);
    }

    let gram = params.kernel.gram(x);
    let mut sv_rows: Vec<usize> = Vec::new();
    let mut sv_slot = vec![usize::MAX; y.len()];
    let mut pairs = Vec::new();
    for (a, &pos) in class_ids.iter().enumerate() {
        for &neg in &class_ids[a + 1..] {
            let idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == pos || y[i] == neg).collect();
            let sub_y: Vec<f64> = idx.iter().map(|&i| if y[i] == pos { 1.0 } else { -1.0 }).collect();
            let sub_gram = Array2::from_shape_fn((idx.len(), idx.len()), |(r, c)| gram[[idx[r], idx[c]]]);
            let sol = solve_binary(&sub_gram, &sub_y, params.c, params.tol, params.max_passes)?;
            let mut sv_index = Vec::new();
            let mut dual_coef = Vec::new();
            for (local, &global) in idx.iter().enumerate() {
                if sol.alpha[local] > 0.0 {
                    if sv_slot[global] == usize::MAX {
                        sv_slot[global] = sv_rows.len();
                        sv_rows.push(global);
                    }
                    sv_index.push(sv_slot[global]);
                    dual_coef.push(sol.alpha[local] * sub_y[local]);
                }
            }
            pairs.push(PairModel {
                positive: pos,
                negative: neg,
                sv_index,
                dual_coef,
                intercept: -sol.rho,
                kkt_violation: sol.kkt_violation,
                iterations: sol.iterations,
            });
        }
    }
    let support_vectors = x.select(ndarray::Axis(0), &sv_rows);
    Ok(SvmModel {
        kernel: params.kernel,
        c: params.c,
        class_ids,
        support_vectors,
        pairs,
    })
}

/// One-vs-one voting; vote ties go to the larger summed decision margin,
/// then to the lower class id.
pub fn svm_predict(model: &SvmModel, x: ArrayView2<f64>) -> Result<Vec<usize>> {
    if x.ncols() != model.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "model expects {} features, got {}",
            model.n_features(),
            x.ncols()
        )));
    }
    Ok(x.rows().into_iter().map(|r| model.vote(r)).collect())
}
