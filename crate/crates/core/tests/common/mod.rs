//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

/// `|Σ x[n] e^{−2πikn/N}|²` by direct summation, shifted so zero Doppler
/// sits at index `N/2`.
pub fn direct_dft_power(x: &[Complex64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    for (k, slot) in out.iter_mut().enumerate() {
        let kk = (k + n - n / 2) % n;
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, v) in x.iter().enumerate() {
            let ang = -2.0 * std::f64::consts::PI * (kk * t % n) as f64 / n as f64;
            acc += v * Complex64::from_polar(1.0, ang);
        }
        *slot = acc.norm_sqr();
    }
    out
}

/// Minimum of `½ αᵀQα − Σα` subject to `0 ≤ α ≤ C`, `yᵀα = 0`, found by
/// enumerating every assignment of each coordinate to lower bound, upper
/// bound or free, and solving the equality-constrained stationarity system
/// on the free set.
pub fn active_set_dual_min(gram: &Array2<f64>, y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * gram[[i, j]]);
    let objective = |a: &DVector<f64>| 0.5 * (a.transpose() * &q * a)[(0, 0)] - a.sum();
    let mut best = f64::INFINITY;
    let mut state = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha = DVector::from_fn(n, |i, _| if state[i] == 1 { c } else { 0.0 });
        let mut ok = true;
        if !free.is_empty() {
            let m = free.len();
            let mut a = DMatrix::zeros(m + 1, m + 1);
            let mut b = DVector::zeros(m + 1);
            let bound_y: f64 = (0..n).filter(|&i| state[i] != 2).map(|i| y[i] * alpha[i]).sum();
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[(r, s)] = q[(i, j)];
                }
                a[(r, m)] = y[i];
                a[(m, r)] = y[i];
                let fixed: f64 = (0..n).filter(|&j| state[j] != 2).map(|j| q[(i, j)] * alpha[j]).sum();
                b[r] = 1.0 - fixed;
            }
            b[m] = -bound_y;
            let sol = a.clone().pseudo_inverse(1e-10).expect("pseudo-inverse") * &b;
            if (&a * &sol - &b).amax() > 1e-8 {
                ok = false;
            }
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r];
            }
        }
        let eq: f64 = (0..n).map(|i| y[i] * alpha[i]).sum();
        if ok && eq.abs() < 1e-9 && alpha.iter().all(|&v| v >= -1e-10 && v <= c + 1e-10) {
            best = best.min(objective(&alpha));
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            state[i] += 1;
            if state[i] < 3 {
                break;
            }
            state[i] = 0;
            i += 1;
        }
    }
}

/// Random linear-power spectrogram with a few dominant bins.
pub fn random_power<R: Rng>(rng: &mut R, f: usize, t: usize) -> Array2<f64> {
    Array2::from_shape_fn((f, t), |(i, _)| {
        let base: f64 = rng.random_range(0.0..1.0);
        let bump = if i % 5 == 0 { rng.random_range(1.0..10.0) } else { 0.0 };
        base * base + bump + 1e-3
    })
}
