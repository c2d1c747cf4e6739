//! The ten marginal-based spectrogram descriptors.
//!
//! A spectrogram is linearized (`P = 10^{S/10}`), padded columns are dropped,
//! and the frequency / time marginals are formed. Their normalized versions
//! are treated as probability mass functions for the entropies and moments.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectro::Spectrogram;

/// Columns whose linear energy is below this fraction of the strongest
/// column are treated as padding.
pub const PAD_ENERGY_THRESHOLD: f64 = 1e-10;
const PMF_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Sler,
    SidelobeEntropy,
    SpectralEntropy,
    TemporalEntropy,
    TemporalEnergyVariance,
    DopplerBwP80,
    DopplerSpread,
    ZeroDopplerRatio,
    Skewness,
    Kurtosis,
}

impl Feature {
    pub const ALL: [Feature; 10] = [
        Feature::Sler,
        Feature::SidelobeEntropy,
        Feature::SpectralEntropy,
        Feature::TemporalEntropy,
        Feature::TemporalEnergyVariance,
        Feature::DopplerBwP80,
        Feature::DopplerSpread,
        Feature::ZeroDopplerRatio,
        Feature::Skewness,
        Feature::Kurtosis,
    ];

    /// The five-feature set used for the headline classifiers.
    pub const SELECTED: [Feature; 5] = [
        Feature::Sler,
        Feature::SidelobeEntropy,
        Feature::SpectralEntropy,
        Feature::TemporalEnergyVariance,
        Feature::TemporalEntropy,
    ];

    pub const DOPPLER: [Feature; 3] = [Feature::DopplerBwP80, Feature::DopplerSpread, Feature::ZeroDopplerRatio];
    pub const STATISTICAL: [Feature; 2] = [Feature::Skewness, Feature::Kurtosis];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Sler => "sler",
            Feature::SidelobeEntropy => "sidelobe_entropy",
            Feature::SpectralEntropy => "spectral_entropy",
            Feature::TemporalEntropy => "temporal_entropy",
            Feature::TemporalEnergyVariance => "temporal_energy_variance",
            Feature::DopplerBwP80 => "doppler_bw_p80",
            Feature::DopplerSpread => "doppler_spread",
            Feature::ZeroDopplerRatio => "zero_doppler_ratio",
            Feature::Skewness => "skewness",
            Feature::Kurtosis => "kurtosis",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s.trim())
            .ok_or_else(|| Error::InvalidParam(format!("unknown feature {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyBase {
    Natural,
    Two,
    Ten,
}

impl EntropyBase {
    fn ln(self) -> f64 {
        match self {
            EntropyBase::Natural => 1.0,
            EntropyBase::Two => std::f64::consts::LN_2,
            EntropyBase::Ten => std::f64::consts::LN_10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Fractional width of the central band excluded from the side lobes.
    pub alpha: f64,
    /// Fractional width of the zero-Doppler window.
    pub beta: f64,
    pub entropy_base: EntropyBase,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            alpha: 0.15,
            beta: 0.05,
            entropy_base: EntropyBase::Natural,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParam(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

/// Linear-power spectrogram with padding removed, plus its marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSet {
    /// `[F × T′]`.
    pub p_lin: Array2<f64>,
    pub p_f: Array1<f64>,
    pub p_t: Array1<f64>,
    pub p_tot: f64,
    pub pf_norm: Array1<f64>,
    pub pt_norm: Array1<f64>,
}

impl MarginalSet {
    /// Builds marginals from a linear-power matrix. Columns flagged in
    /// `pad_mask`, or whose energy is below [`PAD_ENERGY_THRESHOLD`] of the
    /// strongest column, are dropped.
    pub fn from_linear(p: ArrayView2<f64>, pad_mask: Option<&[bool]>) -> Result<Self> {
        if let Some(mask) = pad_mask {
            if mask.len() != p.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "pad mask has {} entries for {} columns",
                    mask.len(),
                    p.ncols()
                )));
            }
        }
        if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParam("linear power must be finite and non-negative".into()));
        }
        let col_energy = p.sum_axis(Axis(0));
        let max_col = col_energy.iter().copied().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..p.ncols())
            .filter(|&j| !pad_mask.is_some_and(|m| m[j]))
            .filter(|&j| col_energy[j] >= PAD_ENERGY_THRESHOLD * max_col && col_energy[j] > 0.0)
            .collect();
        if keep.is_empty() {
            return Err(Error::AllPadded);
        }
        let p_lin = p.select(Axis(1), &keep);
        let p_f = p_lin.sum_axis(Axis(1));
        let p_t = p_lin.sum_axis(Axis(0));
        let p_tot = p_f.sum();
        let pf_norm = &p_f / p_tot;
        let pt_norm = &p_t / p_tot;
        Ok(MarginalSet {
            p_lin,
            p_f,
            p_t,
            p_tot,
            pf_norm,
            pt_norm,
        })
    }

    pub fn n_freq(&self) -> usize {
        self.p_f.len()
    }
}

/// Linearizes `s` and computes its marginals.
pub fn marginals(s: &Spectrogram) -> Result<MarginalSet> {
    if s.values_db.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "spectrogram {} contains non-finite values",
            s.measurement_id
        )));
    }
    let p = s.values_db.mapv(|db| 10f64.powf(db / 10.0));
    MarginalSet::from_linear(p.view(), Some(&s.pad_mask))
}

/// Shannon entropy in nats with `0 · ln 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    if let Some(v) = p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidPmf(format!("entry {v} is negative or non-finite")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PMF_TOLERANCE {
        return Err(Error::InvalidPmf(format!("masses sum to {sum}")));
    }
    Ok(-p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>())
}

/// Contiguous band of `clamp(round(α·F), 1, F)` bins centred on the
/// zero-Doppler bin `F / 2`; an even count puts the extra bin above centre.
pub fn central_band(n_freq: usize, alpha: f64) -> Range<usize> {
    if n_freq == 0 {
        return 0..0;
    }
    let c = ((alpha * n_freq as f64).round() as usize).clamp(1, n_freq);
    let center = n_freq / 2;
    let start = (center - (c - 1) / 2).min(n_freq - c);
    start..start + c
}

/// Fraction of energy outside the central band.
pub fn sler(ms: &MarginalSet, band: Range<usize>) -> Result<f64> {
    if ms.p_tot <= 0.0 {
        return Err(Error::InvalidParam("total power is zero".into()));
    }
    check_band(ms, &band)?;
    let central: f64 = ms.p_f.slice(ndarray::s![band]).sum();
    Ok(((ms.p_tot - central) / ms.p_tot).clamp(0.0, 1.0))
}

fn check_band(ms: &MarginalSet, band: &Range<usize>) -> Result<()> {
    if band.end > ms.n_freq() || band.start > band.end {
        return Err(Error::InvalidParam(format!(
            "band {band:?} outside {} frequency bins",
            ms.n_freq()
        )));
    }
    Ok(())
}

/// Entropy of the renormalized side-lobe distribution. The flag is set (and
/// the value is 0) when the side lobes carry no energy.
pub fn sidelobe_entropy(ms: &MarginalSet, band: Range<usize>) -> Result<(f64, bool)> {
    check_band(ms, &band)?;
    let side: Vec<f64> = ms
        .p_f
        .iter()
        .enumerate()
        .filter(|(i, _)| !band.contains(i))
        .map(|(_, v)| *v)
        .collect();
    let total: f64 = side.iter().sum();
    if total <= 0.0 {
        return Ok((0.0, true));
    }
    let pmf: Vec<f64> = side.iter().map(|v| v / total).collect();
    Ok((shannon_entropy(&pmf)?, false))
}

pub fn spectral_entropy(ms: &MarginalSet) -> Result<f64> {
    shannon_entropy(ms.pf_norm.as_slice().expect("contiguous marginal"))
}

pub fn temporal_entropy(ms: &MarginalSet) -> Result<f64> {
    shannon_entropy(ms.pt_norm.as_slice().expect("contiguous marginal"))
}

/// Population variance of the unnormalized time marginal.
pub fn temporal_energy_variance(ms: &MarginalSet) -> f64 {
    let n = ms.p_t.len() as f64;
    let mu = ms.p_t.sum() / n;
    ms.p_t.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n
}

fn check_axis(ms: &MarginalSet, axis: &[f64]) -> Result<()> {
    if axis.len() != ms.n_freq() {
        return Err(Error::DimensionMismatch(format!(
            "doppler axis has {} bins, marginal has {}",
            axis.len(),
            ms.n_freq()
        )));
    }
    Ok(())
}

fn doppler_mean(ms: &MarginalSet, axis: &[f64]) -> f64 {
    ms.pf_norm.iter().zip(axis).map(|(p, f)| p * f).sum()
}

fn central_moment(ms: &MarginalSet, axis: &[f64], mu: f64, order: i32) -> f64 {
    ms.pf_norm.iter().zip(axis).map(|(p, f)| p * (f - mu).powi(order)).sum()
}

/// Power-weighted standard deviation of Doppler frequency.
pub fn doppler_spread(ms: &MarginalSet, axis: &[f64]) -> Result<f64> {
    check_axis(ms, axis)?;
    let mu = doppler_mean(ms, axis);
    Ok(central_moment(ms, axis, mu, 2).max(0.0).sqrt())
}

/// |f| at which the mass accumulated outward from zero Doppler first reaches
/// 80 %.
pub fn doppler_bw_p80(ms: &MarginalSet, axis: &[f64]) -> Result<f64> {
    check_axis(ms, axis)?;
    let mut order: Vec<usize> = (0..axis.len()).collect();
    order.sort_by(|&a, &b| axis[a].abs().total_cmp(&axis[b].abs()).then(a.cmp(&b)));
    let mut acc = 0.0;
    for &i in &order {
        acc += ms.pf_norm[i];
        if acc >= 0.8 - 1e-12 {
            return Ok(axis[i].abs());
        }
    }
    Ok(order.last().map_or(0.0, |&i| axis[i].abs()))
}

/// Mass inside the central `β` window around zero Doppler.
pub fn zero_doppler_ratio(ms: &MarginalSet, beta: f64) -> f64 {
    let band = central_band(ms.n_freq(), beta);
    ms.pf_norm.slice(ndarray::s![band]).sum().clamp(0.0, 1.0)
}

/// Skewness and excess kurtosis of the Doppler distribution. Both are 0 with
/// the flag set when the spread is zero.
pub fn freq_moments(ms: &MarginalSet, axis: &[f64]) -> Result<(f64, f64, bool)> {
    check_axis(ms, axis)?;
    let mu = doppler_mean(ms, axis);
    let var = central_moment(ms, axis, mu, 2);
    // relative to the axis scale so that a pure delta counts as degenerate
    let scale = axis.iter().fold(0.0f64, |m, f| m.max(f.abs())).max(f64::MIN_POSITIVE);
    if var <= (1e-12 * scale).powi(2) {
        return Ok((0.0, 0.0, true));
    }
    let sigma = var.sqrt();
    let skew = central_moment(ms, axis, mu, 3) / (sigma * var);
    let kurt = central_moment(ms, axis, mu, 4) / (var * var) - 3.0;
    Ok((skew, kurt, false))
}

/// Degeneracy markers carried alongside a feature vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureFlags {
    /// No energy outside the central band; side-lobe entropy set to 0.
    pub sidelobe_degenerate: bool,
    /// Zero Doppler spread; skewness and kurtosis set to 0.
    pub moments_degenerate: bool,
}

impl fmt::Display for FeatureFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.sidelobe_degenerate {
            parts.push("sidelobe_degenerate");
        }
        if self.moments_degenerate {
            parts.push("moments_degenerate");
        }
        if parts.is_empty() {
            f.write_str("-")
        } else {
            f.write_str(&parts.join("|"))
        }
    }
}

impl FromStr for FeatureFlags {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut flags = FeatureFlags::default();
        for part in s.split('|').map(str::trim).filter(|p| !p.is_empty() && *p != "-") {
            match part {
                "sidelobe_degenerate" => flags.sidelobe_degenerate = true,
                "moments_degenerate" => flags.moments_degenerate = true,
                other => return Err(Error::InvalidParam(format!("unknown feature flag {other:?}"))),
            }
        }
        Ok(flags)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub sler: f64,
    pub sidelobe_entropy: f64,
    pub spectral_entropy: f64,
    pub temporal_entropy: f64,
    pub temporal_energy_variance: f64,
    pub doppler_bw_p80: f64,
    pub doppler_spread: f64,
    pub zero_doppler_ratio: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub flags: FeatureFlags,
}

impl FeatureVector {
    pub fn get(&self, f: Feature) -> f64 {
        match f {
            Feature::Sler => self.sler,
            Feature::SidelobeEntropy => self.sidelobe_entropy,
            Feature::SpectralEntropy => self.spectral_entropy,
            Feature::TemporalEntropy => self.temporal_entropy,
            Feature::TemporalEnergyVariance => self.temporal_energy_variance,
            Feature::DopplerBwP80 => self.doppler_bw_p80,
            Feature::DopplerSpread => self.doppler_spread,
            Feature::ZeroDopplerRatio => self.zero_doppler_ratio,
            Feature::Skewness => self.skewness,
            Feature::Kurtosis => self.kurtosis,
        }
    }

    /// Values in [`Feature::ALL`] order.
    pub fn to_array(&self) -> [f64; 10] {
        Feature::ALL.map(|f| self.get(f))
    }

    pub fn from_array(values: [f64; 10], flags: FeatureFlags) -> Self {
        FeatureVector {
            sler: values[0],
            sidelobe_entropy: values[1],
            spectral_entropy: values[2],
            temporal_entropy: values[3],
            temporal_energy_variance: values[4],
            doppler_bw_p80: values[5],
            doppler_spread: values[6],
            zero_doppler_ratio: values[7],
            skewness: values[8],
            kurtosis: values[9],
            flags,
        }
    }
}

/// All ten features from one marginal pass.
pub fn extract_from_marginals(ms: &MarginalSet, axis: &[f64], config: &FeatureConfig) -> Result<FeatureVector> {
    config.validate()?;
    check_axis(ms, axis)?;
    let base = config.entropy_base.ln();
    let band = central_band(ms.n_freq(), config.alpha);
    let (side_h, side_degenerate) = sidelobe_entropy(ms, band.clone())?;
    let (skewness, kurtosis, moments_degenerate) = freq_moments(ms, axis)?;
    Ok(FeatureVector {
        sler: sler(ms, band)?,
        sidelobe_entropy: side_h / base,
        spectral_entropy: spectral_entropy(ms)? / base,
        temporal_entropy: temporal_entropy(ms)? / base,
        temporal_energy_variance: temporal_energy_variance(ms),
        doppler_bw_p80: doppler_bw_p80(ms, axis)?,
        doppler_spread: doppler_spread(ms, axis)?,
        zero_doppler_ratio: zero_doppler_ratio(ms, config.beta),
        skewness,
        kurtosis,
        flags: FeatureFlags {
            sidelobe_degenerate: side_degenerate,
            moments_degenerate,
        },
    })
}

pub fn extract(s: &Spectrogram, config: &FeatureConfig) -> Result<FeatureVector> {
    let ms = marginals(s)?;
    extract_from_marginals(&ms, &s.doppler_axis_hz, config)
}
