//! Calibrated corruption of raw IQ data.
//!
//! AWGN variance is set per segment from the power of the segment's
//! dominant range bin: `σ² = 10^(−SNR/10) · P_signal`. The noise is circular
//! complex Gaussian (`σ²/2` per quadrature) and is added to every range bin
//! of the segment. Phase noise multiplies each sample by `e^{jφ}` with i.i.d.
//! `φ ~ N(0, σ_φ²)`.
//!
//! Random streams are keyed by (seed, measurement id, stage, segment), so
//! output never depends on evaluation order.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::IQMeasurement;
use crate::seed;
use crate::spectro::select_range_bin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    Raw,
    Awgn,
    Phase,
    Combined,
}

impl NoiseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseMode::Raw => "raw",
            NoiseMode::Awgn => "awgn",
            NoiseMode::Phase => "phase",
            NoiseMode::Combined => "combined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    None,
    Mild,
    Moderate,
    Severe,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::None => "none",
            Severity::Mild => "mild",
            Severity::Moderate => "moderate",
            Severity::Severe => "severe",
        })
    }
}

/// Combined (SNR dB, phase °, severity) tiers.
pub const COMBINED_TIERS: [(f64, f64, Severity); 9] = [
    (-3.0, 1.0, Severity::Mild),
    (-2.0, 2.0, Severity::Mild),
    (-1.0, 3.0, Severity::Moderate),
    (0.0, 4.0, Severity::Moderate),
    (1.0, 5.0, Severity::Moderate),
    (7.0, 1.0, Severity::Moderate),
    (2.0, 6.0, Severity::Severe),
    (3.0, 7.0, Severity::Severe),
    (5.0, 8.0, Severity::Severe),
];

pub const AWGN_LEVELS_DB: [f64; 13] = [-10.0, -7.0, -5.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0];
pub const PHASE_LEVELS_DEG: [f64; 10] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];

/// SNR ≤ −7 dB is severe, ≥ 5 dB mild, anything between moderate.
pub fn awgn_severity(snr_db: f64) -> Severity {
    if snr_db <= -7.0 {
        Severity::Severe
    } else if snr_db >= 5.0 {
        Severity::Mild
    } else {
        Severity::Moderate
    }
}

/// 1–3° mild, 4–7° moderate, 8–10° (and beyond) severe.
pub fn phase_severity(phase_deg: f64) -> Severity {
    if phase_deg <= 3.0 {
        Severity::Mild
    } else if phase_deg <= 7.0 {
        Severity::Moderate
    } else {
        Severity::Severe
    }
}

/// Tabulated tier, or the worse of the two component tiers off-table.
pub fn combined_severity(snr_db: f64, phase_deg: f64) -> Severity {
    COMBINED_TIERS
        .iter()
        .find(|(s, p, _)| *s == snr_db && *p == phase_deg)
        .map(|t| t.2)
        .unwrap_or_else(|| awgn_severity(snr_db).max(phase_severity(phase_deg)))
}

/// One noise condition. The string form is `raw`, `awgn:<dB>`,
/// `phase:<deg>` or `combined:<dB>:<deg>`; the seed is not part of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub mode: NoiseMode,
    pub snr_db: Option<f64>,
    pub phase_deg: Option<f64>,
    pub severity: Severity,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn raw() -> Self {
        NoiseSpec {
            mode: NoiseMode::Raw,
            snr_db: None,
            phase_deg: None,
            severity: Severity::None,
            seed: crate::DEFAULT_SEED,
        }
    }

    pub fn awgn(snr_db: f64) -> Self {
        NoiseSpec {
            mode: NoiseMode::Awgn,
            snr_db: Some(snr_db),
            phase_deg: None,
            severity: awgn_severity(snr_db),
            seed: crate::DEFAULT_SEED,
        }
    }

    pub fn phase(phase_deg: f64) -> Self {
        NoiseSpec {
            mode: NoiseMode::Phase,
            snr_db: None,
            phase_deg: Some(phase_deg),
            severity: phase_severity(phase_deg),
            seed: crate::DEFAULT_SEED,
        }
    }

    pub fn combined(snr_db: f64, phase_deg: f64) -> Self {
        NoiseSpec {
            mode: NoiseMode::Combined,
            snr_db: Some(snr_db),
            phase_deg: Some(phase_deg),
            severity: combined_severity(snr_db, phase_deg),
            seed: crate::DEFAULT_SEED,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParam(format!("{self}: {msg}")));
        match (self.mode, self.snr_db, self.phase_deg) {
            (NoiseMode::Raw, None, None) => {}
            (NoiseMode::Awgn, Some(_), None) => {}
            (NoiseMode::Phase, None, Some(_)) => {}
            (NoiseMode::Combined, Some(_), Some(_)) => {}
            _ => return bad("parameters do not match the noise mode"),
        }
        if self.snr_db.is_some_and(|s| !s.is_finite()) {
            return bad("SNR must be finite");
        }
        if self.phase_deg.is_some_and(|p| !(p.is_finite() && p >= 0.0)) {
            return bad("phase deviation must be finite and >= 0");
        }
        Ok(())
    }

    /// The parameter part of the string form (`-5`, `7`, `-1:3`, or empty).
    pub fn param_string(&self) -> String {
        match (self.snr_db, self.phase_deg) {
            (Some(s), Some(p)) => format!("{s}:{p}"),
            (Some(s), None) => format!("{s}"),
            (None, Some(p)) => format!("{p}"),
            (None, None) => String::new(),
        }
    }

    /// Applies this condition to `m`.
    pub fn apply(&self, m: &IQMeasurement) -> Result<IQMeasurement> {
        self.validate()?;
        match self.mode {
            NoiseMode::Raw => Ok(m.clone()),
            NoiseMode::Awgn => awgn_inject(m, self.snr_db.unwrap(), self.seed),
            NoiseMode::Phase => phase_inject(m, self.phase_deg.unwrap(), self.seed),
            NoiseMode::Combined => combined_inject(m, self.snr_db.unwrap(), self.phase_deg.unwrap(), self.seed),
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            NoiseMode::Raw => f.write_str("raw"),
            mode => write!(f, "{}:{}", mode.as_str(), self.param_string()),
        }
    }
}

impl FromStr for NoiseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = |reason: &str| Error::NoiseSpecParse {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let num = |v: &str, what: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(&format!("{what} {v:?} is not a number")))
        };
        let parts: Vec<&str> = s.trim().split(':').collect();
        let spec = match parts.as_slice() {
            [m] if m.eq_ignore_ascii_case("raw") => NoiseSpec::raw(),
            [m, snr] if m.eq_ignore_ascii_case("awgn") => NoiseSpec::awgn(num(snr, "SNR")?),
            [m, deg] if m.eq_ignore_ascii_case("phase") => {
                let p = num(deg, "phase")?;
                if p < 0.0 {
                    return Err(err("phase deviation must be >= 0"));
                }
                NoiseSpec::phase(p)
            }
            [m, snr, deg] if m.eq_ignore_ascii_case("combined") => {
                let p = num(deg, "phase")?;
                if p < 0.0 {
                    return Err(err("phase deviation must be >= 0"));
                }
                NoiseSpec::combined(num(snr, "SNR")?, p)
            }
            _ => {
                return Err(err(
                    "expected raw | awgn:<dB> | phase:<deg> | combined:<dB>:<deg>",
                ))
            }
        };
        Ok(spec)
    }
}

/// Every noise condition of the study: raw, 13 AWGN levels, 10 phase
/// levels and 9 combined tiers (33 in total).
pub fn noise_schedule() -> Vec<NoiseSpec> {
    let mut out = vec![NoiseSpec::raw()];
    out.extend(AWGN_LEVELS_DB.iter().map(|&s| NoiseSpec::awgn(s)));
    out.extend(PHASE_LEVELS_DEG.iter().map(|&p| NoiseSpec::phase(p)));
    out.extend(COMBINED_TIERS.iter().map(|&(s, p, _)| NoiseSpec::combined(s, p)));
    out
}

fn stage_seed(seed: u64, id: &str, stage: &str) -> u64 {
    seed::derive_tag(seed::derive(seed, seed::hash_str(id)), stage)
}

/// AWGN noise variance for a target SNR and measured signal power.
pub fn awgn_variance(snr_db: f64, p_signal: f64) -> f64 {
    10f64.powf(-snr_db / 10.0) * p_signal
}

/// Adds circular complex AWGN at `snr_db`, calibrated per segment.
pub fn awgn_inject(m: &IQMeasurement, snr_db: f64, seed: u64) -> Result<IQMeasurement> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidParam(format!("SNR must be finite, got {snr_db}")));
    }
    m.validate()?;
    let base = stage_seed(seed, &m.id, "awgn");
    let mut out = m.clone();
    for (s, span) in m.segments.iter().enumerate() {
        let r = select_range_bin(m, s)?;
        let sig = m.samples.slice(ndarray::s![r, span.clone()]);
        let p_signal = sig.iter().map(|z| z.norm_sqr()).sum::<f64>() / span.len() as f64;
        if p_signal <= 0.0 {
            return Err(Error::ZeroPower(s));
        }
        let sigma = (awgn_variance(snr_db, p_signal) / 2.0).sqrt();
        let mut rng = seed::rng(seed::derive(base, s as u64));
        let mut block = out.samples.slice_mut(ndarray::s![.., span.clone()]);
        for z in block.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *z += Complex64::new(re * sigma, im * sigma);
        }
    }
    Ok(out)
}

/// Multiplies every sample by `e^{jφ}`, `φ ~ N(0, (phase_deg·π/180)²)`.
pub fn phase_inject(m: &IQMeasurement, phase_deg: f64, seed: u64) -> Result<IQMeasurement> {
    if !(phase_deg.is_finite() && phase_deg >= 0.0) {
        return Err(Error::InvalidParam(format!(
            "phase deviation must be finite and >= 0, got {phase_deg}"
        )));
    }
    m.validate()?;
    let mut out = m.clone();
    if phase_deg == 0.0 {
        return Ok(out);
    }
    let sigma = phase_deg.to_radians();
    let base = stage_seed(seed, &m.id, "phase");
    for (s, span) in m.segments.iter().enumerate() {
        let mut rng = seed::rng(seed::derive(base, s as u64));
        let mut block = out.samples.slice_mut(ndarray::s![.., span.clone()]);
        for z in block.iter_mut() {
            let phi: f64 = StandardNormal.sample(&mut rng);
            *z *= Complex64::cis(phi * sigma);
        }
    }
    Ok(out)
}

/// Phase jitter first, then AWGN against the (power-preserved) jittered
/// signal. Stage seeds are derived from `seed`.
pub fn combined_inject(m: &IQMeasurement, snr_db: f64, phase_deg: f64, seed: u64) -> Result<IQMeasurement> {
    let jittered = phase_inject(m, phase_deg, seed::derive_tag(seed, "combined/phase"))?;
    awgn_inject(&jittered, snr_db, seed::derive_tag(seed, "combined/awgn"))
}
