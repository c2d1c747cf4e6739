//! Measurement-level micro-Doppler spectrograms.
//!
//! Each segment contributes one Doppler column: the slow-time signal of its
//! most energetic range bin is mean-removed, Hann-windowed, transformed and
//! centre-shifted. Columns are concatenated, standardized to a fixed width
//! and converted to dB relative to the global maximum.
//!
//! The DFT is unnormalized, `X[k] = Σ x[n] e^{-j2πkn/N}`, so
//! `Σ |X[k]|² = N · Σ |x[n]|²`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Class, IQMeasurement};

/// Values below this (relative to the maximum) are clamped.
pub const DB_FLOOR: f64 = -120.0;
/// Standardized number of time columns.
pub const DEFAULT_WINDOW: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    /// `[F × T]`, dB relative to the maximum bin (max is exactly 0).
    pub values_db: Array2<f64>,
    /// Bin centre frequencies; zero Doppler sits at index `F / 2`.
    pub doppler_axis_hz: Vec<f64>,
    /// `true` for zero-padded columns.
    pub pad_mask: Vec<bool>,
    pub label: Class,
    pub measurement_id: String,
}

impl Spectrogram {
    pub fn n_freq(&self) -> usize {
        self.values_db.nrows()
    }

    pub fn n_time(&self) -> usize {
        self.values_db.ncols()
    }
}

/// Doppler axis of an `n`-point centre-shifted spectrum.
pub fn doppler_axis(n: usize, prf_hz: f64) -> Vec<f64> {
    let center = (n / 2) as f64;
    (0..n).map(|k| (k as f64 - center) * prf_hz / n as f64).collect()
}

/// Range bin with the largest energy over the segment's slow-time span.
/// Ties resolve to the lowest index.
pub fn select_range_bin(m: &IQMeasurement, segment: usize) -> Result<usize> {
    let span = m
        .segments
        .get(segment)
        .ok_or_else(|| Error::InvalidParam(format!("segment {segment} out of range")))?
        .clone();
    if span.is_empty() {
        return Err(Error::EmptySegment(segment));
    }
    let mut best = 0;
    let mut best_energy = f64::NEG_INFINITY;
    for (r, row) in m.samples.rows().into_iter().enumerate() {
        let e: f64 = row.slice(ndarray::s![span.clone()]).iter().map(|z| z.norm_sqr()).sum();
        if e > best_energy {
            best = r;
            best_energy = e;
        }
    }
    Ok(best)
}

/// Symmetric Hann window `0.5 (1 − cos(2πn/(N−1)))`.
pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / denom).cos()))
        .collect()
}

/// Reusable FFT plan and window for one segment length.
pub struct SegmentTransform {
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    window: Vec<f64>,
    scratch: Vec<Complex64>,
}

impl SegmentTransform {
    pub fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(n);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        SegmentTransform {
            fft,
            window: hann(n),
            scratch,
        }
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    /// Mean removal, Hann window, FFT, centre shift, squared magnitude.
    pub fn power<'a>(&mut self, x: impl IntoIterator<Item = &'a Complex64>) -> Vec<f64> {
        let n = self.len();
        let mut buf: Vec<Complex64> = x.into_iter().copied().collect();
        assert_eq!(buf.len(), n, "segment length does not match the transform");
        let mean = buf.iter().sum::<Complex64>() / n as f64;
        for (z, w) in buf.iter_mut().zip(&self.window) {
            *z = (*z - mean) * *w;
        }
        self.fft.process_with_scratch(&mut buf, &mut self.scratch);
        buf.rotate_right(n / 2);
        buf.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Linear power spectrum of one slow-time segment (length = `x.len()`).
pub fn segment_spectrum(x: &[Complex64]) -> Result<Vec<f64>> {
    if x.len() < 8 {
        return Err(Error::InvalidParam(format!(
            "segment spectrum needs at least 8 samples, got {}",
            x.len()
        )));
    }
    Ok(SegmentTransform::new(x.len()).power(x))
}

/// Offsets `(lead, trail)` removed (crop) or added (pad) to reach `window`
/// columns; the odd column goes to the trailing side.
pub fn standardize_offsets(t: usize, window: usize) -> (usize, usize) {
    let diff = t.abs_diff(window);
    (diff / 2, diff - diff / 2)
}

/// Builds the dB-normalized spectrogram with exactly `window` columns.
pub fn build_spectrogram(m: &IQMeasurement, window: usize) -> Result<Spectrogram> {
    if window < 2 {
        return Err(Error::InvalidParam(format!("window must be >= 2, got {window}")));
    }
    m.validate()?;
    let f = m.params.segment_len;
    let t = m.n_segments();
    let mut transform = SegmentTransform::new(f);

    let (lead, trail) = standardize_offsets(t, window);
    let (first_seg, first_col) = if t > window { (lead, 0) } else { (0, lead) };
    let n_used = t.min(window);

    let mut power = Array2::<f64>::zeros((f, window));
    let mut pad_mask = vec![true; window];
    for i in 0..n_used {
        let seg = first_seg + i;
        let col = first_col + i;
        let r = select_range_bin(m, seg)?;
        let row: ArrayView1<Complex64> = m.samples.row(r);
        let span = m.segments[seg].clone();
        let spec = transform.power(row.slice(ndarray::s![span]).iter());
        power.column_mut(col).iter_mut().zip(spec).for_each(|(p, v)| *p = v);
        pad_mask[col] = false;
    }
    debug_assert_eq!(pad_mask.iter().filter(|&&p| p).count(), if t < window { lead + trail } else { 0 });

    let max = power.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 || !max.is_finite() {
        return Err(Error::DegenerateSpectrogram(m.id.clone()));
    }
    let values_db = power.mapv(|p| to_db(p, max));

    Ok(Spectrogram {
        values_db,
        doppler_axis_hz: doppler_axis(f, m.params.prf_hz),
        pad_mask,
        label: m.label,
        measurement_id: m.id.clone(),
    })
}

fn to_db(p: f64, max: f64) -> f64 {
    if p <= 0.0 {
        return DB_FLOOR;
    }
    (10.0 * (p / max).log10()).max(DB_FLOOR)
}

#[derive(Debug, Serialize, Deserialize)]
struct DumpHeader {
    format: String,
    measurement_id: String,
    label: Class,
    n_freq: usize,
    n_time: usize,
    dtype: String,
    layout: String,
    doppler_axis_hz: Vec<f64>,
    pad_mask: Vec<bool>,
}

/// Writes a spectrogram for plot tooling: one JSON header line, then the
/// `[F × T]` matrix as row-major little-endian float32.
pub fn write_spectrogram_dump(s: &Spectrogram, path: &Path) -> Result<()> {
    let header = DumpHeader {
        format: "mdrobust-spectrogram-v1".into(),
        measurement_id: s.measurement_id.clone(),
        label: s.label,
        n_freq: s.n_freq(),
        n_time: s.n_time(),
        dtype: "float32".into(),
        layout: "row-major[freq,time]".into(),
        doppler_axis_hz: s.doppler_axis_hz.clone(),
        pad_mask: s.pad_mask.clone(),
    };
    let mut bytes = serde_json::to_vec(&header)?;
    bytes.push(b'\n');
    for v in s.values_db.iter() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Reads a dump written by [`write_spectrogram_dump`]. Values come back at
/// float32 precision.
pub fn read_spectrogram_dump(path: &Path) -> Result<Spectrogram> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(f);
    let mut line = String::new();
    reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    let header: DumpHeader = serde_json::from_str(line.trim_end())?;
    let mut rest = Vec::new();
    reader.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
    if rest.len() != header.n_freq * header.n_time * 4 {
        return Err(Error::DimensionMismatch(format!(
            "spectrogram dump declares {}x{} but carries {} bytes",
            header.n_freq,
            header.n_time,
            rest.len()
        )));
    }
    let values: Vec<f64> = rest
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    let values_db = Array2::from_shape_vec((header.n_freq, header.n_time), values)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    Ok(Spectrogram {
        values_db,
        doppler_axis_hz: header.doppler_axis_hz,
        pad_mask: header.pad_mask,
        label: header.label,
        measurement_id: header.measurement_id,
    })
}
