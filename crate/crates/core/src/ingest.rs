//! Measurement containers and the synthetic target generator.
//!
//! A container is a directory holding `manifest.json` and `iq.bin`. The
//! binary payload is interleaved little-endian I/Q, row-major over
//! `[range bin × slow time]`. Samples are stored as `float32` whenever every
//! component is exactly representable in single precision (always the case
//! for generated data), and as `float64` otherwise, so a write/load cycle is
//! always bit-exact.

use std::fmt;
use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PAYLOAD_FILE: &str = "iq.bin";
const CONTAINER_FORMAT: &str = "mdrobust-iq";
const CONTAINER_VERSION: u32 = 1;

/// Target super-class. Declaration order is lexicographic by name, which is
/// also the integer encoding used by the classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Bird,
    Drone,
    Reflector,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::Bird, Class::Drone, Class::Reflector];
    pub const COUNT: usize = 3;

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Class> {
        Self::ALL.get(id).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Class::Bird => "bird",
            Class::Drone => "drone",
            Class::Reflector => "reflector",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Class {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bird" => Ok(Class::Bird),
            "drone" => Ok(Class::Drone),
            "reflector" => Ok(Class::Reflector),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

/// Radar acquisition parameters. Defaults follow the 77 GHz FMCW sensor of
/// the reference dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarParams {
    pub center_freq_hz: f64,
    pub prf_hz: f64,
    pub range_resolution_m: f64,
    pub n_range_bins: usize,
    /// Slow-time samples per segment; also the Doppler FFT length.
    pub segment_len: usize,
}

impl Default for RadarParams {
    fn default() -> Self {
        RadarParams {
            center_freq_hz: 77e9,
            prf_hz: 17e3,
            range_resolution_m: 1.0,
            n_range_bins: 8,
            segment_len: 256,
        }
    }
}

impl RadarParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.prf_hz.is_finite() && self.prf_hz > 0.0) {
            return Err(Error::InvalidParam(format!("prf_hz must be > 0, got {}", self.prf_hz)));
        }
        if self.segment_len < 8 {
            return Err(Error::InvalidParam(format!(
                "segment_len must be >= 8, got {}",
                self.segment_len
            )));
        }
        if self.n_range_bins < 1 {
            return Err(Error::InvalidParam("n_range_bins must be >= 1".into()));
        }
        Ok(())
    }

    /// Doppler bin spacing of one segment spectrum.
    pub fn doppler_resolution_hz(&self) -> f64 {
        self.prf_hz / self.segment_len as f64
    }
}

/// A recorded (or synthesized) target: complex radar cube over range bins
/// and slow time, split into contiguous equal-length segments.
#[derive(Debug, Clone, PartialEq)]
pub struct IQMeasurement {
    pub id: String,
    pub label: Class,
    pub params: RadarParams,
    /// `[n_range_bins × n_slow_time]`.
    pub samples: Array2<Complex64>,
    pub segments: Vec<Range<usize>>,
}

impl IQMeasurement {
    /// Builds a measurement whose slow-time axis is cut into consecutive
    /// segments of `params.segment_len`.
    pub fn new(id: impl Into<String>, label: Class, params: RadarParams, samples: Array2<Complex64>) -> Result<Self> {
        params.validate()?;
        let n_slow = samples.ncols();
        if n_slow % params.segment_len != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{n_slow} slow-time samples is not a multiple of segment_len {}",
                params.segment_len
            )));
        }
        let segments = (0..n_slow / params.segment_len)
            .map(|s| s * params.segment_len..(s + 1) * params.segment_len)
            .collect();
        let m = IQMeasurement {
            id: id.into(),
            label,
            params,
            samples,
            segments,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn n_slow_time(&self) -> usize {
        self.samples.ncols()
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.samples.nrows() != self.params.n_range_bins {
            return Err(Error::DimensionMismatch(format!(
                "samples have {} range bins, params say {}",
                self.samples.nrows(),
                self.params.n_range_bins
            )));
        }
        if self.segments.is_empty() {
            return Err(Error::DimensionMismatch("segment list is empty".into()));
        }
        let mut next = 0;
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.start != next {
                return Err(Error::DimensionMismatch(format!(
                    "segment {i} starts at {} but previous segment ended at {next}",
                    seg.start
                )));
            }
            if seg.len() != self.params.segment_len {
                return Err(Error::DimensionMismatch(format!(
                    "segment {i} has length {}, expected {}",
                    seg.len(),
                    self.params.segment_len
                )));
            }
            next = seg.end;
        }
        if next != self.n_slow_time() {
            return Err(Error::DimensionMismatch(format!(
                "segments cover {next} slow-time samples, payload has {}",
                self.n_slow_time()
            )));
        }
        if let Some(((r, n), _)) = self
            .samples
            .indexed_iter()
            .find(|(_, z)| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::NonFinite {
                range_bin: r,
                slow_time: n,
            });
        }
        Ok(())
    }

    /// SHA-256 over identity, parameters and raw sample bits.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.id.as_bytes());
        h.update([0]);
        h.update(self.label.as_str().as_bytes());
        h.update([0]);
        for v in [
            self.params.center_freq_hz,
            self.params.prf_hz,
            self.params.range_resolution_m,
        ] {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update((self.params.n_range_bins as u64).to_le_bytes());
        h.update((self.params.segment_len as u64).to_le_bytes());
        for seg in &self.segments {
            h.update((seg.start as u64).to_le_bytes());
            h.update((seg.end as u64).to_le_bytes());
        }
        for z in self.samples.iter() {
            h.update(z.re.to_bits().to_le_bytes());
            h.update(z.im.to_bits().to_le_bytes());
        }
        h.finalize().into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SampleType {
    Float32,
    Float64,
}

impl SampleType {
    fn width(self) -> usize {
        match self {
            SampleType::Float32 => 4,
            SampleType::Float64 => 8,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    id: String,
    label: String,
    params: RadarParams,
    n_range_bins: usize,
    n_slow_time: usize,
    segments: Vec<[usize; 2]>,
    dtype: SampleType,
    endianness: String,
    layout: String,
}

fn fits_f32(v: f64) -> bool {
    f64::from(v as f32).to_bits() == v.to_bits()
}

/// Writes `m` as a container directory at `dir` (created if missing).
pub fn write_measurement(m: &IQMeasurement, dir: &Path) -> Result<()> {
    m.validate()?;
    let dtype = if m.samples.iter().all(|z| fits_f32(z.re) && fits_f32(z.im)) {
        SampleType::Float32
    } else {
        SampleType::Float64
    };
    let manifest = Manifest {
        format: CONTAINER_FORMAT.into(),
        version: CONTAINER_VERSION,
        id: m.id.clone(),
        label: m.label.as_str().into(),
        params: m.params,
        n_range_bins: m.samples.nrows(),
        n_slow_time: m.samples.ncols(),
        segments: m.segments.iter().map(|s| [s.start, s.end]).collect(),
        dtype,
        endianness: "little".into(),
        layout: "interleaved-iq,row-major[range,slow_time]".into(),
    };

    let mut payload = Vec::with_capacity(m.samples.len() * 2 * dtype.width());
    for z in m.samples.iter() {
        match dtype {
            SampleType::Float32 => {
                payload.extend_from_slice(&(z.re as f32).to_le_bytes());
                payload.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
            SampleType::Float64 => {
                payload.extend_from_slice(&z.re.to_le_bytes());
                payload.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }

    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    let payload_path = dir.join(PAYLOAD_FILE);
    let mut f = fs::File::create(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
    f.write_all(&payload).map_err(|e| Error::io(&payload_path, e))?;
    Ok(())
}

/// Loads and validates the container at `dir`.
pub fn load_measurement(dir: &Path) -> Result<IQMeasurement> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(Error::MissingManifest(manifest_path));
    }
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: manifest_path.clone(),
        message: e.to_string(),
    })?;
    if manifest.format != CONTAINER_FORMAT || manifest.version != CONTAINER_VERSION {
        return Err(Error::Manifest {
            path: manifest_path,
            message: format!("unsupported format {} v{}", manifest.format, manifest.version),
        });
    }
    if manifest.endianness != "little" {
        return Err(Error::Manifest {
            path: manifest_path,
            message: format!("unsupported endianness {:?}", manifest.endianness),
        });
    }
    let label: Class = manifest.label.parse()?;
    if manifest.n_range_bins != manifest.params.n_range_bins {
        return Err(Error::DimensionMismatch(format!(
            "manifest n_range_bins {} disagrees with params {}",
            manifest.n_range_bins, manifest.params.n_range_bins
        )));
    }

    let payload_path = dir.join(PAYLOAD_FILE);
    let bytes = fs::read(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
    let n_values = manifest.n_range_bins * manifest.n_slow_time;
    let expected = n_values * 2 * manifest.dtype.width();
    if bytes.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "manifest declares {} x {} complex samples ({expected} bytes), payload has {} bytes",
            manifest.n_range_bins,
            manifest.n_slow_time,
            bytes.len()
        )));
    }
    let values: Vec<Complex64> = match manifest.dtype {
        SampleType::Float32 => bytes
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes(c[0..4].try_into().unwrap());
                let im = f32::from_le_bytes(c[4..8].try_into().unwrap());
                Complex64::new(re.into(), im.into())
            })
            .collect(),
        SampleType::Float64 => bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[0..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..16].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect(),
    };
    let samples = Array2::from_shape_vec((manifest.n_range_bins, manifest.n_slow_time), values)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;

    let m = IQMeasurement {
        id: manifest.id,
        label,
        params: manifest.params,
        samples,
        segments: manifest.segments.iter().map(|[a, b]| *a..*b).collect(),
    };
    m.validate()?;
    Ok(m)
}

/// Loads every container below `root` (one directory level), sorted by id.
pub fn load_dataset(root: &Path) -> Result<Vec<IQMeasurement>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        if path.is_dir() && path.join(MANIFEST_FILE).is_file() {
            dirs.push(path);
        }
    }
    let mut out = dirs
        .iter()
        .map(|d| load_measurement(d))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// Parameters of one synthetic target.
///
/// `micro_rate_hz` is the rotor rate for drones (HERM comb spacing) and the
/// wing-flap rate for birds. `micro_amplitude_hz` is the peak Doppler
/// excursion of the flapping FM; drones ignore it and reflectors require 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthTargetSpec {
    pub kind: Class,
    pub body_doppler_hz: f64,
    pub micro_rate_hz: f64,
    pub micro_amplitude_hz: f64,
    pub n_segments: usize,
    pub seed: u64,
}

/// Relative power of the white floor added to every synthetic cube.
pub const SYNTH_FLOOR_DB: f64 = -60.0;
const DRONE_HARMONICS: usize = 3;

impl SynthTargetSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.micro_rate_hz >= 0.0 && self.micro_rate_hz.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "micro_rate_hz must be >= 0, got {}",
                self.micro_rate_hz
            )));
        }
        if !self.body_doppler_hz.is_finite() || !self.micro_amplitude_hz.is_finite() {
            return Err(Error::InvalidParam("non-finite synthesis parameter".into()));
        }
        if self.n_segments == 0 {
            return Err(Error::InvalidParam("n_segments must be >= 1".into()));
        }
        match self.kind {
            Class::Bird if !(1.0..=20.0).contains(&self.micro_rate_hz) => Err(Error::InvalidParam(format!(
                "bird flap rate must lie in [1, 20] Hz, got {}",
                self.micro_rate_hz
            ))),
            Class::Reflector if self.micro_amplitude_hz != 0.0 => Err(Error::InvalidParam(
                "reflector micro_amplitude_hz must be 0".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Largest instantaneous |Doppler| the target produces.
    pub fn doppler_extent_hz(&self) -> f64 {
        let micro = match self.kind {
            Class::Reflector => 0.0,
            Class::Bird => self.micro_amplitude_hz.abs(),
            Class::Drone => DRONE_HARMONICS as f64 * self.micro_rate_hz,
        };
        self.body_doppler_hz.abs() + micro
    }
}

/// Generates the radar cube of one synthetic target.
///
/// The target occupies a single range bin chosen from the seed; every bin
/// also carries complex white noise 60 dB below the target power.
pub fn synth_measurement(spec: &SynthTargetSpec, params: &RadarParams) -> Result<IQMeasurement> {
    spec.validate()?;
    params.validate()?;
    let nyquist = params.prf_hz / 2.0;
    let extent = spec.doppler_extent_hz();
    if extent >= nyquist {
        return Err(Error::Aliasing {
            extent_hz: extent,
            nyquist_hz: nyquist,
        });
    }

    let mut rng = seed::rng(spec.seed);
    let target_bin = rng.random_range(0..params.n_range_bins);
    let amplitude: f64 = rng.random_range(0.5..2.0);
    let phase0: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let micro_phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let harmonic_phases: Vec<f64> = (0..DRONE_HARMONICS)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();

    let n_slow = spec.n_segments * params.segment_len;
    let tau = std::f64::consts::TAU;
    let mut samples = Array2::<Complex64>::zeros((params.n_range_bins, n_slow));
    for n in 0..n_slow {
        let t = n as f64 / params.prf_hz;
        let carrier_phase = tau * spec.body_doppler_hz * t + phase0;
        let z = match spec.kind {
            Class::Reflector => Complex64::from_polar(amplitude, carrier_phase),
            Class::Bird => {
                let fm = spec.micro_amplitude_hz / spec.micro_rate_hz
                    * (tau * spec.micro_rate_hz * t + micro_phase).sin();
                Complex64::from_polar(amplitude, carrier_phase + fm)
            }
            Class::Drone => {
                let envelope: f64 = 1.0
                    + harmonic_phases
                        .iter()
                        .enumerate()
                        .map(|(i, ph)| {
                            let k = (i + 1) as f64;
                            0.5 / k * (tau * k * spec.micro_rate_hz * t + ph).cos()
                        })
                        .sum::<f64>();
                Complex64::from_polar(amplitude * envelope, carrier_phase)
            }
        };
        samples[[target_bin, n]] = z;
    }

    let floor_sigma = amplitude * (10f64.powf(SYNTH_FLOOR_DB / 10.0) / 2.0).sqrt();
    for z in samples.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *z += Complex64::new(re, im) * floor_sigma;
        // containers store float32
        *z = Complex64::new(f64::from(z.re as f32), f64::from(z.im as f32));
    }

    IQMeasurement::new(
        format!("{}-{:016x}", spec.kind, spec.seed),
        spec.kind,
        *params,
        samples,
    )
}

/// Class composition of a synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetShape {
    Balanced { per_class: usize },
    /// Drone : bird : reflector = 44 : 56 : 19, apportioned by largest remainder.
    PaperRatio { total: usize },
}

pub const PAPER_RATIO: [(Class, usize); 3] = [(Class::Drone, 44), (Class::Bird, 56), (Class::Reflector, 19)];

impl DatasetShape {
    /// Measurements per class, indexed by [`Class::id`].
    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0usize; 3];
        match *self {
            DatasetShape::Balanced { per_class } => counts = [per_class; 3],
            DatasetShape::PaperRatio { total } => {
                let weight_sum: usize = PAPER_RATIO.iter().map(|(_, w)| w).sum();
                let mut rem = Vec::with_capacity(3);
                let mut assigned = 0;
                for (class, w) in PAPER_RATIO {
                    let exact = total * w;
                    counts[class.id()] = exact / weight_sum;
                    assigned += exact / weight_sum;
                    rem.push((exact % weight_sum, class));
                }
                rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
                for (_, class) in rem.into_iter().take(total - assigned) {
                    counts[class.id()] += 1;
                }
            }
        }
        counts
    }
}

/// Segment count of the `index`-th member of `class`. Depends only on the
/// position in the dataset, so datasets drawn with different seeds share
/// their shapes.
pub fn synth_segment_count(class: Class, index: usize) -> usize {
    let mut rng = seed::rng(seed::derive(seed::hash_str(class.as_str()), index as u64));
    match class {
        Class::Drone => rng.random_range(24..=48),
        Class::Bird => rng.random_range(8..=40),
        Class::Reflector => rng.random_range(6..=30),
    }
}

/// Draws the per-target parameters for the `index`-th member of `class`.
pub fn jittered_spec(class: Class, index: usize, dataset_seed: u64) -> SynthTargetSpec {
    let s = seed::derive(seed::derive_tag(dataset_seed, class.as_str()), index as u64);
    let mut rng = seed::rng(seed::derive_tag(s, "jitter"));
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let (body, rate, amp) = match class {
        Class::Drone => (rng.random_range(-150.0..150.0), rng.random_range(600.0..1400.0), 0.0),
        Class::Bird => (
            sign * rng.random_range(300.0..1500.0),
            rng.random_range(5.0..7.0),
            rng.random_range(150.0..500.0),
        ),
        Class::Reflector => (sign * rng.random_range(15.0..60.0), 0.0, 0.0),
    };
    let n_seg = synth_segment_count(class, index);
    SynthTargetSpec {
        kind: class,
        body_doppler_hz: body,
        micro_rate_hz: rate,
        micro_amplitude_hz: amp,
        n_segments: n_seg,
        seed: s,
    }
}

/// Generates a dataset; ids are `<class>-<index:04>`, output sorted by id.
pub fn synth_dataset(shape: DatasetShape, seed: u64, params: &RadarParams) -> Result<Vec<IQMeasurement>> {
    let counts = shape.class_counts();
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::InvalidParam(format!(
            "every class needs at least one measurement, got {counts:?}"
        )));
    }
    let jobs: Vec<(Class, usize)> = Class::ALL
        .iter()
        .flat_map(|&c| (0..counts[c.id()]).map(move |i| (c, i)))
        .collect();
    use rayon::prelude::*;
    let mut out = jobs
        .par_iter()
        .map(|&(class, i)| {
            let spec = jittered_spec(class, i, seed);
            let mut m = synth_measurement(&spec, params)?;
            m.id = format!("{class}-{i:04}");
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params() -> RadarParams {
        RadarParams {
            n_range_bins: 2,
            segment_len: 32,
            ..RadarParams::default()
        }
    }

    #[test]
    fn class_encoding_is_lexicographic() {
        let mut names: Vec<_> = Class::ALL.iter().map(|c| c.as_str()).collect();
        let sorted = {
            let mut s = names.clone();
            s.sort();
            s
        };
        assert_eq!(names, sorted);
        names.dedup();
        assert_eq!(names.len(), 3);
        assert_eq!("Drone".parse::<Class>().unwrap(), Class::Drone);
        assert!(matches!("helicopter".parse::<Class>(), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn new_cuts_equal_segments() {
        let m = IQMeasurement::new("x", Class::Bird, small_params(), Array2::from_elem((2, 64), Complex64::new(1.0, 0.0)))
            .unwrap();
        assert_eq!(m.segments, vec![0..32, 32..64]);
        assert!(IQMeasurement::new("x", Class::Bird, small_params(), Array2::zeros((2, 60))).is_err());
        assert!(IQMeasurement::new("x", Class::Bird, small_params(), Array2::zeros((3, 64))).is_err());
    }

    #[test]
    fn paper_ratio_census() {
        let counts = DatasetShape::PaperRatio { total: 119 }.class_counts();
        assert_eq!(counts[Class::Drone.id()], 44);
        assert_eq!(counts[Class::Bird.id()], 56);
        assert_eq!(counts[Class::Reflector.id()], 19);
        for total in 3..300 {
            let c = DatasetShape::PaperRatio { total }.class_counts();
            assert_eq!(c.iter().sum::<usize>(), total);
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = jittered_spec(Class::Bird, 0, 1);
        s.micro_rate_hz = 25.0;
        assert!(s.validate().is_err());
        let mut r = jittered_spec(Class::Reflector, 0, 1);
        r.micro_amplitude_hz = 3.0;
        assert!(r.validate().is_err());
        let mut d = jittered_spec(Class::Drone, 0, 1);
        d.micro_rate_hz = -1.0;
        assert!(d.validate().is_err());
    }

    #[test]
    fn aliasing_guard() {
        let spec = SynthTargetSpec {
            kind: Class::Drone,
            body_doppler_hz: 0.0,
            micro_rate_hz: 3000.0,
            micro_amplitude_hz: 0.0,
            n_segments: 2,
            seed: 1,
        };
        assert!(matches!(
            synth_measurement(&spec, &RadarParams::default()),
            Err(Error::Aliasing { .. })
        ));
    }

    #[test]
    fn synthesis_is_deterministic_and_f32_exact() {
        let spec = jittered_spec(Class::Drone, 3, 42);
        let a = synth_measurement(&spec, &small_params()).unwrap();
        let b = synth_measurement(&spec, &small_params()).unwrap();
        assert_eq!(a, b);
        assert!(a.samples.iter().all(|z| fits_f32(z.re) && fits_f32(z.im)));
    }

    #[test]
    fn balanced_dataset_counts() {
        let ds = synth_dataset(DatasetShape::Balanced { per_class: 5 }, 42, &small_params()).unwrap();
        assert_eq!(ds.len(), 15);
        for c in Class::ALL {
            assert_eq!(ds.iter().filter(|m| m.label == c).count(), 5);
        }
        let other = synth_dataset(DatasetShape::Balanced { per_class: 5 }, 43, &small_params()).unwrap();
        for (a, b) in ds.iter().zip(&other) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.samples.dim(), b.samples.dim());
            assert_ne!(a.samples, b.samples);
        }
    }
}
