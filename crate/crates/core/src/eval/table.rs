//! Per-measurement feature rows for one noise condition, with a
//! content-addressed cache shared across classifiers and runs.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{extract, Feature, FeatureConfig, FeatureFlags, FeatureVector};
use crate::ingest::{Class, IQMeasurement};
use crate::noise::NoiseSpec;
use crate::spectro::build_spectrogram;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub measurement_id: String,
    pub label: Class,
    pub noise: NoiseSpec,
    pub features: FeatureVector,
}

/// Rows of one condition, sorted by measurement id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<FeatureRow>,
    index: HashMap<String, usize>,
}

impl FeatureTable {
    pub fn new(mut rows: Vec<FeatureRow>) -> Result<Self> {
        rows.sort_by(|a, b| a.measurement_id.cmp(&b.measurement_id));
        let mut index = HashMap::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            if index.insert(r.measurement_id.clone(), i).is_some() {
                return Err(Error::InvalidParam(format!("duplicate measurement id {}", r.measurement_id)));
            }
        }
        Ok(FeatureTable { rows, index })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&FeatureRow> {
        self.index.get(id).map(|&i| &self.rows[i])
    }

    pub fn labels(&self) -> Vec<(String, Class)> {
        self.rows.iter().map(|r| (r.measurement_id.clone(), r.label)).collect()
    }

    /// Design matrix over `features` for `ids` (in the given order) and the
    /// encoded labels.
    pub fn matrix(&self, features: &[Feature], ids: &[String]) -> Result<(Array2<f64>, Vec<usize>)> {
        let mut x = Array2::zeros((ids.len(), features.len()));
        let mut y = Vec::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            let row = self
                .get(id)
                .ok_or_else(|| Error::InvalidParam(format!("no features for measurement {id}")))?;
            for (j, &f) in features.iter().enumerate() {
                x[[i, j]] = row.features.get(f);
            }
            y.push(row.label.id());
        }
        Ok((x, y))
    }
}

pub const CSV_HEADER_PREFIX: [&str; 4] = ["measurement_id", "label", "noise_mode", "noise_param"];

pub fn csv_header() -> String {
    let mut cols: Vec<&str> = CSV_HEADER_PREFIX.to_vec();
    cols.extend(Feature::ALL.iter().map(|f| f.name()));
    cols.push("flags");
    cols.join(",")
}

/// One line per row; floats use the shortest exact representation.
pub fn write_rows_csv(rows: &[FeatureRow]) -> String {
    let mut out = csv_header();
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}",
            r.measurement_id,
            r.label,
            r.noise.mode.as_str(),
            r.noise.param_string()
        ));
        for v in r.features.to_array() {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{}\n", r.features.flags));
    }
    out
}

/// Parses the output of [`write_rows_csv`]. `seed` is attached to each
/// noise spec, since the table does not carry it.
pub fn read_rows_csv(text: &str, seed: u64) -> Result<Vec<FeatureRow>> {
    let mut lines = text.lines();
    let bad = |line: usize, msg: String| Error::InvalidParam(format!("feature table line {line}: {msg}"));
    match lines.next() {
        Some(h) if h.trim() == csv_header() => {}
        _ => return Err(bad(1, "unexpected header".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let n = i + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 15 {
            return Err(bad(n, format!("expected 15 columns, got {}", cols.len())));
        }
        let label: Class = cols[1].parse()?;
        let spec_str = if cols[3].is_empty() {
            cols[2].to_string()
        } else {
            format!("{}:{}", cols[2], cols[3])
        };
        let noise = spec_str.parse::<NoiseSpec>()?.with_seed(seed);
        let mut values = [0.0; 10];
        for (k, v) in values.iter_mut().enumerate() {
            *v = cols[4 + k]
                .parse()
                .map_err(|_| bad(n, format!("bad number {:?}", cols[4 + k])))?;
        }
        let flags: FeatureFlags = cols[14].parse()?;
        rows.push(FeatureRow {
            measurement_id: cols[0].to_string(),
            label,
            noise,
            features: FeatureVector::from_array(values, flags),
        });
    }
    Ok(rows)
}

/// Cache key over everything that determines one feature vector.
pub fn feature_key(content_hash: &[u8; 32], spec: &NoiseSpec, window: usize, config: &FeatureConfig) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(content_hash);
    h.update(spec.to_string().as_bytes());
    h.update(spec.seed.to_le_bytes());
    h.update((window as u64).to_le_bytes());
    h.update(serde_json::to_vec(config).expect("feature config serializes"));
    h.finalize().into()
}

/// Insert-if-absent map from [`feature_key`] to feature vector, optionally
/// mirrored to one JSON file per key under a directory.
#[derive(Debug, Default)]
pub struct FeatureCache {
    mem: RwLock<HashMap<[u8; 32], FeatureVector>>,
    dir: Option<PathBuf>,
}

impl FeatureCache {
    pub fn in_memory() -> Self {
        FeatureCache::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(FeatureCache {
            mem: RwLock::default(),
            dir: Some(dir),
        })
    }

    pub fn len(&self) -> usize {
        self.mem.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn path(dir: &Path, key: &[u8; 32]) -> PathBuf {
        dir.join(format!("{}.json", hex::encode(key)))
    }

    pub fn get(&self, key: &[u8; 32]) -> Option<FeatureVector> {
        if let Some(v) = self.mem.read().unwrap().get(key) {
            return Some(*v);
        }
        let dir = self.dir.as_ref()?;
        let text = fs::read_to_string(Self::path(dir, key)).ok()?;
        let v: FeatureVector = serde_json::from_str(&text).ok()?;
        self.mem.write().unwrap().entry(*key).or_insert(v);
        Some(v)
    }

    /// Stores `v` unless the key is already present; returns the stored value.
    pub fn insert(&self, key: [u8; 32], v: FeatureVector) -> Result<FeatureVector> {
        let stored = *self.mem.write().unwrap().entry(key).or_insert(v);
        if let Some(dir) = &self.dir {
            let path = Self::path(dir, &key);
            if !path.exists() {
                let tmp = dir.join(format!(".{}.{}.tmp", hex::encode(key), std::process::id()));
                fs::write(&tmp, serde_json::to_vec(&stored)?).map_err(|e| Error::io(&tmp, e))?;
                fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
            }
        }
        Ok(stored)
    }
}

/// Noise, spectrogram and features for one measurement.
pub fn measurement_features(
    m: &IQMeasurement,
    spec: &NoiseSpec,
    window: usize,
    config: &FeatureConfig,
) -> Result<FeatureVector> {
    let noisy = spec.apply(m)?;
    let s = build_spectrogram(&noisy, window)?;
    extract(&s, config)
}

/// Features of every measurement under `spec`. `hashes[i]` is the content
/// hash of `measurements[i]`.
pub fn compute_table(
    measurements: &[IQMeasurement],
    hashes: &[[u8; 32]],
    spec: &NoiseSpec,
    window: usize,
    config: &FeatureConfig,
    cache: &FeatureCache,
) -> Result<FeatureTable> {
    if hashes.len() != measurements.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} hashes for {} measurements",
            hashes.len(),
            measurements.len()
        )));
    }
    let rows = measurements
        .par_iter()
        .zip(hashes.par_iter())
        .map(|(m, h)| {
            let key = feature_key(h, spec, window, config);
            let features = match cache.get(&key) {
                Some(v) => v,
                None => cache.insert(key, measurement_features(m, spec, window, config)?)?,
            };
            Ok(FeatureRow {
                measurement_id: m.id.clone(),
                label: m.label,
                noise: *spec,
                features,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureTable::new(rows)
}
