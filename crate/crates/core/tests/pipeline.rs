mod common;

use std::fs;

use mdrobust::features::{extract, marginals, FeatureConfig};
use mdrobust::ingest::{
    load_dataset, load_measurement, synth_dataset, synth_measurement, write_measurement, DatasetShape,
    SynthTargetSpec,
};
use mdrobust::spectro::{build_spectrogram, doppler_axis, hann, read_spectrogram_dump, write_spectrogram_dump};
use mdrobust::{Class, Error, IQMeasurement, RadarParams};
use ndarray::Array2;
use num_complex::Complex64;

fn params() -> RadarParams {
    RadarParams::default()
}

fn spec(kind: Class, body: f64, rate: f64, amp: f64, n_segments: usize, seed: u64) -> SynthTargetSpec {
    SynthTargetSpec {
        kind,
        body_doppler_hz: body,
        micro_rate_hz: rate,
        micro_amplitude_hz: amp,
        n_segments,
        seed,
    }
}

#[test]
fn container_round_trip_small() {
    let p = RadarParams {
        n_range_bins: 2,
        segment_len: 32,
        ..params()
    };
    let samples = Array2::from_shape_fn((2, 64), |(r, n)| Complex64::new(r as f64 + 0.25, -(n as f64) * 0.5));
    let m = IQMeasurement::new("b1", Class::Bird, p, samples).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_measurement(&m, dir.path()).unwrap();
    let back = load_measurement(dir.path()).unwrap();
    assert_eq!(back.n_slow_time(), 64);
    assert_eq!(back.n_segments(), 2);
    assert_eq!(back, m);
}

#[test]
fn container_round_trip_is_bit_exact_for_f64_values() {
    let p = RadarParams {
        n_range_bins: 1,
        segment_len: 16,
        ..params()
    };
    let samples = Array2::from_shape_fn((1, 32), |(_, n)| Complex64::new((n as f64).sqrt(), 1.0 / (n as f64 + 3.0)));
    let m = IQMeasurement::new("x", Class::Drone, p, samples).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_measurement(&m, dir.path()).unwrap();
    let back = load_measurement(dir.path()).unwrap();
    for (a, b) in m.samples.iter().zip(back.samples.iter()) {
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }
}

fn written() -> (tempfile::TempDir, IQMeasurement) {
    let m = synth_measurement(&spec(Class::Reflector, 30.0, 0.0, 0.0, 2, 5), &params()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_measurement(&m, dir.path()).unwrap();
    (dir, m)
}

#[test]
fn truncated_payload_is_a_dimension_error() {
    let (dir, _) = written();
    let path = dir.path().join("iq.bin");
    let mut bytes = fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 64);
    fs::write(&path, bytes).unwrap();
    let err = load_measurement(dir.path()).unwrap_err();
    assert_eq!(err.class(), "dimension", "{err}");
}

#[test]
fn unknown_label_is_rejected() {
    let (dir, _) = written();
    let path = dir.path().join("manifest.json");
    let text = fs::read_to_string(&path).unwrap().replace("\"reflector\"", "\"helicopter\"");
    fs::write(&path, text).unwrap();
    let err = load_measurement(dir.path()).unwrap_err();
    assert!(matches!(err, Error::UnknownLabel(_)), "{err}");
}

#[test]
fn missing_manifest_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_measurement(dir.path()), Err(Error::MissingManifest(_))));
}

#[test]
fn non_finite_payload_is_rejected() {
    let (dir, _) = written();
    let path = dir.path().join("iq.bin");
    let mut bytes = fs::read(&path).unwrap();
    bytes[8..12].copy_from_slice(&f32::NAN.to_le_bytes());
    fs::write(&path, bytes).unwrap();
    assert!(matches!(load_measurement(dir.path()), Err(Error::NonFinite { .. })));
}

#[test]
fn nan_sample_is_rejected_before_write() {
    let (_, mut m) = written();
    m.samples[[0, 3]] = Complex64::new(f64::NAN, 0.0);
    let dir = tempfile::tempdir().unwrap();
    assert!(write_measurement(&m, dir.path()).is_err());
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn empty_segment_list_is_rejected() {
    let (_, mut m) = written();
    m.segments.clear();
    let dir = tempfile::tempdir().unwrap();
    assert!(write_measurement(&m, dir.path()).is_err());
}

#[test]
fn dataset_directory_round_trip() {
    let ds = synth_dataset(DatasetShape::Balanced { per_class: 2 }, 3, &params()).unwrap();
    let root = tempfile::tempdir().unwrap();
    for m in &ds {
        write_measurement(m, &root.path().join(&m.id)).unwrap();
    }
    fs::create_dir(root.path().join("not-a-container")).unwrap();
    assert_eq!(load_dataset(root.path()).unwrap(), ds);
}

#[test]
fn seed_changes_values_not_shapes() {
    let a = synth_dataset(DatasetShape::Balanced { per_class: 5 }, 42, &params()).unwrap();
    let b = synth_dataset(DatasetShape::Balanced { per_class: 5 }, 43, &params()).unwrap();
    assert_eq!(a.len(), 15);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.id, y.id);
        assert_eq!(x.samples.dim(), y.samples.dim());
        assert_ne!(x.samples, y.samples);
    }
}

#[test]
fn spectrogram_columns_match_direct_dft() {
    let m = synth_measurement(&spec(Class::Drone, 120.0, 900.0, 0.0, 3, 11), &params()).unwrap();
    let s = build_spectrogram(&m, 3).unwrap();
    let n = m.params.segment_len;
    let w = hann(n);
    let mut cols = Vec::new();
    for seg in &m.segments {
        // dominant range bin by direct energy summation
        let r = (0..m.params.n_range_bins)
            .max_by(|&a, &b| {
                let e = |r: usize| m.samples.row(r).slice(ndarray::s![seg.clone()]).iter().map(|z| z.norm_sqr()).sum::<f64>();
                e(a).total_cmp(&e(b)).then(b.cmp(&a))
            })
            .unwrap();
        let x: Vec<Complex64> = m.samples.row(r).slice(ndarray::s![seg.clone()]).to_vec();
        let mean = x.iter().sum::<Complex64>() / n as f64;
        let xw: Vec<Complex64> = x.iter().zip(&w).map(|(v, wi)| (v - mean) * wi).collect();
        cols.push(common::direct_dft_power(&xw));
    }
    let max = cols.iter().flatten().copied().fold(0.0, f64::max);
    for (j, col) in cols.iter().enumerate() {
        for (k, &p) in col.iter().enumerate() {
            let expect = (10.0 * (p / max).log10()).max(-120.0);
            assert!((s.values_db[[k, j]] - expect).abs() < 1e-6, "bin {k} col {j}");
        }
    }
}

#[test]
fn reflector_power_concentrates_around_body_doppler() {
    let p = params();
    let bin_hz = p.doppler_resolution_hz();
    for k in [1i32, -2, 5] {
        let m = synth_measurement(&spec(Class::Reflector, k as f64 * bin_hz, 0.0, 0.0, 32, 9), &p).unwrap();
        let s = build_spectrogram(&m, 32).unwrap();
        let lin = s.values_db.mapv(|d| 10f64.powf(d / 10.0));
        let center = (p.segment_len as i32 / 2 + k) as usize;
        let near: f64 = (center - 1..=center + 1).map(|r| lin.row(r).sum()).sum();
        assert!(near / lin.sum() > 0.99, "k={k}: {}", near / lin.sum());
    }
}

#[test]
fn bird_flap_shows_in_column_energy() {
    let p = params();
    let m = synth_measurement(&spec(Class::Bird, 0.0, 6.0, 200.0, 96, 4), &p).unwrap();
    let s = build_spectrogram(&m, 96).unwrap();
    let axis = doppler_axis(p.segment_len, p.prf_hz);
    let upper: Vec<f64> = (0..s.n_time())
        .map(|j| {
            axis.iter()
                .enumerate()
                .filter(|(_, &f)| f > 0.0)
                .map(|(k, _)| 10f64.powf(s.values_db[[k, j]] / 10.0))
                .sum()
        })
        .collect();
    let mean = upper.iter().sum::<f64>() / upper.len() as f64;
    let c: Vec<f64> = upper.iter().map(|v| v - mean).collect();
    let acf = |lag: usize| (0..c.len() - lag).map(|i| c[i] * c[i + lag]).sum::<f64>() / (c.len() - lag) as f64;
    let period_cols = p.prf_hz / p.segment_len as f64 / 6.0;
    let best = (5..20).max_by(|&a, &b| acf(a).total_cmp(&acf(b))).unwrap();
    assert!((best as f64 - period_cols).abs() <= 1.0, "peak lag {best}, expected {period_cols:.2}");
}

fn features_of(kind: Class, body: f64, rate: f64, amp: f64) -> mdrobust::FeatureVector {
    let m = synth_measurement(&spec(kind, body, rate, amp, 32, 21), &params()).unwrap();
    extract(&build_spectrogram(&m, 32).unwrap(), &FeatureConfig::default()).unwrap()
}

#[test]
fn class_feature_orderings() {
    let reflector = features_of(Class::Reflector, 40.0, 0.0, 0.0);
    let bird = features_of(Class::Bird, 600.0, 6.0, 300.0);
    let drone = features_of(Class::Drone, 50.0, 1000.0, 0.0);
    assert!(reflector.spectral_entropy < bird.spectral_entropy);
    assert!(reflector.zero_doppler_ratio > 0.9, "{}", reflector.zero_doppler_ratio);
    assert!(reflector.sler < 0.1, "{}", reflector.sler);
    assert!(drone.sler > reflector.sler);
}

#[test]
fn spectrogram_dump_round_trip() {
    let m = synth_measurement(&spec(Class::Bird, 300.0, 6.0, 200.0, 20, 2), &params()).unwrap();
    let s = build_spectrogram(&m, 32).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.bin");
    write_spectrogram_dump(&s, &path).unwrap();
    let back = read_spectrogram_dump(&path).unwrap();
    assert_eq!(back.pad_mask, s.pad_mask);
    assert_eq!(back.doppler_axis_hz, s.doppler_axis_hz);
    for (a, b) in s.values_db.iter().zip(back.values_db.iter()) {
        assert_eq!(*a as f32, *b as f32);
    }
    // padded columns carry no energy after linearization
    let ms = marginals(&s).unwrap();
    assert_eq!(ms.p_lin.ncols(), 20);
}
