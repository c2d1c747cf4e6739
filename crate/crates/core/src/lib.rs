//! Noise-robustness study of handcrafted micro-Doppler features.
//!
//! The pipeline runs in one direction:
//!
//! ```text
//! IQ container ─► noise injection ─► spectrogram ─► ten features ─► SVM / Random Forest ─► report
//! ```
//!
//! * [`ingest`] reads and writes measurement containers and synthesizes
//!   drone / bird / reflector returns.
//! * [`noise`] corrupts raw IQ with calibrated AWGN, phase jitter, or both.
//! * [`spectro`] forms the measurement-level dB-normalized spectrogram.
//! * [`features`] computes the marginal-based descriptors.
//! * [`ml`] holds the scaler, label encoder, SMO-trained SVM, Random Forest,
//!   metrics and permutation importance.
//! * [`eval`] implements the split plan and the cross-validated sweeps.

pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod ml;
pub mod noise;
pub mod seed;
pub mod spectro;

pub use error::{Error, Result};
pub use features::{Feature, FeatureConfig, FeatureVector};
pub use ingest::{Class, IQMeasurement, RadarParams};
pub use noise::NoiseSpec;
pub use spectro::Spectrogram;

/// Seed used by every stochastic stage unless overridden.
pub const DEFAULT_SEED: u64 = 42;
