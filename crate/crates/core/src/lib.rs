//! Magnetometer side-channel fingerprinting toolkit.
//!
//! The crate covers the whole attack pipeline on synthetic data:
//!
//! * [`trace`]: sensor recordings, CPU patterns, 1-D traces and their JSON Lines persistence.
//! * [`simulator`]: class signatures and the linear CPU-to-magnetometer coupling model.
//! * [`preprocess`]: PCA reduction, inverse augmentation, range normalization and resampling.
//! * [`classifier`]: binned-mean features and a CART/Gini random forest with grid-search CV.
//! * [`detector`]: averaged patterns, cross-correlation scans and peak-based detection.
//! * [`motion`]: gyroscope-based rejection of movement-disturbed traces.
//! * [`metrics`]: confusion accounting and precision/recall/F1 reports.
//! * [`harness`]: end-to-end experiment scenarios.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the `parallel`
//! feature is enabled and plain iterators otherwise. Results never depend on the
//! number of worker threads.

pub mod classifier;
pub mod detector;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod motion;
pub mod par;
pub mod preprocess;
pub mod seed;
pub mod simulator;
pub mod trace;

pub use error::{Error, Result};
pub use trace::{CpuPattern, Dataset, SensorRecording, Trace1D, Vec3};
