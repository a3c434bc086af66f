//! Near-field Wi-Fi multi-person sensing toolkit.
//!
//! A subject sitting within a few centimeters of a Wi-Fi device dominates the
//! channel variation seen on that device's link, so per-device CSI separates
//! people physically. This crate models that effect end to end:
//!
//! * [`geometry`]: reflection gains, variation power, VIR, feasible-region maps
//! * [`capacity`]: closed-form bounds on subject count and spacing
//! * [`scene`]: synthetic multi-subject scenes rendered to CSI series
//! * [`traffic`]: bursty frame-arrival processes that sparsify sampling
//! * [`bfi`]: SVD, Givens-angle beamforming feedback, motion sensitivity
//! * [`sra`]: segmentation, resampling, spectrogram and training-set builder
//! * [`tcn`]: the temporal-convolution autoencoder used for sparse recovery
//! * [`metrics`]: recovery error, breathing rate, spectral entropy, CSI vs BFI
//! * [`coordinator`]: VIR-based admission of users

pub mod bfi;
pub mod capacity;
pub mod config;
pub mod coordinator;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod scene;
pub mod sra;
pub mod tcn;
pub mod traffic;

pub use error::{Error, Result};
