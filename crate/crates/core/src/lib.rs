//! Beam-space MIMO radar sensing over OTFS.
//!
//! The crate simulates a mono-static base station that transmits OTFS frames
//! through a wide flat-top beam and receives the backscatter through a small
//! number of RF chains, each behind an analog beam drawn from a codebook.
//! On top of the simulator it provides target discovery (GLRT map, OS-CFAR,
//! successive cancellation), per-user parameter estimation for tracking, and
//! Fisher-information bounds for comparing receive beamforming strategies.

pub mod array;
pub mod beamforming;
pub mod channel;
pub mod crlb;
pub mod detector;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod otfs;
pub mod rng;
pub mod scenario;
pub mod stats;
#[cfg(test)]
mod testutil;

pub use error::{RadarError, Result};

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex64;
