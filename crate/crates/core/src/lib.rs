//! Simulation and analysis toolkit for three-photon Rydberg-atom RF
//! electrometry with probe-transmission (EIT/EIA) and RF-gated fluorescence
//! readout.

// Range checks are written as `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod error;
pub mod lindblad;
pub mod scheme;

pub use error::{Error, Result};
pub mod doppler;
pub mod observables;
pub mod peaks;
pub mod dynamics;
pub mod calibrate;
pub mod ingest;
