//! Simulation of on-the-fly distributed Tucker decomposition: devices
//! stream random sketches of their data over a MIMO over-the-air
//! aggregation link, and the server progressively estimates the principal
//! eigenspace of each tensor unfolding.
//!
//! Modules are layered bottom-up:
//! - [`tensor`]: dense tensors, unfolding, planted-spectrum synthetic data;
//! - [`sketch`]: per-slot Gaussian maps and device-side sketches;
//! - [`channel`]: fading channels, beamforming and over-the-air aggregation;
//! - [`detector`]: whitening and the ML subspace estimate;
//! - [`selection`]: threshold-based sketch selection;
//! - [`analysis`]: the error metric and its bounds;
//! - [`baseline`]: one-shot eigendecomposition baselines;
//! - [`harness`] and [`config`]: Monte Carlo experiments and their output.

// NaN must fail validation, so negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod baseline;
pub mod channel;
pub mod config;
pub mod detector;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod rng;
pub mod selection;
pub mod sketch;
pub mod stats;
pub mod tensor;

pub use error::{ConfigError, FlycomError, Result};
