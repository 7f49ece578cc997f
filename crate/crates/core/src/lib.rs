//! Multi-person 3D skeletal motion forecasting.
//!
//! The crate covers the full benchmark lifecycle: synthetic scene
//! generation, preprocessing of raw joint exports, the SocialTGCN forecaster
//! with hand-written reverse-mode gradients, training, and the evaluation
//! metric suite (GJPE, AJPE, RFDE, power-spectrum entropy and KLD).

pub mod data;
pub mod error;
pub mod frequency;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
