//! Multi-instance partial-label learning with calibration-aware disambiguation.
//!
//! Bags of feature vectors carry a candidate label set that contains the
//! unknown true label. A gated attention network pools each bag into one
//! embedding, and training disambiguates the candidates with momentum label
//! weights while a per-bag modulating factor keeps the predicted confidences
//! calibrated.

pub mod calibration;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod losses;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod theory;
pub mod training;

pub use error::{Error, Result};
