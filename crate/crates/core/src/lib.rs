//! Calibration and simulation of max-factor Bernoulli mixture models for
//! loss-count panels.

pub mod calibrate;
pub mod error;
pub mod factor_model;
pub mod likelihood;
pub mod montecarlo;
pub mod nonparametric;
pub mod numerics;
pub mod panel;
pub mod streams;

pub use error::{Error, Result};
