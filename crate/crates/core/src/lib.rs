//! Flood susceptibility mapping at desk scale.
//!
//! Raster ingestion and alignment, FSM-driven sample selection and splitting,
//! a small frozen-encoder segmentation model trained with focal loss, and
//! hit-rate / true-alarm-rate / F1 evaluation.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common choices.

pub mod ablation;
pub mod config;
pub mod error;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod raster;
pub mod render;
pub mod sampling;
pub mod scalar;
pub mod synthetic;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar used by the command-line pipeline.
pub type Real = f32;

pub type ToyModel64 = model::ToyModel<f64>;
pub type ToyModel32 = model::ToyModel<f32>;
pub type FeatureMap64 = model::FeatureMap<f64>;
pub type FeatureMap32 = model::FeatureMap<f32>;
pub type TrainState64 = model::TrainState<f64>;
pub type TrainState32 = model::TrainState<f32>;
pub type MetricReport64 = metrics::MetricReport<f64>;
pub type MetricReport32 = metrics::MetricReport<f32>;
