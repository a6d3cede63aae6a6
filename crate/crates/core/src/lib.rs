//! Personalized multi-step blood-glucose forecasting.
//!
//! A bidirectional GRU encoder reads the most recent CGM readings together
//! with a learned per-patient embedding and calendar features; a GRU decoder
//! with multi-head additive attention rolls the forecast out step by step.
//! Training uses a trimmed mini-batch loss and a decaying element-wise
//! gradient clip. The crate also carries the data pipeline, baselines and the
//! stratified evaluation protocol used to compare them.

pub mod baselines;
pub mod data;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod training;

pub use error::{Error, Result};
