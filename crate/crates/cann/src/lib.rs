//! Claim count regression for vehicle insurance: log-linear benchmark models
//! and combined log-linear + multilayer perceptron models, with Poisson,
//! negative binomial, and longitudinal multivariate negative binomial heads.
//!
//! The crate also ships the surrounding machinery: telematics trip ingestion
//! and feature construction, preprocessing recipes, a seeded synthetic
//! portfolio generator with known ground truth, proper-scoring evaluation,
//! permutation feature importance, and partial dependence.

pub mod dataset;
pub mod distributions;
pub mod error;
pub mod eval;
pub mod features;
pub mod glm;
pub mod model;
pub mod nn;
pub mod seeding;
pub mod special;
pub mod synth;

pub use error::{CannError, Result};
