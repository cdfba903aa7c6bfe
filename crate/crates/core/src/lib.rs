//! Fairness-targeted adversarial attacks and fair adversarial training for
//! small tabular MLP classifiers.

pub mod attack;
pub mod cli;
pub mod data;
pub mod error;
pub mod experiment;
pub mod fairness;
pub mod model;
pub mod theory;
pub mod train;

pub use error::{Error, Result};
