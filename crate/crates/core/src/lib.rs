//! Discrete Bayesian-network risk modelling.

pub mod analytics;
pub mod api;
pub mod data;
pub mod demo;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod io;
pub mod model;
pub mod params;
pub mod structure;
pub mod synthetic;

pub use data::Dataset;
pub use error::{Error, Result};
