//! Split federated learning with hybrid-order client updates.
//!
//! The server trains its half with exact gradients; clients update from
//! seeded Gaussian perturbations and scalar projections only.

pub mod comm;
pub mod config;
pub mod data;
pub mod error;
pub mod latency;
pub mod model;
pub mod numeric;
pub mod optim;
pub mod protocol;
pub mod rng;
pub mod runner;
pub mod zo;

pub use error::{Error, Result};
