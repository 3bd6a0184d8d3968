//! Probability-flow ODE sampling without learning: empirical and
//! density-driven drift, Euler integration, annealed minimization and the
//! metrics used to check them.

pub mod drift;
pub mod error;
pub mod flow;
pub mod measures;
pub mod metrics;
pub mod optimize;
pub mod report;
pub mod schedule;
pub mod validation;

pub use error::{Error, Result};
