//! Sources of the target measure and seeded random-variate streams.

mod dataset;
pub mod density;
pub mod funnel;
pub mod grid;
pub mod objective;
pub mod reference;
mod rng;

pub use dataset::{load_dataset, parse_dataset, Dataset, SampleCloud};
pub use density::{DensityKind, DensitySpec, DENSITY_NAMES};
pub use funnel::FunnelSpec;
pub use grid::{GridFunction, GridMeta};
pub use objective::{Objective, OBJECTIVE_NAMES};
pub use reference::{quantile_cloud, reference_sampler, InverseCdf};
pub use rng::RngStream;
