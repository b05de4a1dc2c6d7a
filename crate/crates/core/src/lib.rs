pub mod allocator;
pub mod blocks;
pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod forecast;
pub mod linalg;
pub mod mcmc;
pub mod metrics;
pub mod model;
pub mod priors;
pub mod state_space;
pub mod store;

pub use error::{Error, Result};
