//! Exact simulation of Brownian motion with drift and covariance on a time
//! grid, the transition density, and ensemble file formats.

mod density;
mod ensemble;
pub mod io;
mod law;

pub use density::transition_density;
pub use ensemble::{sample_paths, PathEnsemble};
pub use law::{GaussianLaw, TimeGrid};
