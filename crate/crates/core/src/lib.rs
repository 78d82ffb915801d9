//! Simulation and conformance testing for transformed Brownian motions.
//!
//! The library simulates multivariate Brownian motions with drift, pushes
//! them through catalog maps, and checks whether the result is still a
//! Brownian motion: statistically (marginals, stationarity, independence,
//! quadratic variation, conditional mean) and analytically (Laplace and
//! eikonal residuals, mean-value and smoothing identities, Jensen gap).
//!
//! Numerical code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the precision.

pub mod conformance;
pub mod error;
pub mod linalg;
pub mod pde;
pub mod process;
pub mod rng;
pub mod scalar;
pub mod scenario;
pub mod transforms;

pub use error::{Error, Result};

pub type GaussianLaw64 = process::GaussianLaw<f64>;
pub type GaussianLaw32 = process::GaussianLaw<f32>;
pub type TimeGrid64 = process::TimeGrid<f64>;
pub type TimeGrid32 = process::TimeGrid<f32>;
pub type PathEnsemble64 = process::PathEnsemble<f64>;
pub type PathEnsemble32 = process::PathEnsemble<f32>;
pub type Transform64 = transforms::Transform<f64>;
pub type Transform32 = transforms::Transform<f32>;
