//! Statistical checks that an ensemble of paths behaves like a Brownian
//! motion with constant drift and diffusion.

pub mod dcov;
pub mod energy;
pub mod qv;
pub mod regression;
pub mod report;
mod sample;
pub mod suite;

use serde::{Deserialize, Serialize};

pub use dcov::{dcov2_univariate, distance_covariance_test, increment_independence_test};
pub use energy::{gaussian_marginal_test, stationarity_test, two_sample_test, GaussianGof};
pub use qv::{qv_linearity, QVReport, QvConfig};
pub use regression::{conditional_mean_test, DriftEstimate};
pub use report::{Details, TestReport, Verdict};
pub use sample::{directions, projection_constant};
pub use suite::{conformance_suite, holm_adjust, StationarityWindows, SuiteConfig, SuiteReport};

/// Resampling and level settings shared by the individual tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    pub permutations: usize,
    pub bootstrap: usize,
    /// Projection directions for the energy statistics; dimension-dependent default when `None`.
    pub directions: Option<usize>,
    /// Projection pairs for distance covariance; dimension-dependent default when `None`.
    pub projections: Option<usize>,
    pub seed: u64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self { alpha: 0.01, permutations: 500, bootstrap: 200, directions: None, projections: None, seed: 0 }
    }
}
