//! Numerical diagnostics for the analytic characterisation of affine maps:
//! harmonicity, the eikonal equation, mean-value and Gaussian-smoothing
//! identities, and the Jensen gap of the gradient norm.

pub mod domain;
pub mod montecarlo;
pub mod residual;

pub use domain::{GridDomain, Mask};
pub use montecarlo::{
    ball_volume, ball_volume_mc, gamma_half_variant, jensen_gap, mean_value_check, smoothing_representation_check,
    JensenGapReport,
};
pub use residual::{eikonal_residual, gradient_constancy, laplacian_residual, ResidualReport};
