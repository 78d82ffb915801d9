//! Shared helpers for turning samples into `f64` matrices, projection
//! directions and sorted projections.

use ndarray::{Array2, ArrayView2, Axis};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::Substream;
use crate::scalar::Real;

pub(crate) fn to_f64<T: Real>(samples: ArrayView2<T>) -> Array2<f64> {
    samples.mapv(|v| v.to_f64_lossy())
}

pub(crate) fn require_rows(rows: usize, needed: usize) -> Result<()> {
    if rows < needed {
        Err(Error::InsufficientSamples { needed, got: rows })
    } else {
        Ok(())
    }
}

/// `E|⟨θ, v⟩| / ‖v‖` for `θ` uniform on the unit sphere in ℝᵈ.
pub fn projection_constant(d: usize) -> f64 {
    let d = d as f64;
    (ln_gamma(d / 2.0) - ln_gamma((d + 1.0) / 2.0)).exp() / std::f64::consts::PI.sqrt()
}

/// Unit projection directions, one per row.
///
/// One direction in ℝ¹, `count` equally spaced angles on the half circle in
/// ℝ², and `count` seeded uniform directions in higher dimensions.
pub fn directions(d: usize, count: usize, seed: u64) -> Array2<f64> {
    match d {
        1 => Array2::ones((1, 1)),
        2 => Array2::from_shape_fn((count, 2), |(k, c)| {
            let theta = std::f64::consts::PI * k as f64 / count as f64;
            if c == 0 {
                theta.cos()
            } else {
                theta.sin()
            }
        }),
        _ => {
            let mut rng = Substream::derived(seed, "projection-directions", d as u64);
            let mut out = Array2::zeros((count, d));
            for mut row in out.rows_mut() {
                let mut z = vec![0.0; d];
                loop {
                    rng.fill_normals(&mut z);
                    let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if r > 1e-12 {
                        row.iter_mut().zip(&z).for_each(|(a, b)| *a = b / r);
                        break;
                    }
                }
            }
            out
        }
    }
}

/// Default number of projection directions for dimension `d`.
pub fn default_direction_count(d: usize) -> usize {
    match d {
        1 => 1,
        2 => 8,
        _ => 16,
    }
}

/// `samples · directionsᵀ`: one column of projections per direction.
pub(crate) fn project(samples: &Array2<f64>, dirs: &Array2<f64>) -> Array2<f64> {
    samples.dot(&dirs.t())
}

/// Column means and unbiased covariance.
pub(crate) fn mean_and_covariance(x: &Array2<f64>) -> (ndarray::Array1<f64>, Array2<f64>) {
    let n = x.nrows();
    let mean = x.mean_axis(Axis(0)).expect("non-empty sample");
    let centred = x - &mean;
    let cov = centred.t().dot(&centred) / (n.max(2) - 1) as f64;
    (mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_constants() {
        assert!((projection_constant(1) - 1.0).abs() < 1e-14);
        assert!((projection_constant(2) - 2.0 / std::f64::consts::PI).abs() < 1e-14);
        assert!((projection_constant(3) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn direction_sets_are_unit() {
        for d in 1..5 {
            let dirs = directions(d, 6, 3);
            for row in dirs.rows() {
                assert!((row.dot(&row) - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(directions(3, 6, 3), directions(3, 6, 3));
    }
}
