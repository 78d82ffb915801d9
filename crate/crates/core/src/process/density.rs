use ndarray::Array1;

use super::GaussianLaw;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_det, det, solve_lower};
use crate::scalar::Real;

/// Brownian transition density `φ(τ, x, y)` of the law: the Gaussian density
/// at `y` of `x + τb + √τ L Z`.
pub fn transition_density<T: Real>(law: &GaussianLaw<T>, tau: T, x: &[T], y: &[T]) -> Result<T> {
    let n = law.dim();
    if !(tau > T::zero()) {
        return Err(Error::InvalidArgument("transition time must be positive".into()));
    }
    for v in [x, y] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            });
        }
    }
    let l = cholesky(law.covariance().view()).map_err(|_| Error::SingularCovariance {
        det: det(law.covariance().view()).to_f64_lossy(),
    })?;
    let resid = Array1::from_shape_fn(n, |i| y[i] - law.drift()[i] * tau - x[i]);
    // ⟨r, A⁻¹ r⟩ = ‖L⁻¹ r‖²
    let w = solve_lower(l.view(), resid.view());
    let quad = w.iter().map(|&v| v * v).sum::<T>() / tau;
    let two_pi_tau = T::lit(std::f64::consts::TAU) * tau;
    let norm = two_pi_tau.powf(T::lit(-(n as f64) / 2.0)) / cholesky_det(l.view()).sqrt();
    Ok(norm * (-quad / T::lit(2.0)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Substream;
    use ndarray::array;

    #[test]
    fn hand_values() {
        let std1 = GaussianLaw::<f64>::standard(1);
        let v = transition_density(&std1, 1.0, &[0.0], &[0.0]).unwrap();
        assert!((v - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((v - 0.398942).abs() < 1e-6);

        let std2 = GaussianLaw::<f64>::standard(2);
        let v = transition_density(&std2, 1.0, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((v - 0.159155).abs() < 1e-6);

        // y = bτ + x, so only the normalising constant remains: 1/(4√π)
        let law = GaussianLaw::new(array![1.0], array![[4.0]]).unwrap();
        let v = transition_density(&law, 2.0, &[0.0], &[2.0]).unwrap();
        assert!((v - 1.0 / (4.0 * std::f64::consts::PI.sqrt())).abs() < 1e-15);
        assert!((v - 0.141047).abs() < 1e-6);
    }

    #[test]
    fn errors() {
        let singular = GaussianLaw::new(array![0.0, 0.0], array![[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(
            transition_density(&singular, 1.0, &[0.0, 0.0], &[0.0, 0.0]),
            Err(Error::SingularCovariance { .. })
        ));
        let std1 = GaussianLaw::<f64>::standard(1);
        assert!(transition_density(&std1, 0.0, &[0.0], &[0.0]).is_err());
        assert!(transition_density(&std1, 1.0, &[0.0, 1.0], &[0.0]).is_err());
    }

    /// Importance-sampling identity: the density integrates to one.
    /// Uniform proposal on a box covering 8 standard deviations.
    #[test]
    fn integrates_to_one() {
        let law = GaussianLaw::new(array![0.5, -0.2], array![[2.0, 0.6], [0.6, 1.0]]).unwrap();
        let (tau, x): (f64, [f64; 2]) = (0.7, [0.3, -1.0]);
        let centre = [x[0] + 0.5 * tau, x[1] - 0.2 * tau];
        let half = [8.0 * (2.0 * tau as f64).sqrt(), 8.0 * tau.sqrt()];
        let area = 4.0 * half[0] * half[1];
        let n = 100_000;
        let mut rng = Substream::new(31, 0);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let y = [
                centre[0] + half[0] * (2.0 * rng.uniform() - 1.0),
                centre[1] + half[1] * (2.0 * rng.uniform() - 1.0),
            ];
            let w = area * transition_density(&law, tau, &x, &y).unwrap();
            sum += w;
            sum_sq += w * w;
        }
        let mean = sum / n as f64;
        let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 1.0).abs() <= 3.0 * se, "mean {mean} se {se}");
    }
}
