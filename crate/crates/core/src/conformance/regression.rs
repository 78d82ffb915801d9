use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::report::{Details, TestReport};
use super::TestConfig;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_inverse};
use crate::process::PathEnsemble;
use crate::scalar::Real;

/// Estimated drift per unit time with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    pub mu: Vec<f64>,
    pub std_error: Vec<f64>,
}

/// Standardized features `[x_k, x_k², ‖x‖]` of the conditioning values.
fn design(x: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, d) = x.dim();
    let mut f = Array2::zeros((n, 2 * d + 1));
    for (i, row) in x.axis_iter(Axis(0)).enumerate() {
        for k in 0..d {
            f[[i, k]] = row[k];
            f[[i, d + k]] = row[k] * row[k];
        }
        f[[i, 2 * d]] = row.dot(&row).sqrt();
    }
    for mut col in f.axis_iter_mut(Axis(1)) {
        let m = col.mean().unwrap_or(0.0);
        col -= m;
        let sd = (col.dot(&col) / n as f64).sqrt();
        if !(sd > 1e-12 * (1.0 + m.abs())) {
            return Err(Error::DegenerateDesign);
        }
        col /= sd;
    }
    Ok(f)
}

fn two_sided_normal_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Regresses the increment `Y_t − Y_s` of `ensemble_out` on quadratic-and-radius
/// features of `X_s` from `ensemble_in`, with heteroskedasticity-robust (HC1)
/// standard errors.
///
/// Features are centered, so the intercept is the mean increment and
/// `μ̂ = intercept / (t − s)`. The report rejects when any slope coefficient is
/// significant after a Bonferroni correction across all slopes of all outputs.
pub fn conditional_mean_test<T: Real>(
    ensemble_in: &PathEnsemble<T>,
    ensemble_out: &PathEnsemble<T>,
    s: f64,
    t: f64,
    cfg: &TestConfig,
) -> Result<(DriftEstimate, TestReport)> {
    if !(s < t) {
        return Err(Error::InvalidArgument(format!("need s < t, got s={s}, t={t}")));
    }
    if ensemble_in.n_paths() != ensemble_out.n_paths() || ensemble_in.grid() != ensemble_out.grid() {
        return Err(Error::InvalidEnsemble("conditional mean test needs index-aligned ensembles".into()));
    }
    let x = ensemble_in.values_at_time(s)?.mapv(|v| v.to_f64_lossy());
    let y = ensemble_out.increments(s, t)?.mapv(|v| v.to_f64_lossy());
    let n = x.nrows();
    let f = design(&x)?;
    let p = f.ncols() + 1;
    if n <= p + 1 {
        return Err(Error::InsufficientSamples { needed: p + 2, got: n });
    }
    let gram = f.t().dot(&f);
    let l = cholesky(gram.view()).map_err(|_| Error::DegenerateDesign)?;
    let bread = cholesky_inverse(l.view());
    let hc1 = n as f64 / (n - p) as f64;

    let slopes_per_output = f.ncols();
    let tests = slopes_per_output * y.ncols();
    let mut mu = Vec::new();
    let mut se = Vec::new();
    let mut min_p = 1.0f64;
    let mut max_abs_z = 0.0f64;
    let mut details = Details::new();
    for (j, col) in y.axis_iter(Axis(1)).enumerate() {
        let intercept = col.mean().expect("non-empty");
        let centred = &col - intercept;
        let beta: Array1<f64> = bread.dot(&f.t().dot(&centred));
        let resid = &centred - &f.dot(&beta);
        // Intercept variance is orthogonal to the centered features.
        let var_intercept = hc1 * resid.dot(&resid) / (n as f64 * n as f64);
        let weighted = &f * &resid.view().insert_axis(Axis(1));
        let meat = weighted.t().dot(&weighted);
        let cov = bread.dot(&meat).dot(&bread) * hc1;
        for k in 0..slopes_per_output {
            let z = beta[k] / cov[[k, k]].sqrt();
            let z = if z.is_finite() { z } else { 0.0 };
            max_abs_z = max_abs_z.max(z.abs());
            min_p = min_p.min(two_sided_normal_p(z));
            details.insert(format!("z_{}_{}", j + 1, k + 1), z.into());
        }
        mu.push(intercept / (t - s));
        se.push(var_intercept.sqrt() / (t - s));
        details.insert(format!("mu_hat_{}", j + 1), (intercept / (t - s)).into());
        details.insert(format!("mu_se_{}", j + 1), (var_intercept.sqrt() / (t - s)).into());
    }
    let p_value = (min_p * tests as f64).min(1.0);
    details.insert("slope_tests".into(), tests.into());
    details.insert("n".into(), n.into());
    let report = TestReport::from_p_value(format!("conditional_mean[{s},{t}]"), max_abs_z, p_value, cfg.alpha, details);
    Ok((DriftEstimate { mu, std_error: se }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{sample_paths, GaussianLaw, TimeGrid};
    use crate::transforms::Transform;
    use ndarray::array;

    fn bm(law: &GaussianLaw<f64>, n: usize, seed: u64) -> PathEnsemble<f64> {
        let grid = TimeGrid::uniform(2.0, 20).unwrap();
        sample_paths(law, &grid, n, &ndarray::Array1::zeros(law.dim()), seed).unwrap()
    }

    #[test]
    fn affine_martingale_passes() {
        let e = bm(&GaussianLaw::standard(2), 20_000, 1);
        let f = Transform::affine(array![[1.0, 2.0], [0.0, -1.0]], array![3.0, 1.0]).unwrap();
        let out = e.apply_transform(&f).unwrap();
        let (mu, r) = conditional_mean_test(&e, &out, 1.0, 2.0, &TestConfig::default()).unwrap();
        assert!(!r.verdict.is_reject(), "{r:?}");
        for (m, s) in mu.mu.iter().zip(&mu.std_error) {
            assert!(m.abs() < 4.0 * s);
        }
    }

    #[test]
    fn drift_is_recovered() {
        let law = GaussianLaw::new(array![1.0], array![[1.0]]).unwrap();
        let e = bm(&law, 20_000, 2);
        let (mu, _) = conditional_mean_test(&e, &e, 1.0, 2.0, &TestConfig::default()).unwrap();
        assert!((mu.mu[0] - 1.0).abs() < 3.0 * mu.std_error[0], "{mu:?}");
    }

    #[test]
    fn square_has_constant_conditional_mean() {
        let e = bm(&GaussianLaw::standard(1), 20_000, 3);
        let out = e.apply_transform(&Transform::parse("square(1)").unwrap()).unwrap();
        let (mu, r) = conditional_mean_test(&e, &out, 1.0, 2.0, &TestConfig::default()).unwrap();
        assert!(!r.verdict.is_reject(), "{r:?}");
        assert!((mu.mu[0] - 1.0).abs() < 4.0 * mu.std_error[0]);
    }

    #[test]
    fn state_dependent_drift_is_detected() {
        let e = bm(&GaussianLaw::standard(1), 5_000, 4);
        // Increments of B + B³/3 have conditional mean B_s(t−s) + O(B_s³): slope ≠ 0.
        let out = e.apply_transform(&Transform::parse("poly(x1 + 0.3333*x1^3)").unwrap()).unwrap();
        let (_, r) = conditional_mean_test(&e, &out, 1.0, 2.0, &TestConfig::default()).unwrap();
        assert!(r.verdict.is_reject(), "{r:?}");
    }

    #[test]
    fn degenerate_design() {
        let grid = TimeGrid::uniform(2.0, 2).unwrap();
        let e = PathEnsemble::from_parts(grid, ndarray::Array3::zeros((50, 3, 1)), 0, array![0.0]).unwrap();
        assert!(matches!(
            conditional_mean_test(&e, &e, 1.0, 2.0, &TestConfig::default()),
            Err(Error::DegenerateDesign)
        ));
    }
}
