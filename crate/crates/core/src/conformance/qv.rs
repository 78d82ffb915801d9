use ndarray::Axis;
use rand_distr::{ChiSquared, Distribution};
use serde::{Deserialize, Serialize};

use super::report::{Details, TestReport, Verdict};
use crate::error::{Error, Result};
use crate::process::PathEnsemble;
use crate::rng::Substream;
use crate::scalar::Real;

pub const MIN_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QvConfig {
    /// Number of exact null simulations used to set the threshold.
    pub calibration_runs: usize,
    pub quantile: f64,
    pub seed: u64,
}

impl Default for QvConfig {
    fn default() -> Self {
        Self { calibration_runs: 100, quantile: 0.99, seed: 0 }
    }
}

/// Realized quadratic variation of an ensemble and its linearity in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QVReport {
    /// `σ̂²` per output coordinate: ensemble-average `QV_T / T`.
    pub slopes: Vec<f64>,
    /// Sum of the per-coordinate slopes (the trace of the diffusion matrix).
    pub total_slope: f64,
    pub times: Vec<f64>,
    /// Ensemble-average realized QV, summed over coordinates, at every grid time.
    pub curve: Vec<f64>,
    /// Largest per-coordinate `max_t |QV_t − σ̂²t| / (1 + σ̂²t)`.
    pub residual: f64,
    pub threshold: f64,
    pub monotone: bool,
    pub verdict: Verdict,
}

impl QVReport {
    pub fn to_test_report(&self) -> TestReport {
        let mut details = Details::new();
        for (j, s) in self.slopes.iter().enumerate() {
            details.insert(format!("sigma2_hat_{}", j + 1), (*s).into());
        }
        details.insert("sigma2_hat_total".into(), self.total_slope.into());
        details.insert("monotone".into(), self.monotone.into());
        TestReport::from_residual("qv_linearity", self.residual, self.threshold, details)
    }
}

fn linearity_residual(curve: &[f64], times: &[f64], slope: f64) -> f64 {
    curve
        .iter()
        .zip(times)
        .map(|(q, t)| (q - slope * t).abs() / (1.0 + slope * t))
        .fold(0.0, f64::max)
}

/// Ensemble QV curves and a linearity check whose threshold is the chosen
/// quantile of the same residual on exactly simulated Brownian QV curves with
/// the fitted slopes.
pub fn qv_linearity<T: Real>(ensemble: &PathEnsemble<T>, cfg: &QvConfig) -> Result<QVReport> {
    let steps = ensemble.grid().steps();
    if steps < MIN_STEPS {
        return Err(Error::InsufficientSamples { needed: MIN_STEPS, got: steps });
    }
    if !(0.0..1.0).contains(&cfg.quantile) || cfg.calibration_runs == 0 {
        return Err(Error::InvalidArgument("qv calibration needs runs > 0 and quantile in [0,1)".into()));
    }
    let n = ensemble.n_paths();
    let d = ensemble.dim();
    let times: Vec<f64> = ensemble.grid().times().iter().map(|t| t.to_f64_lossy()).collect();
    let t0 = times[0];
    let rel: Vec<f64> = times.iter().map(|t| t - t0).collect();
    let horizon = rel[steps];

    // Per-coordinate ensemble sums of squared increments per step.
    let paths = ensemble.paths();
    let mut sq = vec![vec![0.0f64; steps]; d];
    let mut monotone = true;
    for path in paths.axis_iter(Axis(0)) {
        let mut prev_qv = 0.0;
        let mut qv = 0.0;
        for k in 0..steps {
            for j in 0..d {
                let inc = (path[[k + 1, j]] - path[[k, j]]).to_f64_lossy();
                let s = inc * inc;
                sq[j][k] += s;
                qv += s;
            }
            monotone &= qv >= prev_qv;
            prev_qv = qv;
        }
    }
    let curves: Vec<Vec<f64>> = sq
        .iter()
        .map(|row| {
            let mut acc = 0.0;
            std::iter::once(0.0)
                .chain(row.iter().map(|s| {
                    acc += s / n as f64;
                    acc
                }))
                .collect()
        })
        .collect();
    let slopes: Vec<f64> = curves.iter().map(|c| c[steps] / horizon).collect();
    let residual = curves
        .iter()
        .zip(&slopes)
        .map(|(c, &s)| linearity_residual(c, &rel, s))
        .fold(0.0, f64::max);

    // Exact null: the ensemble-mean squared increment of a Brownian coordinate
    // with variance rate σ² is σ²Δt·χ²_N/N.
    let chi = ChiSquared::new(n as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut null: Vec<f64> = (0..cfg.calibration_runs as u64)
        .map(|r| {
            let mut rng = Substream::derived(cfg.seed, "qv-calibration", r);
            let mut worst = 0.0f64;
            let mut curve = vec![0.0; steps + 1];
            for &s in &slopes {
                for k in 0..steps {
                    let dt = rel[k + 1] - rel[k];
                    curve[k + 1] = curve[k] + s * dt * chi.sample(&mut rng) / n as f64;
                }
                worst = worst.max(linearity_residual(&curve, &rel, curve[steps] / horizon));
            }
            worst
        })
        .collect();
    null.sort_unstable_by(f64::total_cmp);
    let rank = ((cfg.quantile * null.len() as f64).ceil() as usize).clamp(1, null.len());
    let threshold = null[rank - 1];

    let curve: Vec<f64> = (0..=steps).map(|k| curves.iter().map(|c| c[k]).sum()).collect();
    Ok(QVReport {
        total_slope: slopes.iter().sum(),
        slopes,
        times,
        curve,
        residual,
        threshold,
        monotone,
        verdict: if residual > threshold { Verdict::Reject } else { Verdict::Pass },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{sample_paths, GaussianLaw, TimeGrid};
    use crate::transforms::Transform;
    use ndarray::array;

    fn bm(d: usize, n: usize, k: usize, seed: u64) -> PathEnsemble<f64> {
        let grid = TimeGrid::uniform(1.0, k).unwrap();
        sample_paths(&GaussianLaw::standard(d), &grid, n, &ndarray::Array1::zeros(d), seed).unwrap()
    }

    #[test]
    fn standard_bm_slope() {
        let r = qv_linearity(&bm(1, 1000, 10_000, 1), &QvConfig::default()).unwrap();
        assert!((r.total_slope - 1.0).abs() < 0.02, "{}", r.total_slope);
        assert!(r.monotone);
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.residual <= r.threshold);
    }

    #[test]
    fn scaled_and_projected_slopes() {
        let e = bm(1, 500, 1000, 2);
        let f = Transform::parse("affine(P=[[2]],q=[0])").unwrap();
        let r = qv_linearity(&e.apply_transform(&f).unwrap(), &QvConfig::default()).unwrap();
        assert!((r.total_slope - 4.0).abs() < 0.08);

        let e = bm(2, 500, 1000, 3);
        let f = Transform::affine(array![[1.0, 1.0]], array![0.0]).unwrap();
        let r = qv_linearity(&e.apply_transform(&f).unwrap(), &QvConfig::default()).unwrap();
        assert!((r.total_slope - 2.0).abs() < 0.04);
    }

    #[test]
    fn curved_qv_is_rejected() {
        // x² on BM has QV rate 4B_t², so E[QV_t] = 2t²: visibly non-linear.
        let e = bm(1, 500, 500, 4);
        let f = Transform::parse("square(1)").unwrap();
        let r = qv_linearity(&e.apply_transform(&f).unwrap(), &QvConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Reject);
    }

    #[test]
    fn coarse_grid_is_refused() {
        assert!(matches!(
            qv_linearity(&bm(1, 10, 50, 5), &QvConfig::default()),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn curve_is_monotone_and_consistent() {
        let r = qv_linearity(&bm(2, 50, 200, 6), &QvConfig::default()).unwrap();
        assert!(r.curve.windows(2).all(|w| w[1] >= w[0]));
        let tr = r.to_test_report();
        assert_eq!(tr.verdict, r.verdict);
        assert_eq!(tr.p_value, None);
    }
}
