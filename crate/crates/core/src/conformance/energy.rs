//! Energy-distance statistics: a two-sample permutation test and a
//! goodness-of-fit test against a fitted Gaussian.
//!
//! Both are computed on one-dimensional projections (sliced energy distance),
//! which keeps the cost at `O(N log N)` per direction instead of the `O(N²)`
//! pairwise form; the slicing constant restores the scale of the full
//! d-dimensional energy distance.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use super::report::{resampling_p_value, Details, TestReport};
use super::sample::{
    default_direction_count, directions, mean_and_covariance, project, projection_constant, require_rows, to_f64,
};
use super::TestConfig;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, solve_lower};
use crate::process::PathEnsemble;
use crate::rng::{derive_seed, Substream};
use crate::scalar::Real;

pub const MIN_SAMPLES: usize = 100;

/// Projections of the pooled sample, sorted once per direction.
struct PooledProjections {
    /// Pooled indices in increasing projection order, one vector per direction.
    order: Vec<Vec<u32>>,
    /// `gaps[k][i] = z_(i+1) − z_(i)` along direction `k`.
    gaps: Vec<Vec<f64>>,
}

impl PooledProjections {
    fn new(pooled: &Array2<f64>, dirs: &Array2<f64>) -> Self {
        let proj = project(pooled, dirs);
        let (order, gaps) = proj
            .axis_iter(Axis(1))
            .into_par_iter()
            .map(|col| {
                let mut idx: Vec<(f64, u32)> = col.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
                idx.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
                let gaps = idx.windows(2).map(|w| w[1].0 - w[0].0).collect();
                (idx.into_iter().map(|(_, i)| i).collect(), gaps)
            })
            .unzip();
        Self { order, gaps }
    }

    /// Mean over directions of `2∫(F_n − G_m)²` for the given labelling
    /// (`true` marks the first sample).
    fn mean_cramer(&self, first: &[bool], n: usize, m: usize) -> f64 {
        let (inv_n, inv_m) = (1.0 / n as f64, 1.0 / m as f64);
        let total: f64 = self
            .order
            .iter()
            .zip(&self.gaps)
            .map(|(order, gaps)| {
                let mut cx = 0usize;
                let mut acc = 0.0;
                for (k, (&i, &gap)) in order.iter().zip(gaps).enumerate() {
                    cx += first[i as usize] as usize;
                    let cy = k + 1 - cx;
                    let diff = cx as f64 * inv_n - cy as f64 * inv_m;
                    acc += diff * diff * gap;
                }
                2.0 * acc
            })
            .sum();
        total / self.order.len() as f64
    }
}

/// Two-sample energy statistic `nm/(n+m) · Ê(X, Y)` with a permutation p-value.
///
/// The statistic is zero exactly when both samples are the same multiset.
pub fn two_sample_test<T: Real>(x: ArrayView2<T>, y: ArrayView2<T>, cfg: &TestConfig) -> Result<TestReport> {
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            found: y.ncols(),
        });
    }
    require_rows(x.nrows(), MIN_SAMPLES)?;
    require_rows(y.nrows(), MIN_SAMPLES)?;
    let (n, m, d) = (x.nrows(), y.nrows(), x.ncols());
    let mut pooled = to_f64(x);
    pooled.append(Axis(0), to_f64(y).view()).expect("matching columns");

    let count = cfg.directions.unwrap_or_else(|| default_direction_count(d));
    let dirs = directions(d, count, cfg.seed);
    let proj = PooledProjections::new(&pooled, &dirs);
    let scale = (n * m) as f64 / (n + m) as f64 / projection_constant(d);

    let mut labels = vec![false; n + m];
    labels[..n].iter_mut().for_each(|l| *l = true);
    let observed = scale * proj.mean_cramer(&labels, n, m);

    let null: Vec<f64> = (0..cfg.permutations as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = Substream::derived(cfg.seed, "energy-permutation", p);
            let mut perm = labels.clone();
            perm.shuffle(&mut rng);
            scale * proj.mean_cramer(&perm, n, m)
        })
        .collect();
    let p_value = resampling_p_value(observed, &null);

    let mut details = Details::new();
    details.insert("n_x".into(), n.into());
    details.insert("n_y".into(), m.into());
    details.insert("directions".into(), dirs.nrows().into());
    details.insert("permutations".into(), cfg.permutations.into());
    Ok(TestReport::from_p_value("two_sample_energy", observed, p_value, cfg.alpha, details))
}

/// `E|y − Z|` for `Z ~ N(0, 1)`.
fn expected_abs_gap(y: f64) -> f64 {
    let phi = (-0.5 * y * y).exp() / (2.0 * PI).sqrt();
    let cdf = 0.5 * erfc(-y * FRAC_1_SQRT_2);
    2.0 * phi + y * (2.0 * cdf - 1.0)
}

/// One-dimensional energy goodness-of-fit statistic against `N(0, 1)`,
/// without the leading factor `n`. Sorts `z` in place.
fn energy_gof_1d(z: &mut [f64]) -> f64 {
    let n = z.len() as f64;
    let cross: f64 = z.iter().map(|&v| expected_abs_gap(v)).sum::<f64>() * 2.0 / n;
    z.sort_unstable_by(f64::total_cmp);
    let pairwise: f64 = z
        .iter()
        .enumerate()
        .map(|(k, &v)| (2.0 * k as f64 - n + 1.0) * v)
        .sum::<f64>()
        * 2.0;
    cross - 2.0 / PI.sqrt() - pairwise / (n * n)
}

/// Whitens `x` by its sample mean and the Cholesky factor of its sample covariance.
fn whiten(x: &Array2<f64>) -> Result<(Array2<f64>, ndarray::Array1<f64>, Array2<f64>)> {
    let d = x.ncols();
    let (mean, cov) = mean_and_covariance(x);
    let l = cholesky(cov.view()).map_err(|_| Error::DegenerateSample)?;
    let mut l_inv = Array2::zeros((d, d));
    for j in 0..d {
        let mut e = ndarray::Array1::zeros(d);
        e[j] = 1.0;
        l_inv.column_mut(j).assign(&solve_lower(l.view(), e.view()));
    }
    let white = (x - &mean).dot(&l_inv.t());
    if white.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSample);
    }
    Ok((white, mean, cov))
}

fn gof_statistic(x: &Array2<f64>, dirs: &Array2<f64>) -> Result<f64> {
    let n = x.nrows() as f64;
    let (white, _, _) = whiten(x)?;
    let proj = project(&white, dirs);
    let mean: f64 = proj
        .axis_iter(Axis(1))
        .map(|col| energy_gof_1d(&mut col.to_vec()))
        .sum::<f64>()
        / dirs.nrows() as f64;
    Ok(n * mean / projection_constant(x.ncols()))
}

type NullKey = (usize, usize, usize, usize, u64);

fn null_cache() -> &'static Mutex<HashMap<NullKey, Arc<Vec<f64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<NullKey, Arc<Vec<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Calibrated energy goodness-of-fit test for Gaussian samples of a fixed shape.
///
/// The statistic is affine invariant, so a single bootstrap null drawn from
/// `N(0, I)` serves every fitted Gaussian with the same `(N, d)`. Nulls are
/// memoised per `(N, d, B, directions, seed)`.
#[derive(Debug, Clone)]
pub struct GaussianGof {
    n: usize,
    d: usize,
    dirs: Array2<f64>,
    null: Arc<Vec<f64>>,
    alpha: f64,
}

impl GaussianGof {
    pub fn calibrate(n: usize, d: usize, cfg: &TestConfig) -> Result<Self> {
        require_rows(n, MIN_SAMPLES)?;
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let count = cfg.directions.unwrap_or_else(|| default_direction_count(d));
        let dirs = directions(d, count, cfg.seed);
        let key = (n, d, cfg.bootstrap, count, cfg.seed);
        if let Some(null) = null_cache().lock().expect("cache poisoned").get(&key) {
            return Ok(Self { n, d, dirs, null: null.clone(), alpha: cfg.alpha });
        }
        let boot_seed = derive_seed(cfg.seed, "gof-bootstrap", n as u64 * 64 + d as u64);
        let null: Vec<f64> = (0..cfg.bootstrap as u64)
            .into_par_iter()
            .map(|b| {
                let mut rng = Substream::new(boot_seed, b);
                let mut z = Array2::zeros((n, d));
                rng.fill_normals(z.as_slice_mut().expect("standard layout"));
                gof_statistic(&z, &dirs)
            })
            .collect::<Result<_>>()?;
        let null = Arc::new(null);
        null_cache().lock().expect("cache poisoned").insert(key, null.clone());
        Ok(Self { n, d, dirs, null, alpha: cfg.alpha })
    }

    pub fn null_distribution(&self) -> &[f64] {
        &self.null
    }

    /// Tests whether `samples` (observed at time `t`) are Gaussian.
    pub fn test<T: Real>(&self, samples: ArrayView2<T>, t: f64) -> Result<TestReport> {
        if samples.ncols() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: samples.ncols() });
        }
        if samples.nrows() != self.n {
            return Err(Error::InvalidArgument(format!(
                "calibrated for {} samples, got {}",
                self.n,
                samples.nrows()
            )));
        }
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
        }
        let x = to_f64(samples);
        let (_, mean, cov) = whiten(&x)?;
        let stat = gof_statistic(&x, &self.dirs)?;
        let p = resampling_p_value(stat, &self.null);

        let mut details = Details::new();
        details.insert("t".into(), t.into());
        details.insert("n".into(), self.n.into());
        details.insert("bootstrap".into(), self.null.len().into());
        for i in 0..self.d {
            details.insert(format!("mu_hat_{}", i + 1), (mean[i] / t).into());
            for j in i..self.d {
                details.insert(format!("sigma_hat_{}{}", i + 1, j + 1), (cov[[i, j]] / t).into());
            }
        }
        Ok(TestReport::from_p_value(format!("gaussian_marginal@t={t}"), stat, p, self.alpha, details))
    }
}

/// Energy goodness-of-fit test of `samples` against the Gaussian fitted to them.
pub fn gaussian_marginal_test<T: Real>(samples: ArrayView2<T>, t: f64, cfg: &TestConfig) -> Result<TestReport> {
    require_rows(samples.nrows(), MIN_SAMPLES)?;
    // Fail fast on degenerate data before paying for the bootstrap.
    whiten(&to_f64(samples))?;
    GaussianGof::calibrate(samples.nrows(), samples.ncols(), cfg)?.test(samples, t)
}

/// Two-sample test of the increment laws over `[t1, t1+Δ]` and `[t2, t2+Δ]`.
pub fn stationarity_test<T: Real>(
    ensemble: &PathEnsemble<T>,
    delta: f64,
    t1: f64,
    t2: f64,
    cfg: &TestConfig,
) -> Result<TestReport> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("window length must be positive, got {delta}")));
    }
    let a = ensemble.increments(t1, t1 + delta)?;
    let b = ensemble.increments(t2, t2 + delta)?;
    let mut report = two_sample_test(a.view(), b.view(), cfg)?;
    report.name = format!("stationarity[delta={delta},t1={t1},t2={t2}]");
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn normals(n: usize, d: usize, seed: u64, shift: f64) -> Array2<f64> {
        let mut rng = Substream::new(seed, 0);
        let mut z = Array2::zeros((n, d));
        rng.fill_normals(z.as_slice_mut().unwrap());
        z + shift
    }

    fn naive_energy_1d(x: &[f64], y: &[f64]) -> f64 {
        let mean_abs = |a: &[f64], b: &[f64]| {
            a.iter().map(|u| b.iter().map(|v| (u - v).abs()).sum::<f64>()).sum::<f64>() / (a.len() * b.len()) as f64
        };
        2.0 * mean_abs(x, y) - mean_abs(x, x) - mean_abs(y, y)
    }

    fn cfg(permutations: usize) -> TestConfig {
        TestConfig { permutations, ..TestConfig::default() }
    }

    #[test]
    fn cramer_form_matches_pairwise_energy() {
        let x = normals(120, 1, 1, 0.0);
        let y = normals(150, 1, 2, 0.3);
        let mut pooled = x.clone();
        pooled.append(Axis(0), y.view()).unwrap();
        let proj = PooledProjections::new(&pooled, &Array2::ones((1, 1)));
        let mut labels = vec![false; 270];
        labels[..120].iter_mut().for_each(|l| *l = true);
        let fast = proj.mean_cramer(&labels, 120, 150);
        let naive = naive_energy_1d(x.as_slice().unwrap(), y.as_slice().unwrap());
        assert!((fast - naive).abs() < 1e-12, "{fast} vs {naive}");
    }

    #[test]
    fn gof_1d_matches_direct_formula() {
        let z = normals(200, 1, 3, 0.2);
        let v = z.as_slice().unwrap();
        let n = v.len() as f64;
        let cross: f64 = v.iter().map(|&y| expected_abs_gap(y)).sum::<f64>() * 2.0 / n;
        let pair: f64 = v.iter().map(|a| v.iter().map(|b| (a - b).abs()).sum::<f64>()).sum::<f64>() / (n * n);
        let direct = cross - 2.0 / PI.sqrt() - pair;
        assert!((energy_gof_1d(&mut v.to_vec()) - direct).abs() < 1e-12);
    }

    #[test]
    fn expected_abs_gap_values() {
        assert!((expected_abs_gap(0.0) - (2.0 / PI).sqrt()).abs() < 1e-15);
        // Large |y|: E|y − Z| → |y|.
        assert!((expected_abs_gap(40.0) - 40.0).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_give_zero() {
        let x = normals(200, 2, 4, 0.0);
        let r = two_sample_test(x.view(), x.view(), &cfg(20)).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.verdict, super::super::Verdict::Pass);
    }

    #[test]
    fn mean_shift_is_detected() {
        let x = normals(10_000, 1, 5, 0.0);
        let y = normals(10_000, 1, 6, 1.0);
        let r = two_sample_test(x.view(), y.view(), &cfg(100)).unwrap();
        assert!(r.verdict.is_reject());
    }

    #[test]
    fn permutations_are_deterministic() {
        let x = normals(300, 2, 7, 0.0);
        let y = normals(300, 2, 8, 0.1);
        let a = two_sample_test(x.view(), y.view(), &cfg(50)).unwrap();
        let b = two_sample_test(x.view(), y.view(), &cfg(50)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn size_requirements() {
        let x = normals(99, 1, 9, 0.0);
        let y = normals(200, 1, 9, 0.0);
        assert!(matches!(
            two_sample_test(x.view(), y.view(), &cfg(10)),
            Err(Error::InsufficientSamples { needed: 100, got: 99 })
        ));
        let z = normals(200, 2, 9, 0.0);
        assert!(matches!(
            two_sample_test(y.view(), z.view(), &cfg(10)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constant_sample_is_degenerate() {
        let x = Array2::from_elem((150, 2), 3.0);
        let c = TestConfig { bootstrap: 10, ..TestConfig::default() };
        assert!(matches!(gaussian_marginal_test(x.view(), 1.0, &c), Err(Error::DegenerateSample)));
    }

    #[test]
    fn gof_rejects_rayleigh_and_accepts_gaussian() {
        let c = TestConfig { bootstrap: 100, ..TestConfig::default() };
        let planar = normals(5_000, 2, 10, 0.0);
        let radius = planar.map_axis(Axis(1), |r| r.dot(&r).sqrt()).insert_axis(Axis(1));
        let rej = gaussian_marginal_test(radius.view(), 1.0, &c).unwrap();
        assert!(rej.verdict.is_reject(), "{rej:?}");

        let g = normals(5_000, 1, 11, 0.0) * 2.0 + 1.0;
        let acc = gaussian_marginal_test(g.view(), 1.0, &c).unwrap();
        assert!(!acc.verdict.is_reject(), "{acc:?}");
        assert!((acc.detail("mu_hat_1").unwrap() - 1.0).abs() < 0.1);
        assert!((acc.detail("sigma_hat_11").unwrap() - 4.0).abs() < 0.3);
    }

    #[test]
    fn gof_statistic_is_affine_invariant_in_law() {
        // Same standard draws pushed through an affine map: the null is
        // shared, so the statistic changes only through the whitening rotation.
        let z = normals(2_000, 2, 12, 0.0);
        let a = ndarray::array![[2.0, 0.0], [0.0, 0.5]];
        let x = z.dot(&a) + 4.0;
        let dirs = directions(2, 8, 0);
        let s0 = gof_statistic(&z, &dirs).unwrap();
        let s1 = gof_statistic(&x, &dirs).unwrap();
        assert!((s0 - s1).abs() < 1e-9 * (1.0 + s0), "{s0} vs {s1}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn energy_is_non_negative(
            xs in proptest::collection::vec(-5.0f64..5.0, 100..140),
            ys in proptest::collection::vec(-5.0f64..5.0, 100..140),
        ) {
            let x = Array2::from_shape_vec((xs.len(), 1), xs).unwrap();
            let y = Array2::from_shape_vec((ys.len(), 1), ys).unwrap();
            let r = two_sample_test(x.view(), y.view(), &cfg(5)).unwrap();
            prop_assert!(r.statistic >= 0.0);
        }

        #[test]
        fn energy_zero_for_reordered_multiset(
            xs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 100..130),
            rot in 0usize..100,
        ) {
            let flat: Vec<f64> = xs.iter().flat_map(|&(a, b)| [a, b]).collect();
            let x = Array2::from_shape_vec((xs.len(), 2), flat).unwrap();
            let mut rows: Vec<_> = x.rows().into_iter().map(|r| r.to_vec()).collect();
            rows.rotate_left(rot % xs.len());
            let y = Array2::from_shape_vec((xs.len(), 2), rows.concat()).unwrap();
            let r = two_sample_test(x.view(), y.view(), &cfg(5)).unwrap();
            prop_assert_eq!(r.statistic, 0.0);
        }
    }
}
