//! Distance covariance with an `O(n log n)` univariate kernel.
//!
//! Multivariate samples are reduced to univariate pairs by random projections;
//! averaging over projection pairs (scaled by the slicing constants) estimates
//! the full distance covariance.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::report::{resampling_p_value, Details, TestReport};
use super::sample::{project, projection_constant, require_rows, to_f64};
use super::TestConfig;
use crate::error::{Error, Result};
use crate::process::PathEnsemble;
use crate::rng::Substream;
use crate::scalar::Real;

pub const MIN_SAMPLES: usize = 100;

/// Row sums `Σ_j |v_i − v_j|` from sorted order.
fn abs_row_sums(v: &[f64], order: &[u32]) -> Vec<f64> {
    let n = v.len();
    let total: f64 = v.iter().sum();
    let mut prefix = 0.0;
    let mut out = vec![0.0; n];
    for (k, &i) in order.iter().enumerate() {
        let x = v[i as usize];
        // k values below, n−k−1 above.
        out[i as usize] = x * (2.0 * k as f64 - n as f64) + total - 2.0 * prefix;
        prefix += x;
    }
    out
}

fn argsort(v: &[f64]) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..v.len() as u32).collect();
    idx.sort_unstable_by(|&a, &b| v[a as usize].total_cmp(&v[b as usize]).then(a.cmp(&b)));
    idx
}

/// One univariate pair, prepared for repeated evaluation under re-pairings.
struct UnivariatePair {
    x: Vec<f64>,
    y: Vec<f64>,
    x_order: Vec<u32>,
    a_row: Vec<f64>,
    b_row: Vec<f64>,
    a_total: f64,
    b_total: f64,
}

impl UnivariatePair {
    fn new(mut x: Vec<f64>, mut y: Vec<f64>) -> Self {
        // Centering does not change distances and keeps the tree sums small.
        for v in [&mut x, &mut y] {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter_mut().for_each(|e| *e -= m);
        }
        let x_order = argsort(&x);
        let y_order = argsort(&y);
        let a_row = abs_row_sums(&x, &x_order);
        let b_row = abs_row_sums(&y, &y_order);
        let a_total = a_row.iter().sum();
        let b_total = b_row.iter().sum();
        Self { x, y, x_order, a_row, b_row, a_total, b_total }
    }

    /// V-statistic `dCov²` with `x_i` paired to `y_{pairing(i)}` (identity when `None`).
    fn dcov2(&self, pairing: Option<&[u32]>) -> f64 {
        let n = self.x.len();
        let pair = |i: usize| pairing.map_or(i, |p| p[i] as usize);
        let pairs: Vec<(f64, f64)> = self
            .x_order
            .iter()
            .map(|&i| (self.y[pair(i as usize)], self.x[i as usize]))
            .collect();
        let cross = concordance_sum(pairs);
        let nf = n as f64;
        let row_cross: f64 = (0..n).map(|i| self.a_row[i] * self.b_row[pair(i)]).sum();
        2.0 * cross / (nf * nf) + self.a_total * self.b_total / nf.powi(4) - 2.0 * row_cross / nf.powi(3)
    }
}

/// `Σ_{i<j} |x_i − x_j|·|y_i − y_j|` for `(y, x)` pairs already sorted by `x`.
///
/// Bottom-up merge sort on `y`: when a right-run element is merged, the
/// left-run elements taken so far are exactly its earlier-in-`x` partners with
/// smaller `y`, and their running sums of `(1, x, y, xy)` give its
/// contribution in O(1).
fn concordance_sum(mut cur: Vec<(f64, f64)>) -> f64 {
    let n = cur.len();
    let mut next = cur.clone();
    let mut total = 0.0;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            let left = &cur[lo..mid];
            let mut all = [0.0f64; 4];
            for &(y, x) in left {
                all[0] += 1.0;
                all[1] += x;
                all[2] += y;
                all[3] += x * y;
            }
            let (mut i, mut j, mut k) = (lo, mid, lo);
            let mut below = [0.0f64; 4];
            while j < hi {
                if i < mid && cur[i].0 <= cur[j].0 {
                    let (y, x) = cur[i];
                    below[0] += 1.0;
                    below[1] += x;
                    below[2] += y;
                    below[3] += x * y;
                    next[k] = cur[i];
                    i += 1;
                } else {
                    let (y, x) = cur[j];
                    let above = [all[0] - below[0], all[1] - below[1], all[2] - below[2], all[3] - below[3]];
                    // x ≥ partners' x, so the sign of the y-difference decides the sign.
                    let lower = below[0] * x * y - x * below[2] - y * below[1] + below[3];
                    let upper = above[0] * x * y - x * above[2] - y * above[1] + above[3];
                    total += lower - upper;
                    next[k] = cur[j];
                    j += 1;
                }
                k += 1;
            }
            next[k..hi].copy_from_slice(&cur[i..mid]);
            lo = hi;
        }
        std::mem::swap(&mut cur, &mut next);
        width *= 2;
    }
    total
}

/// Exact univariate distance covariance (V-statistic) in `O(n log n)`.
pub fn dcov2_univariate(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    if x.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    Ok(UnivariatePair::new(x.to_vec(), y.to_vec()).dcov2(None))
}

fn unit_directions(d: usize, count: usize, rng: &mut Substream) -> Array2<f64> {
    let mut out = Array2::zeros((count, d));
    let mut z = vec![0.0; d];
    for mut row in out.rows_mut() {
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

/// Default number of projection pairs.
pub fn default_projection_pairs(dx: usize, dy: usize) -> usize {
    if dx == 1 && dy == 1 {
        1
    } else {
        4
    }
}

/// Distance-covariance independence test between paired rows of `x` and `y`,
/// with a permutation p-value.
pub fn distance_covariance_test<T: Real>(x: ArrayView2<T>, y: ArrayView2<T>, cfg: &TestConfig) -> Result<TestReport> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), found: y.nrows() });
    }
    require_rows(x.nrows(), MIN_SAMPLES)?;
    let n = x.nrows();
    let (dx, dy) = (x.ncols(), y.ncols());
    let pairs = cfg.projections.unwrap_or_else(|| default_projection_pairs(dx, dy));
    let mut rng = Substream::derived(cfg.seed, "dcov-directions", 0);
    let (u, v) = if dx == 1 && dy == 1 {
        (Array2::ones((1, 1)), Array2::ones((1, 1)))
    } else {
        (unit_directions(dx, pairs, &mut rng), unit_directions(dy, pairs, &mut rng))
    };
    let px = project(&to_f64(x), &u);
    let py = project(&to_f64(y), &v);
    let prepared: Vec<UnivariatePair> = (0..u.nrows())
        .into_par_iter()
        .map(|k| UnivariatePair::new(px.column(k).to_vec(), py.column(k).to_vec()))
        .collect();
    let scale = n as f64 / (projection_constant(dx) * projection_constant(dy) * prepared.len() as f64);
    let stat = |pairing: Option<&[u32]>| scale * prepared.iter().map(|p| p.dcov2(pairing)).sum::<f64>();

    let observed = stat(None);
    let null: Vec<f64> = (0..cfg.permutations as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = Substream::derived(cfg.seed, "dcov-permutation", b);
            let mut perm: Vec<u32> = (0..n as u32).collect();
            perm.shuffle(&mut rng);
            stat(Some(&perm))
        })
        .collect();
    let p = resampling_p_value(observed, &null);

    let mut details = Details::new();
    details.insert("n".into(), n.into());
    details.insert("projection_pairs".into(), prepared.len().into());
    details.insert("permutations".into(), cfg.permutations.into());
    details.insert("dcov2".into(), (observed / n as f64).into());
    Ok(TestReport::from_p_value("distance_covariance", observed, p, cfg.alpha, details))
}

/// Independence of the increments over `window1` and `window2`.
///
/// Disjoint windows are independent under the null; overlapping windows are
/// accepted (and flagged in the details) since they are useful as a power check.
pub fn increment_independence_test<T: Real>(
    ensemble: &PathEnsemble<T>,
    window1: (f64, f64),
    window2: (f64, f64),
    cfg: &TestConfig,
) -> Result<TestReport> {
    let a = ensemble.increments(window1.0, window1.1)?;
    let b = ensemble.increments(window2.0, window2.1)?;
    let mut report = distance_covariance_test(a.view(), b.view(), cfg)?;
    let disjoint = window1.1 <= window2.0 || window2.1 <= window1.0;
    report.name = format!(
        "independence[({},{}),({},{})]",
        window1.0, window1.1, window2.0, window2.1
    );
    report.details.insert("disjoint".into(), disjoint.into());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_dcov2(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let nf = n as f64;
        let dist = |v: &[f64]| {
            let d: Vec<Vec<f64>> = v.iter().map(|a| v.iter().map(|b| (a - b).abs()).collect()).collect();
            let row: Vec<f64> = d.iter().map(|r| r.iter().sum::<f64>() / nf).collect();
            let grand = row.iter().sum::<f64>() / nf;
            (0..n)
                .map(|i| (0..n).map(|j| d[i][j] - row[i] - row[j] + grand).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        };
        let (a, b) = (dist(x), dist(y));
        (0..n).map(|i| (0..n).map(|j| a[i][j] * b[i][j]).sum::<f64>()).sum::<f64>() / (nf * nf)
    }

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut z = vec![0.0; n];
        Substream::new(seed, 0).fill_normals(&mut z);
        z
    }

    #[test]
    fn matches_double_centred_definition() {
        let x = normals(60, 1);
        let y: Vec<f64> = normals(60, 2).iter().zip(&x).map(|(e, a)| a * a + 0.3 * e).collect();
        let fast = dcov2_univariate(&x, &y).unwrap();
        let slow = naive_dcov2(&x, &y);
        assert!((fast - slow).abs() < 1e-12 * (1.0 + slow), "{fast} vs {slow}");
    }

    #[test]
    fn pairing_matches_permuted_input() {
        let x = normals(80, 3);
        let y = normals(80, 4);
        let mut perm: Vec<u32> = (0..80).collect();
        perm.shuffle(&mut Substream::new(5, 0));
        let yp: Vec<f64> = perm.iter().map(|&j| y[j as usize]).collect();
        let via_pairing = UnivariatePair::new(x.clone(), y).dcov2(Some(&perm));
        let direct = naive_dcov2(&x, &yp);
        assert!((via_pairing - direct).abs() < 1e-12 * (1.0 + direct));
    }

    #[test]
    fn ties_are_handled() {
        let x: Vec<f64> = (0..50).map(|i| (i % 5) as f64).collect();
        let y: Vec<f64> = (0..50).map(|i| (i % 3) as f64 + (i % 5) as f64).collect();
        let fast = dcov2_univariate(&x, &y).unwrap();
        assert!((fast - naive_dcov2(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn detects_dependence_and_accepts_independence() {
        let cfg = TestConfig { permutations: 100, ..TestConfig::default() };
        let n = 1000;
        let x = Array2::from_shape_vec((n, 2), normals(2 * n, 6)).unwrap();
        let e = Array2::from_shape_vec((n, 2), normals(2 * n, 7)).unwrap();
        let ind = distance_covariance_test(x.view(), e.view(), &cfg).unwrap();
        assert!(!ind.verdict.is_reject(), "{ind:?}");
        // Uncorrelated but dependent: radius of x against noise scaled by it.
        let r = x.map_axis(ndarray::Axis(1), |row| row.dot(&row).sqrt());
        let y = &e * &r.insert_axis(ndarray::Axis(1));
        let dep = distance_covariance_test(x.view(), y.view(), &cfg).unwrap();
        assert!(dep.verdict.is_reject(), "{dep:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn fast_kernel_agrees_with_naive(
            pts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..40),
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let fast = dcov2_univariate(&x, &y).unwrap();
            let slow = naive_dcov2(&x, &y);
            prop_assert!((fast - slow).abs() < 1e-10 * (1.0 + slow));
            prop_assert!(fast > -1e-12);
        }
    }
}
