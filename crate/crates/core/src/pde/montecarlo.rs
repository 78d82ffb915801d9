//! Monte Carlo checks of the integral identities satisfied by affine and
//! harmonic fields under Gaussian and uniform-ball weights.
//!
//! Samples are drawn in fixed-size chunks, each from its own substream, and
//! reduced in chunk order, so results do not depend on the thread count.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::residual::ResidualReport;
use crate::conformance::{Details, Verdict};
use crate::error::{Error, Result};
use crate::process::GaussianLaw;
use crate::rng::{derive_seed, Substream};
use crate::scalar::Real;
use crate::transforms::{DiffMethod, Transform};

const CHUNK: usize = 4096;

/// Tolerance multiplier on Monte Carlo standard errors.
pub const MC_SIGMAS: f64 = 3.0;

/// Allowance for rounding in quantities that are exactly zero in exact arithmetic.
fn rounding_floor(scale: f64) -> f64 {
    64.0 * f64::EPSILON * (1.0 + scale.abs())
}

/// Lebesgue measure of the unit ball in ℝⁿ, `π^{n/2} / Γ(n/2 + 1)`.
pub fn ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * ball_volume(n - 2),
    }
}

/// `π^{n/2} / Γ(n/2)`: the unit-sphere area divided by two, which is sometimes
/// written in place of the ball volume. It coincides with it only for `n = 2`.
pub fn gamma_half_variant(n: usize) -> f64 {
    ball_volume(n) * n as f64 / 2.0
}

/// Cube-rejection estimate of the unit-ball volume and its standard error.
pub fn ball_volume_mc(n: usize, samples: usize, seed: u64) -> (f64, f64) {
    let hits: usize = chunk_sizes(samples)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = Substream::derived(seed, "ball-volume", c as u64);
            (0..len)
                .filter(|_| (0..n).map(|_| (2.0 * rng.uniform() - 1.0).powi(2)).sum::<f64>() <= 1.0)
                .count()
        })
        .sum();
    let p = hits as f64 / samples as f64;
    let cube = 2f64.powi(n as i32);
    (cube * p, cube * (p * (1.0 - p) / samples as f64).sqrt())
}

fn chunk_sizes(total: usize) -> Vec<(usize, usize)> {
    (0..total.div_ceil(CHUNK)).map(|c| (c, CHUNK.min(total - c * CHUNK))).collect()
}

/// Running first and second moments of `value − shift`.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn merge(mut self, o: Moments) -> Moments {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self
    }

    fn mean(&self) -> f64 {
        self.sum / self.n
    }

    fn variance(&self) -> f64 {
        let m = self.mean();
        ((self.sum_sq / self.n - m * m) * self.n / (self.n - 1.0).max(1.0)).max(0.0)
    }

    fn std_error(&self) -> f64 {
        (self.variance() / self.n).sqrt()
    }
}

fn require_samples(n_mc: usize) -> Result<()> {
    if n_mc < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n_mc });
    }
    Ok(())
}

fn scalar_field<T: Real>(f: &Transform<T>, x: &[f64]) -> Result<()> {
    if !f.is_scalar() {
        return Err(Error::NotScalar { outputs: f.output_dim() });
    }
    if f.input_dim() != x.len() {
        return Err(Error::DimensionMismatch { expected: f.input_dim(), found: x.len() });
    }
    Ok(())
}

fn eval_at<T: Real>(f: &Transform<T>, y: &[f64], buf: &mut [T], out: &mut [T; 1]) -> f64 {
    buf.iter_mut().zip(y).for_each(|(b, &v)| *b = T::lit(v));
    f.eval_into(buf, out);
    out[0].to_f64_lossy()
}

/// Compares `u(x)` with the average of `u` over the ball `x + rB`, sampled
/// uniformly as a Gaussian direction times radius `r·U^{1/n}`.
pub fn mean_value_check<T: Real>(u: &Transform<T>, x: &[f64], r: f64, n_mc: usize, seed: u64) -> Result<ResidualReport> {
    scalar_field(u, x)?;
    require_samples(n_mc)?;
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let n = x.len();
    if let Some((lo, hi)) = u.evaluation_domain() {
        for k in 0..n {
            if x[k] - r < lo[k].to_f64_lossy() || x[k] + r > hi[k].to_f64_lossy() {
                let mut p = x.to_vec();
                p[k] += if x[k] - r < lo[k].to_f64_lossy() { -r } else { r };
                return Err(Error::HaloOutsideEvaluationDomain { point: p });
            }
        }
    }
    let mut buf = vec![T::zero(); n];
    let mut out = [T::zero()];
    let centre = eval_at(u, x, &mut buf, &mut out);

    let m = chunk_sizes(n_mc)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = Substream::derived(seed, "mean-value", c as u64);
            let mut z = vec![0.0; n];
            let mut y = vec![0.0; n];
            let mut buf = vec![T::zero(); n];
            let mut out = [T::zero()];
            let mut m = Moments::default();
            for _ in 0..len {
                let len_z = loop {
                    rng.fill_normals(&mut z);
                    let l = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if l > 0.0 {
                        break l;
                    }
                };
                let rad = r * rng.uniform().powf(1.0 / n as f64);
                y.iter_mut().zip(x.iter().zip(&z)).for_each(|(yi, (xi, zi))| *yi = xi + rad * zi / len_z);
                m.push(eval_at(u, &y, &mut buf, &mut out) - centre);
            }
            m
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Moments::default(), Moments::merge);

    let residual = m.mean();
    let se = m.std_error();
    let mut details = Details::new();
    details.insert("center_value".into(), centre.into());
    details.insert("ball_average".into(), (centre + residual).into());
    details.insert("radius".into(), r.into());
    details.insert("samples".into(), n_mc.into());
    details.insert("ball_volume".into(), ball_volume(n).into());
    details.insert("gamma_half_variant".into(), gamma_half_variant(n).into());
    details.insert(
        "volume_note".into(),
        format!(
            "unit-ball volume uses Γ(n/2+1); the Γ(n/2) variant differs by the factor n/2 = {} here",
            n as f64 / 2.0
        )
        .into(),
    );
    let tol = MC_SIGMAS * se + rounding_floor(centre);
    Ok(ResidualReport::from_estimate("mean_value", x.to_vec(), residual, se, tol, details))
}

/// Draws `x + τb + √τ·L·Z` for the law's square root `L`.
struct GaussianSampler {
    mean: Vec<f64>,
    root: Vec<Vec<f64>>,
    scale: f64,
}

impl GaussianSampler {
    fn new<T: Real>(law: &GaussianLaw<T>, tau: f64, x: &[f64]) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!("τ must be positive, got {tau}")));
        }
        if law.dim() != x.len() {
            return Err(Error::DimensionMismatch { expected: law.dim(), found: x.len() });
        }
        let root = law.root()?;
        Ok(Self {
            mean: x.iter().zip(law.drift()).map(|(a, b)| a + tau * b.to_f64_lossy()).collect(),
            root: root.rows().into_iter().map(|r| r.iter().map(|v| v.to_f64_lossy()).collect()).collect(),
            scale: tau.sqrt(),
        })
    }

    fn draw(&self, rng: &mut Substream, z: &mut [f64], y: &mut [f64]) {
        rng.fill_normals(z);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.mean[i] + self.scale * self.root[i].iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

/// Compares `f(x)` with `E[f(x + τb + √τ·L·Z)] − τμ`.
pub fn smoothing_representation_check<T: Real>(
    f: &Transform<T>,
    law: &GaussianLaw<T>,
    tau: f64,
    x: &[f64],
    mu: f64,
    n_mc: usize,
    seed: u64,
) -> Result<ResidualReport> {
    scalar_field(f, x)?;
    require_samples(n_mc)?;
    let sampler = GaussianSampler::new(law, tau, x)?;
    let n = x.len();
    let mut buf = vec![T::zero(); n];
    let mut out = [T::zero()];
    let fx = eval_at(f, x, &mut buf, &mut out);
    let m = chunk_sizes(n_mc)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = Substream::derived(seed, "smoothing", c as u64);
            let (mut z, mut y) = (vec![0.0; n], vec![0.0; n]);
            let mut buf = vec![T::zero(); n];
            let mut out = [T::zero()];
            let mut m = Moments::default();
            for _ in 0..len {
                sampler.draw(&mut rng, &mut z, &mut y);
                m.push(eval_at(f, &y, &mut buf, &mut out) - fx);
            }
            m
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Moments::default(), Moments::merge);
    let residual = m.mean() - tau * mu;
    let se = m.std_error();
    let mut details = Details::new();
    details.insert("f_x".into(), fx.into());
    details.insert("smoothed_mean".into(), (fx + m.mean()).into());
    details.insert("tau".into(), tau.into());
    details.insert("mu".into(), mu.into());
    details.insert("samples".into(), n_mc.into());
    let tol = MC_SIGMAS * se + rounding_floor(fx);
    Ok(ResidualReport::from_estimate("smoothing_representation", x.to_vec(), residual, se, tol, details))
}

/// `E‖∇f‖ − ‖E∇f‖` under the Gaussian weight `φ(τ, x, ·)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JensenGapReport {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub lhs_std_error: f64,
    pub rhs_std_error: f64,
    /// `√(se_lhs² + se_rhs²)`.
    pub std_error: f64,
    /// Gap tolerance: `3·std_error` plus a rounding allowance.
    pub tolerance: f64,
    /// Sample standard deviation of `‖∇f‖`.
    pub norm_spread: f64,
    /// Estimated mean gradient; the constant gradient when the gap vanishes.
    pub mean_gradient: Vec<f64>,
    /// Draws replaced because the gradient did not exist there.
    pub resampled: usize,
    /// `pass` certifies an a.e.-constant gradient: no gap and no spread in `‖∇f‖`.
    pub verdict: Verdict,
}

impl JensenGapReport {
    pub fn gap_within_error(&self) -> bool {
        self.gap.abs() <= self.tolerance
    }
}

#[derive(Debug, Clone, Default)]
struct GradientMoments {
    norm: Moments,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    resampled: usize,
}

impl GradientMoments {
    fn merge(mut self, o: GradientMoments) -> Self {
        self.norm = self.norm.merge(o.norm);
        if self.sum.is_empty() {
            self.sum = o.sum;
            self.sum_sq = o.sum_sq;
        } else {
            self.sum.iter_mut().zip(&o.sum).for_each(|(a, b)| *a += b);
            self.sum_sq.iter_mut().zip(&o.sum_sq).for_each(|(a, b)| *a += b);
        }
        self.resampled += o.resampled;
        self
    }
}

/// Maximum consecutive non-differentiable draws tolerated before giving up.
const MAX_RESAMPLES: usize = 1000;

/// Monte Carlo Jensen gap of the gradient norm.
pub fn jensen_gap<T: Real>(
    f: &Transform<T>,
    law: &GaussianLaw<T>,
    tau: f64,
    x: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<JensenGapReport> {
    scalar_field(f, x)?;
    require_samples(n_mc)?;
    let sampler = GaussianSampler::new(law, tau, x)?;
    let n = x.len();
    let chunks: Vec<GradientMoments> = chunk_sizes(n_mc)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = Substream::new(derive_seed(seed, "jensen", 0), c as u64);
            let (mut z, mut y) = (vec![0.0; n], vec![0.0; n]);
            let mut buf = vec![T::zero(); n];
            let mut acc = GradientMoments { sum: vec![0.0; n], sum_sq: vec![0.0; n], ..Default::default() };
            for _ in 0..len {
                let mut tries = 0;
                let g = loop {
                    sampler.draw(&mut rng, &mut z, &mut y);
                    buf.iter_mut().zip(&y).for_each(|(b, &v)| *b = T::lit(v));
                    match f.gradient(&buf, DiffMethod::Auto) {
                        Ok(g) => break g,
                        Err(Error::NotDifferentiableHere { point }) => {
                            tries += 1;
                            acc.resampled += 1;
                            if tries > MAX_RESAMPLES {
                                return Err(Error::NotDifferentiableHere { point });
                            }
                        }
                        Err(e) => return Err(e),
                    }
                };
                let mut sq = 0.0;
                for (k, gk) in g.iter().enumerate() {
                    let v = gk.to_f64_lossy();
                    acc.sum[k] += v;
                    acc.sum_sq[k] += v * v;
                    sq += v * v;
                }
                acc.norm.push(sq.sqrt());
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let total = chunks.into_iter().fold(GradientMoments::default(), GradientMoments::merge);
    let count = total.norm.n;
    let mean_gradient: Vec<f64> = total.sum.iter().map(|s| s / count).collect();
    let trace_cov: f64 = total
        .sum
        .iter()
        .zip(&total.sum_sq)
        .map(|(s, q)| ((q / count - (s / count).powi(2)) * count / (count - 1.0)).max(0.0))
        .sum();
    let lhs = total.norm.mean();
    let rhs = mean_gradient.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lhs_se = total.norm.std_error();
    let rhs_se = (trace_cov / count).sqrt();
    let std_error = lhs_se.hypot(rhs_se);
    let tolerance = MC_SIGMAS * std_error + rounding_floor(lhs);
    let norm_spread = total.norm.variance().sqrt();
    let gap = lhs - rhs;
    let constant = gap.abs() <= tolerance && norm_spread <= 1e-9 * (1.0 + lhs);
    Ok(JensenGapReport {
        lhs,
        rhs,
        gap,
        lhs_std_error: lhs_se,
        rhs_std_error: rhs_se,
        std_error,
        tolerance,
        norm_spread,
        mean_gradient,
        resampled: total.resampled,
        verdict: if constant { Verdict::Pass } else { Verdict::Reject },
    })
}
