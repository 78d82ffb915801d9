use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::domain::GridDomain;
use crate::conformance::{Details, Verdict};
use crate::error::{Error, Result};
use crate::scalar::{norm, Real};
use crate::transforms::{DiffMethod, Transform};

/// Summary of a pointwise (or Monte Carlo) residual against a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub name: String,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub argmax: Vec<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
    /// Points left out because the field is not differentiable there.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub excluded: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Details::is_empty", default)]
    pub details: Details,
}

impl ResidualReport {
    pub(crate) fn from_pointwise(
        name: impl Into<String>,
        residuals: &[(Vec<f64>, f64)],
        tolerance: f64,
        excluded: Vec<Vec<f64>>,
    ) -> Self {
        let (mut max_abs, mut sum, mut argmax) = (0.0f64, 0.0, Vec::new());
        for (x, r) in residuals {
            let a = r.abs();
            sum += a;
            if a > max_abs || argmax.is_empty() {
                max_abs = a;
                argmax = x.clone();
            }
        }
        let mean_abs = if residuals.is_empty() { 0.0 } else { (sum / residuals.len() as f64).min(max_abs) };
        Self {
            name: name.into(),
            max_abs,
            mean_abs,
            argmax,
            tolerance,
            verdict: if max_abs > tolerance { Verdict::Reject } else { Verdict::Pass },
            excluded,
            std_error: None,
            details: Details::new(),
        }
    }

    /// Single Monte Carlo residual; `tolerance` already includes the error allowance.
    pub(crate) fn from_estimate(
        name: impl Into<String>,
        at: Vec<f64>,
        residual: f64,
        std_error: f64,
        tolerance: f64,
        mut details: Details,
    ) -> Self {
        details.insert("residual".into(), residual.into());
        Self {
            name: name.into(),
            max_abs: residual.abs(),
            mean_abs: residual.abs(),
            argmax: at,
            tolerance,
            verdict: if residual.abs() > tolerance { Verdict::Reject } else { Verdict::Pass },
            excluded: Vec::new(),
            std_error: Some(std_error),
            details,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

fn require_scalar_on<T: Real>(u: &Transform<T>, domain: &GridDomain) -> Result<()> {
    if !u.is_scalar() {
        return Err(Error::NotScalar { outputs: u.output_dim() });
    }
    if u.input_dim() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), found: u.input_dim() });
    }
    Ok(())
}

fn to_t<T: Real>(x: &[f64]) -> Vec<T> {
    x.iter().map(|&v| T::lit(v)).collect()
}

fn outside<T: Real>(x: &[T]) -> Error {
    Error::HaloOutsideEvaluationDomain { point: x.iter().map(|v| v.to_f64_lossy()).collect() }
}

/// Five-point (in 2-d; `2n+1`-point in general) central second difference
/// with the grid spacing, at every masked node. Stencils reach one cell past
/// the mask, so the field must be defined there.
pub fn laplacian_residual<T: Real>(u: &Transform<T>, domain: &GridDomain, tolerance: f64) -> Result<ResidualReport> {
    require_scalar_on(u, domain)?;
    let h = T::lit(domain.spacing());
    let h2 = h * h;
    let residuals: Vec<(Vec<f64>, f64)> = domain
        .points()
        .par_iter()
        .map(|p| {
            let x = to_t::<T>(p);
            if !u.contains(&x) {
                return Err(outside(&x));
            }
            let mut out = [T::zero()];
            u.eval_into(&x, &mut out);
            let centre = out[0];
            let mut acc = T::zero();
            let mut y = x.clone();
            for k in 0..x.len() {
                let mut side = |shift: T| -> Result<T> {
                    y[k] = x[k] + shift;
                    if !u.contains(&y) {
                        return Err(outside(&y));
                    }
                    u.eval_into(&y, &mut out);
                    y[k] = x[k];
                    Ok(out[0])
                };
                let plus = side(h)?;
                let minus = side(-h)?;
                acc += (plus - centre - centre + minus) / h2;
            }
            Ok((p.clone(), acc.to_f64_lossy()))
        })
        .collect::<Result<_>>()?;
    Ok(ResidualReport::from_pointwise("laplacian", &residuals, tolerance, Vec::new()))
}

/// Gradients at every masked node, splitting off the nodes where the field is
/// not differentiable.
fn gradients<T: Real>(u: &Transform<T>, domain: &GridDomain) -> Result<(Vec<(Vec<f64>, Vec<f64>)>, Vec<Vec<f64>>)> {
    require_scalar_on(u, domain)?;
    let raw: Vec<Result<(Vec<f64>, Vec<f64>)>> = domain
        .points()
        .par_iter()
        .map(|p| {
            let x = to_t::<T>(p);
            if !u.contains(&x) {
                return Err(outside(&x));
            }
            let g = u.gradient(&x, DiffMethod::Auto)?;
            Ok((p.clone(), g.iter().map(|v| v.to_f64_lossy()).collect()))
        })
        .collect();
    let mut good = Vec::with_capacity(raw.len());
    let mut excluded = Vec::new();
    for r in raw {
        match r {
            Ok(v) => good.push(v),
            Err(Error::NotDifferentiableHere { point }) => excluded.push(point),
            Err(e) => return Err(e),
        }
    }
    Ok((good, excluded))
}

/// `| ‖∇u‖ − target |` over masked nodes; non-differentiable nodes are excluded and listed.
pub fn eikonal_residual<T: Real>(
    u: &Transform<T>,
    domain: &GridDomain,
    target: f64,
    tolerance: f64,
) -> Result<ResidualReport> {
    if !(target >= 0.0) {
        return Err(Error::InvalidArgument(format!("eikonal target must be non-negative, got {target}")));
    }
    let (grads, excluded) = gradients(u, domain)?;
    let residuals: Vec<(Vec<f64>, f64)> = grads.into_iter().map(|(x, g)| (x, norm(&g) - target)).collect();
    let mut r = ResidualReport::from_pointwise("eikonal", &residuals, tolerance, excluded);
    r.details.insert("target".into(), target.into());
    Ok(r)
}

/// Mean gradient `p` over the (connected) domain and the largest deviation
/// `‖∇u − p‖`. A pass certifies that `u` is affine on the domain with slope `p`.
pub fn gradient_constancy<T: Real>(
    u: &Transform<T>,
    domain: &GridDomain,
    tolerance: f64,
) -> Result<(Vec<f64>, ResidualReport)> {
    let (grads, excluded) = gradients(u, domain)?;
    let n = domain.dim();
    let mut p = vec![0.0; n];
    for (_, g) in &grads {
        p.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    let count = grads.len().max(1) as f64;
    p.iter_mut().for_each(|a| *a /= count);
    let residuals: Vec<(Vec<f64>, f64)> = grads
        .into_iter()
        .map(|(x, g)| {
            let dev: Vec<f64> = g.iter().zip(&p).map(|(a, b)| a - b).collect();
            (x, norm(&dev))
        })
        .collect();
    let mut r = ResidualReport::from_pointwise("gradient_constancy", &residuals, tolerance, excluded);
    r.details.insert("slope".into(), serde_json::json!(p));
    Ok((p, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::Mask;

    fn parse(s: &str) -> Transform<f64> {
        Transform::parse(s).unwrap()
    }

    fn square() -> GridDomain {
        GridDomain::cube(2, 0.05).unwrap()
    }

    #[test]
    fn laplacian_examples() {
        let d = square();
        let r = laplacian_residual(&parse("affine(P=[[0.6,0.8]],q=[1])"), &d, 1e-9).unwrap();
        assert!(r.max_abs <= 1e-9 && r.passed());
        let r = laplacian_residual(&parse("harmonic(re_z^2)"), &d, 1e-8).unwrap();
        assert!(r.max_abs <= 1e-8);
        let r = laplacian_residual(&parse("poly(x1^2, dim=2)"), &d, 1e-6).unwrap();
        assert!((r.mean_abs - 2.0).abs() < 1e-8 && !r.passed());
        assert!(r.max_abs >= r.mean_abs);
    }

    #[test]
    fn eikonal_examples() {
        let d = square();
        let r = eikonal_residual(&parse("affine(P=[[0.6,0.8]],q=[0])"), &d, 1.0, 1e-9).unwrap();
        assert!(r.max_abs <= 1e-9);
        let r = eikonal_residual(&parse("affine(P=[[0,0]],q=[5])"), &d, 0.0, 1e-9).unwrap();
        assert!(r.max_abs <= 1e-9);
        // Single node at (1, 0): ‖∇u‖ = 2 there.
        let one = GridDomain::new(vec![1.0, 0.0], vec![1.01, 0.01], 0.05, Mask::Box).unwrap();
        let r = eikonal_residual(&parse("harmonic(re_z^2)"), &one, 1.0, 1e-6).unwrap();
        assert_eq!(r.argmax, vec![1.0, 0.0]);
        assert!((r.max_abs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn radial_lift_apex_is_excluded() {
        let f = parse("component(0, radial_lift(angle_multiply(2)))");
        let r = eikonal_residual(&f, &square(), 1.0, 1e-6).unwrap();
        assert_eq!(r.excluded, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn constancy_examples() {
        let d = square();
        let (p, r) = gradient_constancy(&parse("affine(P=[[0.6,0.8]],q=[2])"), &d, 1e-9).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-12 && (p[1] - 0.8).abs() < 1e-12);
        assert!(r.max_abs <= 1e-9);
        let (p, r) = gradient_constancy(&parse("affine(P=[[0,0]],q=[2])"), &d, 1e-9).unwrap();
        assert_eq!(p, vec![0.0, 0.0]);
        assert!(r.passed());
        let (_, r) = gradient_constancy(&parse("harmonic(re_z^2)"), &d, 1e-4).unwrap();
        assert!(r.max_abs >= 2.0 && !r.passed());
    }

    #[test]
    fn restricted_field_needs_halo() {
        let f = Transform::restricted(parse("harmonic(re_z^2)"), vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            laplacian_residual(&f, &square(), 1e-8),
            Err(Error::HaloOutsideEvaluationDomain { .. })
        ));
        let inner = GridDomain::new(vec![-0.5; 2], vec![0.5; 2], 0.05, Mask::Box).unwrap();
        assert!(laplacian_residual(&f, &inner, 1e-8).unwrap().passed());
    }

    #[test]
    fn vector_fields_are_refused() {
        assert!(matches!(
            laplacian_residual(&parse("identity(2)"), &square(), 1e-8),
            Err(Error::NotScalar { outputs: 2 })
        ));
    }
}
