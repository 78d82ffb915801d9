use super::Transform;
use crate::error::{Error, Result};
use crate::scalar::{norm, Real};

/// Relative central-difference step for gradients: `h = 1e-5 (1 + ‖x‖)`.
pub const FD_GRADIENT_RSTEP: f64 = 1e-5;
/// Relative step for the second-difference Laplacian: `h = 1e-4 (1 + ‖x‖)`.
pub const FD_LAPLACIAN_RSTEP: f64 = 1e-4;

/// How derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DiffMethod {
    /// Analytic when the catalog entry has a formula, central differences otherwise.
    #[default]
    Auto,
    Analytic,
    /// Central differences with an explicit step, or the default relative step.
    FiniteDifference { step: Option<f64> },
}

impl<T: Real> Transform<T> {
    fn require_scalar(&self, x: &[T]) -> Result<()> {
        if !self.is_scalar() {
            return Err(Error::NotScalar {
                outputs: self.output_dim(),
            });
        }
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn not_differentiable(x: &[T]) -> Error {
        Error::NotDifferentiableHere {
            point: x.iter().map(|v| v.to_f64_lossy()).collect(),
        }
    }

    /// Closed-form gradient of a scalar entry, if the catalog has one.
    pub fn analytic_gradient(&self, x: &[T], out: &mut [T]) -> bool {
        match self {
            Transform::Identity(1) => out[0] = T::one(),
            Transform::Square(1) => out[0] = x[0] + x[0],
            Transform::Affine(a) if a.output_dim() == 1 => {
                out.iter_mut()
                    .zip(a.matrix().row(0))
                    .for_each(|(o, &p)| *o = p);
            }
            Transform::Harmonic(h) => h.gradient(x, out),
            Transform::Polynomial(p) => p.gradient(x, out),
            Transform::ExpSin => super::exp_sin_gradient(x, out),
            Transform::Component { inner, index } => match inner.as_ref() {
                Transform::Identity(_) => {
                    out.iter_mut().for_each(|o| *o = T::zero());
                    out[*index] = T::one();
                }
                Transform::Square(_) => {
                    out.iter_mut().for_each(|o| *o = T::zero());
                    out[*index] = x[*index] + x[*index];
                }
                Transform::Affine(a) => {
                    out.iter_mut()
                        .zip(a.matrix().row(*index))
                        .for_each(|(o, &p)| *o = p);
                }
                _ => return false,
            },
            Transform::Restricted { inner, .. } => return inner.analytic_gradient(x, out),
            _ => return false,
        }
        true
    }

    /// Closed-form Laplacian of a scalar entry, if the catalog has one.
    pub fn analytic_laplacian(&self, x: &[T]) -> Option<T> {
        match self {
            Transform::Identity(1) => Some(T::zero()),
            Transform::Square(1) => Some(T::lit(2.0)),
            Transform::Affine(a) if a.output_dim() == 1 => Some(T::zero()),
            Transform::Harmonic(_) | Transform::ExpSin => Some(T::zero()),
            Transform::Polynomial(p) => Some(p.laplacian(x)),
            Transform::Component { inner, .. } => match inner.as_ref() {
                Transform::Identity(_) | Transform::Affine(_) => Some(T::zero()),
                Transform::Square(_) => Some(T::lit(2.0)),
                _ => None,
            },
            Transform::Restricted { inner, .. } => inner.analytic_laplacian(x),
            _ => None,
        }
    }

    fn stencil_checks(&self, x: &[T], h: T) -> Result<()> {
        if let Some(d) = self.singularity_distance(x) {
            if d <= h {
                return Err(Self::not_differentiable(x));
            }
        }
        if self.evaluation_domain().is_some() {
            let mut probe = x.to_vec();
            for i in 0..x.len() {
                for s in [h, -h] {
                    probe[i] = x[i] + s;
                    if !self.contains(&probe) {
                        return Err(Error::HaloOutsideEvaluationDomain {
                            point: probe.iter().map(|v| v.to_f64_lossy()).collect(),
                        });
                    }
                }
                probe[i] = x[i];
            }
        }
        Ok(())
    }

    fn fd_gradient(&self, x: &[T], h: T, out: &mut [T]) -> Result<()> {
        self.stencil_checks(x, h)?;
        let mut probe = x.to_vec();
        let two_h = h + h;
        for i in 0..x.len() {
            probe[i] = x[i] + h;
            let up = self.scalar_unchecked(&probe);
            probe[i] = x[i] - h;
            let down = self.scalar_unchecked(&probe);
            probe[i] = x[i];
            out[i] = (up - down) / two_h;
        }
        Ok(())
    }

    fn fd_laplacian(&self, x: &[T], h: T) -> Result<T> {
        self.stencil_checks(x, h)?;
        let mut probe = x.to_vec();
        let centre = self.scalar_unchecked(x);
        let mut total = T::zero();
        for i in 0..x.len() {
            probe[i] = x[i] + h;
            let up = self.scalar_unchecked(&probe);
            probe[i] = x[i] - h;
            let down = self.scalar_unchecked(&probe);
            probe[i] = x[i];
            total += up - centre - centre + down;
        }
        Ok(total / (h * h))
    }

    fn default_step(x: &[T], relative: f64) -> T {
        T::lit(relative) * (T::one() + norm(x))
    }

    /// Gradient of a scalar transform at `x`.
    ///
    /// Fails with [`Error::NotDifferentiableHere`] at the apex of a nonlinear
    /// radial lift (or when a difference stencil would straddle it).
    pub fn gradient(&self, x: &[T], method: DiffMethod) -> Result<Vec<T>> {
        self.require_scalar(x)?;
        let mut out = vec![T::zero(); x.len()];
        match method {
            DiffMethod::Analytic => {
                if !self.analytic_gradient(x, &mut out) {
                    return Err(Error::InvalidTransform(format!(
                        "{self} has no analytic gradient"
                    )));
                }
            }
            DiffMethod::Auto => {
                if let Some(d) = self.singularity_distance(x) {
                    if d == T::zero() {
                        return Err(Self::not_differentiable(x));
                    }
                }
                if !self.analytic_gradient(x, &mut out) {
                    self.fd_gradient(x, Self::default_step(x, FD_GRADIENT_RSTEP), &mut out)?;
                }
            }
            DiffMethod::FiniteDifference { step } => {
                let h = step.map(T::lit).unwrap_or_else(|| Self::default_step(x, FD_GRADIENT_RSTEP));
                self.fd_gradient(x, h, &mut out)?;
            }
        }
        Ok(out)
    }

    /// Laplacian of a scalar transform at `x`.
    pub fn laplacian(&self, x: &[T], method: DiffMethod) -> Result<T> {
        self.require_scalar(x)?;
        match method {
            DiffMethod::Analytic => self.analytic_laplacian(x).ok_or_else(|| {
                Error::InvalidTransform(format!("{self} has no analytic Laplacian"))
            }),
            DiffMethod::Auto => {
                if let Some(d) = self.singularity_distance(x) {
                    if d == T::zero() {
                        return Err(Self::not_differentiable(x));
                    }
                }
                match self.analytic_laplacian(x) {
                    Some(v) => Ok(v),
                    None => self.fd_laplacian(x, Self::default_step(x, FD_LAPLACIAN_RSTEP)),
                }
            }
            DiffMethod::FiniteDifference { step } => {
                let h = step
                    .map(T::lit)
                    .unwrap_or_else(|| Self::default_step(x, FD_LAPLACIAN_RSTEP));
                self.fd_laplacian(x, h)
            }
        }
    }
}

/// `‖∇f‖` at each point; a constant profile is the eikonal certificate.
pub fn eikonal_profile<T: Real>(
    f: &Transform<T>,
    points: &[Vec<T>],
    method: DiffMethod,
) -> Result<Vec<T>> {
    points
        .iter()
        .map(|x| f.gradient(x, method).map(|g| norm(&g)))
        .collect()
}
