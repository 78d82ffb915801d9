//! Catalog of transforms `f: ℝⁿ → ℝᵐ` with evaluation and, where the
//! formula allows it, analytic gradients and Laplacians.

mod affine;
mod diff;
mod fields;
mod parse;
mod sphere;

use std::fmt;

pub use affine::AffineTransform;
pub use diff::{eikonal_profile, DiffMethod, FD_GRADIENT_RSTEP, FD_LAPLACIAN_RSTEP};
pub use fields::{exp_sin, exp_sin_gradient, HarmonicField, Monomial, Polynomial};
pub use sphere::{angle_double_closed_form, angle_multiply_trig, RadialLift, SphereMap};

use crate::error::{Error, Result};
use crate::scalar::{norm, Real};

#[derive(Debug, Clone, PartialEq)]
pub enum Transform<T: Real> {
    Identity(usize),
    Affine(AffineTransform<T>),
    RadialLift(RadialLift<T>),
    Harmonic(HarmonicField),
    Polynomial(Polynomial<T>),
    /// `e^{x₁} sin x₂`.
    ExpSin,
    /// Coordinate-wise square `x ↦ (x₁², …, xₙ²)`.
    Square(usize),
    /// One output coordinate of a vector transform.
    Component { inner: Box<Transform<T>>, index: usize },
    /// `inner` with evaluation restricted to the box `[lo, hi]`.
    Restricted {
        inner: Box<Transform<T>>,
        lo: Vec<T>,
        hi: Vec<T>,
    },
}

impl<T: Real> Transform<T> {
    /// Parses a catalog identifier such as `affine(P=[[2]],q=[3])`,
    /// `radial_lift(angle_multiply(2))` or `harmonic(re_z^2)`.
    pub fn parse(spec: &str) -> Result<Self> {
        parse::parse_transform(spec)
    }

    pub fn affine(p: ndarray::Array2<T>, q: ndarray::Array1<T>) -> Result<Self> {
        Ok(Transform::Affine(AffineTransform::new(p, q)?))
    }

    /// Radial lift of angle doubling, the planar counterexample map.
    pub fn angle_doubling() -> Self {
        Transform::RadialLift(RadialLift::new(SphereMap::AngleMultiply { k: 2 }))
    }

    pub fn component(inner: Transform<T>, index: usize) -> Result<Self> {
        if index >= inner.output_dim() {
            return Err(Error::InvalidTransform(format!(
                "component {index} out of range for {} outputs",
                inner.output_dim()
            )));
        }
        Ok(Transform::Component {
            inner: Box::new(inner),
            index,
        })
    }

    pub fn restricted(inner: Transform<T>, lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        let n = inner.input_dim();
        if lo.len() != n || hi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: lo.len().max(hi.len()),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidTransform("restriction box needs lo < hi".into()));
        }
        Ok(Transform::Restricted {
            inner: Box::new(inner),
            lo,
            hi,
        })
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Transform::Identity(n) | Transform::Square(n) => *n,
            Transform::Affine(a) => a.input_dim(),
            Transform::RadialLift(g) => g.dim(),
            Transform::Harmonic(_) | Transform::ExpSin => 2,
            Transform::Polynomial(p) => p.dim(),
            Transform::Component { inner, .. } | Transform::Restricted { inner, .. } => {
                inner.input_dim()
            }
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Transform::Identity(n) | Transform::Square(n) => *n,
            Transform::Affine(a) => a.output_dim(),
            Transform::RadialLift(g) => g.dim(),
            Transform::Harmonic(_) | Transform::ExpSin | Transform::Polynomial(_) => 1,
            Transform::Component { .. } => 1,
            Transform::Restricted { inner, .. } => inner.output_dim(),
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.output_dim() == 1
    }

    /// Whether the transform is affine by construction.
    pub fn is_affine(&self) -> bool {
        match self {
            Transform::Identity(_) | Transform::Affine(_) => true,
            Transform::RadialLift(g) => g.sphere_map().is_linear(),
            Transform::Component { inner, .. } | Transform::Restricted { inner, .. } => {
                inner.is_affine()
            }
            Transform::Polynomial(p) => p
                .terms()
                .iter()
                .all(|t| t.exponents.iter().sum::<u32>() <= 1),
            _ => false,
        }
    }

    /// Box outside which the transform is undefined, if any.
    pub fn evaluation_domain(&self) -> Option<(&[T], &[T])> {
        match self {
            Transform::Restricted { lo, hi, .. } => Some((lo, hi)),
            Transform::Component { inner, .. } => inner.evaluation_domain(),
            _ => None,
        }
    }

    pub fn contains(&self, x: &[T]) -> bool {
        match self.evaluation_domain() {
            None => true,
            Some((lo, hi)) => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| a <= v && v <= b),
        }
    }

    /// Distance from `x` to the point where the transform stops being
    /// differentiable, for transforms that have one.
    pub fn singularity_distance(&self, x: &[T]) -> Option<T> {
        match self {
            Transform::RadialLift(g) if !g.sphere_map().is_linear() => Some(norm(x)),
            Transform::Component { inner, .. } | Transform::Restricted { inner, .. } => {
                inner.singularity_distance(x)
            }
            _ => None,
        }
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        if !self.contains(x) {
            return Err(Error::HaloOutsideEvaluationDomain {
                point: x.iter().map(|v| v.to_f64_lossy()).collect(),
            });
        }
        let mut out = vec![T::zero(); self.output_dim()];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    /// Scalar value; the transform must have one output.
    pub fn eval_scalar(&self, x: &[T]) -> Result<T> {
        if !self.is_scalar() {
            return Err(Error::NotScalar {
                outputs: self.output_dim(),
            });
        }
        Ok(self.eval(x)?[0])
    }

    /// Unchecked evaluation for hot loops; dimensions must already match.
    #[inline]
    pub fn eval_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.input_dim());
        debug_assert_eq!(out.len(), self.output_dim());
        match self {
            Transform::Identity(_) => out.copy_from_slice(x),
            Transform::Affine(a) => a.eval_into(x, out),
            Transform::RadialLift(g) => g.eval_into(x, out),
            Transform::Harmonic(h) => out[0] = h.eval(x),
            Transform::Polynomial(p) => out[0] = p.eval(x),
            Transform::ExpSin => out[0] = exp_sin(x),
            Transform::Square(_) => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = v * v;
                }
            }
            Transform::Component { inner, index } => {
                let mut full = vec![T::zero(); inner.output_dim()];
                inner.eval_into(x, &mut full);
                out[0] = full[*index];
            }
            Transform::Restricted { inner, .. } => inner.eval_into(x, out),
        }
    }

    #[inline]
    pub(crate) fn scalar_unchecked(&self, x: &[T]) -> T {
        let mut out = [T::zero()];
        self.eval_into(x, &mut out);
        out[0]
    }
}

fn fmt_vec<T: Real>(f: &mut fmt::Formatter<'_>, v: &[T]) -> fmt::Result {
    write!(f, "[")?;
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{x}")?;
    }
    write!(f, "]")
}

impl<T: Real> fmt::Display for SphereMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SphereMap::Identity { n } => write!(f, "identity({n})"),
            SphereMap::AngleMultiply { k } => write!(f, "angle_multiply({k})"),
            SphereMap::Rotation(r) => {
                write!(f, "rotation(R=[")?;
                for (i, row) in r.rows().into_iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    fmt_vec(f, &row.to_vec())?;
                }
                write!(f, "])")
            }
        }
    }
}

impl<T: Real> fmt::Display for Transform<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Identity(n) => write!(f, "identity({n})"),
            Transform::Affine(a) => {
                write!(f, "affine(P=[")?;
                for (i, row) in a.matrix().rows().into_iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    fmt_vec(f, &row.to_vec())?;
                }
                write!(f, "],q=")?;
                fmt_vec(f, &a.offset().to_vec())?;
                write!(f, ")")
            }
            Transform::RadialLift(g) => write!(f, "radial_lift({})", g.sphere_map()),
            Transform::Harmonic(h) => write!(f, "harmonic({h})"),
            Transform::Polynomial(p) => write!(f, "poly({p},dim={})", p.dim()),
            Transform::ExpSin => write!(f, "exp_sin"),
            Transform::Square(n) => write!(f, "square({n})"),
            Transform::Component { inner, index } => write!(f, "component({index},{inner})"),
            Transform::Restricted { inner, lo, hi } => {
                write!(f, "restrict({inner},lo=")?;
                fmt_vec(f, lo)?;
                write!(f, ",hi=")?;
                fmt_vec(f, hi)?;
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_mismatch() {
        let g = Transform::<f64>::angle_doubling();
        assert!(matches!(g.eval(&[1.0]), Err(Error::DimensionMismatch { expected: 2, found: 1 })));
    }

    #[test]
    fn eval_catalog() {
        let g = Transform::<f64>::angle_doubling();
        let v = g.eval(&[3.0, 4.0]).unwrap();
        assert!((v[0] + 1.4).abs() < 1e-15 && (v[1] - 4.8).abs() < 1e-15);
        assert_eq!(g.eval(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let a = Transform::<f64>::parse("affine(P=[[2]],q=[3])").unwrap();
        assert_eq!(a.eval(&[0.0]).unwrap(), vec![3.0]);
        assert_eq!(a.eval(&[1.5]).unwrap(), vec![6.0]);
        let sq = Transform::<f64>::Square(2);
        assert_eq!(sq.eval(&[-2.0, 3.0]).unwrap(), vec![4.0, 9.0]);
        let c = Transform::component(Transform::<f64>::angle_doubling(), 1).unwrap();
        assert!((c.eval_scalar(&[3.0, 4.0]).unwrap() - 4.8).abs() < 1e-15);
        assert!(Transform::component(Transform::<f64>::angle_doubling(), 2).is_err());
        assert!(matches!(g.eval_scalar(&[1.0, 1.0]), Err(Error::NotScalar { outputs: 2 })));
    }

    #[test]
    fn affineness_flags() {
        assert!(Transform::<f64>::parse("radial_lift(rotation(theta=0.3))").unwrap().is_affine());
        assert!(!Transform::<f64>::angle_doubling().is_affine());
        assert!(Transform::<f64>::parse("poly(2*x1 - x2 + 1)").unwrap().is_affine());
        assert!(!Transform::<f64>::parse("poly(x1^2)").unwrap().is_affine());
    }

    #[test]
    fn restricted_domain() {
        let u = Transform::restricted(Transform::<f64>::ExpSin, vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert!(u.eval(&[0.5, 0.5]).is_ok());
        assert!(matches!(u.eval(&[1.5, 0.0]), Err(Error::HaloOutsideEvaluationDomain { .. })));
    }

    #[test]
    fn display_round_trips_through_parser() {
        for spec in [
            "identity(3)",
            "affine(P=[[2,0],[1,1]],q=[3,-1])",
            "radial_lift(angle_multiply(2))",
            "radial_lift(angle_multiply(-3))",
            "radial_lift(identity(2))",
            "radial_lift(rotation(R=[[0,-1],[1,0]]))",
            "harmonic(re_z^2)",
            "harmonic(im_z^5)",
            "poly(1*x1^2 - 1*x2^2,dim=2)",
            "exp_sin",
            "square(1)",
            "component(1,radial_lift(angle_multiply(2)))",
            "restrict(exp_sin,lo=[-1,-1],hi=[1,1])",
        ] {
            let t = Transform::<f64>::parse(spec).unwrap();
            assert_eq!(t.to_string(), spec);
            assert_eq!(Transform::<f64>::parse(&t.to_string()).unwrap(), t);
        }
    }
}
