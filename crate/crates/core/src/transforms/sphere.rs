//! Maps of the unit sphere and their radial lifts `g(x) = ‖x‖ h(x / ‖x‖)`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::mat_vec_into;
use crate::scalar::{norm, Real};

/// Tolerance on `‖RᵀR − I‖∞` accepted for rotation matrices.
const ORTHOGONALITY_TOL: f64 = 1e-10;

/// A continuous map `h` of the unit sphere onto itself.
#[derive(Debug, Clone, PartialEq)]
pub enum SphereMap<T: Real> {
    Identity { n: usize },
    /// Orthogonal matrix acting on `S^{n-1}`.
    Rotation(Array2<T>),
    /// `(cos θ, sin θ) ↦ (cos kθ, sin kθ)` on the circle.
    AngleMultiply { k: i32 },
}

impl<T: Real> SphereMap<T> {
    pub fn rotation(r: Array2<T>) -> Result<Self> {
        let n = r.nrows();
        if r.ncols() != n || n == 0 {
            return Err(Error::InvalidTransform("rotation matrix must be square".into()));
        }
        let gram = r.t().dot(&r);
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { T::one() } else { T::zero() };
                if (gram[[i, j]] - target).abs() > T::lit(ORTHOGONALITY_TOL) {
                    return Err(Error::InvalidTransform("rotation matrix is not orthogonal".into()));
                }
            }
        }
        Ok(SphereMap::Rotation(r))
    }

    /// Planar rotation by `angle` radians.
    pub fn planar_rotation(angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        let mut r = Array2::zeros((2, 2));
        r[[0, 0]] = c;
        r[[0, 1]] = -s;
        r[[1, 0]] = s;
        r[[1, 1]] = c;
        SphereMap::Rotation(r)
    }

    pub fn angle_multiply(k: i32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidTransform(
                "angle_multiply needs |k| >= 1".into(),
            ));
        }
        Ok(SphereMap::AngleMultiply { k })
    }

    pub fn dim(&self) -> usize {
        match self {
            SphereMap::Identity { n } => *n,
            SphereMap::Rotation(r) => r.nrows(),
            SphereMap::AngleMultiply { .. } => 2,
        }
    }

    /// Whether this map is the restriction of a linear map to the sphere.
    pub fn is_linear(&self) -> bool {
        match self {
            SphereMap::Identity { .. } | SphereMap::Rotation(_) => true,
            SphereMap::AngleMultiply { k } => *k == 1,
        }
    }

    /// Applies `h` to a unit vector `u`.
    pub fn apply(&self, u: &[T], out: &mut [T]) {
        match self {
            SphereMap::Identity { .. } => out.copy_from_slice(u),
            SphereMap::Rotation(r) => mat_vec_into(r.view(), u, out),
            SphereMap::AngleMultiply { k: 2 } => {
                let [a, b] = angle_double_closed_form(u[0], u[1]);
                out[0] = a;
                out[1] = b;
            }
            SphereMap::AngleMultiply { k } => {
                let [a, b] = angle_multiply_trig(u[0], u[1], *k);
                out[0] = a;
                out[1] = b;
            }
        }
    }
}

/// Angle doubling on the circle through the algebraic identity
/// `(cos 2θ, sin 2θ) = (u₁² − u₂², 2 u₁ u₂)`.
#[inline]
pub fn angle_double_closed_form<T: Real>(u1: T, u2: T) -> [T; 2] {
    [u1 * u1 - u2 * u2, (u1 + u1) * u2]
}

/// `(cos kθ, sin kθ)` with `θ = atan2(u₂, u₁)`.
#[inline]
pub fn angle_multiply_trig<T: Real>(u1: T, u2: T, k: i32) -> [T; 2] {
    let theta = u2.atan2(u1) * T::lit(k as f64);
    let (s, c) = theta.sin_cos();
    [c, s]
}

/// Radial lift `g(x) = ‖x‖ h(x/‖x‖)`, `g(0) = 0`.
///
/// For angle doubling this is the planar map
/// `((x₁² − x₂²)/‖x‖, 2x₁x₂/‖x‖)`: continuous, norm preserving, not linear.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialLift<T: Real> {
    h: SphereMap<T>,
}

impl<T: Real> RadialLift<T> {
    pub fn new(h: SphereMap<T>) -> Self {
        Self { h }
    }

    pub fn sphere_map(&self) -> &SphereMap<T> {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    #[inline]
    pub fn eval_into(&self, x: &[T], out: &mut [T]) {
        if let SphereMap::AngleMultiply { k: 2 } = self.h {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r == T::zero() {
                out[0] = T::zero();
                out[1] = T::zero();
            } else {
                out[0] = (x[0] * x[0] - x[1] * x[1]) / r;
                out[1] = (x[0] + x[0]) * x[1] / r;
            }
            return;
        }
        let r = norm(x);
        if r == T::zero() {
            out.iter_mut().for_each(|o| *o = T::zero());
            return;
        }
        let u: Vec<T> = x.iter().map(|&v| v / r).collect();
        self.h.apply(&u, out);
        out.iter_mut().for_each(|o| *o *= r);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Substream;
    use proptest::prelude::*;

    fn lift(k: i32) -> RadialLift<f64> {
        RadialLift::new(SphereMap::angle_multiply(k).unwrap())
    }

    #[test]
    fn hand_values() {
        let g = lift(2);
        let mut out = [9.0; 2];
        g.eval_into(&[1.0, 0.0], &mut out);
        assert_eq!(out, [1.0, 0.0]);
        g.eval_into(&[3.0, 4.0], &mut out);
        assert!((out[0] + 1.4).abs() < 1e-15 && (out[1] - 4.8).abs() < 1e-15);
        g.eval_into(&[0.0, 0.0], &mut out);
        assert_eq!(out, [0.0, 0.0]);
    }

    #[test]
    fn origin_maps_to_origin_for_every_sphere_map() {
        let maps = vec![
            SphereMap::Identity { n: 3 },
            SphereMap::planar_rotation(0.7),
            SphereMap::angle_multiply(3).unwrap(),
            SphereMap::angle_multiply(-2).unwrap(),
        ];
        for h in maps {
            let g = RadialLift::new(h);
            let x = vec![0.0; g.dim()];
            let mut out = vec![1.0; g.dim()];
            g.eval_into(&x, &mut out);
            assert!(out.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn closed_form_matches_trig_route() {
        let mut rng = Substream::new(17, 0);
        for _ in 0..10_000 {
            let (a, b) = rng.normal_pair();
            let r = (a * a + b * b).sqrt();
            let (u1, u2) = (a / r, b / r);
            let c = angle_double_closed_form(u1, u2);
            let t = angle_multiply_trig(u1, u2, 2);
            assert!((c[0] - t[0]).abs() <= 1e-12 && (c[1] - t[1]).abs() <= 1e-12);
        }
        // every quadrant boundary
        for &(u1, u2) in &[(1.0f64, 0.0f64), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)] {
            let c = angle_double_closed_form(u1, u2);
            let t = angle_multiply_trig(u1, u2, 2);
            assert!((c[0] - t[0]).abs() <= 1e-12 && (c[1] - t[1]).abs() <= 1e-12);
        }
    }

    #[test]
    fn rotation_validation() {
        let bad = ndarray::array![[1.0, 0.1], [0.0, 1.0]];
        assert!(SphereMap::rotation(bad).is_err());
        let good = ndarray::array![[0.0, -1.0], [1.0, 0.0]];
        assert!(SphereMap::rotation(good).is_ok());
        assert!(SphereMap::<f64>::angle_multiply(0).is_err());
    }

    #[test]
    fn norm_preservation_over_random_points() {
        let maps = vec![
            SphereMap::angle_multiply(2).unwrap(),
            SphereMap::angle_multiply(3).unwrap(),
            SphereMap::angle_multiply(-1).unwrap(),
            SphereMap::planar_rotation(1.1),
            SphereMap::Identity { n: 2 },
        ];
        let mut rng = Substream::new(5, 1);
        for h in maps {
            let g = RadialLift::new(h);
            let mut worst = 0.0f64;
            for _ in 0..10_000 {
                let (a, b) = rng.normal_pair();
                let scale = 10f64.powf(4.0 * rng.uniform() - 2.0);
                let x = [a * scale, b * scale];
                let mut out = [0.0; 2];
                g.eval_into(&x, &mut out);
                let nx = norm(&x);
                worst = worst.max((norm(&out) - nx).abs() / (1.0 + nx));
            }
            assert!(worst <= 1e-12, "worst relative norm defect {worst}");
        }
    }

    proptest! {
        #[test]
        fn sphere_maps_keep_unit_length(theta in 0.0f64..std::f64::consts::TAU, k in 1i32..7) {
            let u = [theta.cos(), theta.sin()];
            let mut out = [0.0; 2];
            SphereMap::angle_multiply(k).unwrap().apply(&u, &mut out);
            prop_assert!((norm(&out) - 1.0).abs() <= 1e-12);
            SphereMap::angle_multiply(-k).unwrap().apply(&u, &mut out);
            prop_assert!((norm(&out) - 1.0).abs() <= 1e-12);
        }
    }
}
