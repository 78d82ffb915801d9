//! Scalar fields with closed-form derivatives: the planar harmonic gallery,
//! polynomials and one non-polynomial harmonic field.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Real or imaginary part of `(x₁ + i x₂)^k`, `k ≥ 1`. Harmonic on ℝ².
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarmonicField {
    RePower(u32),
    ImPower(u32),
}

/// `(x₁ + i x₂)^k` as `(re, im)`.
#[inline]
fn complex_power<T: Real>(x1: T, x2: T, k: u32) -> (T, T) {
    let (mut re, mut im) = (T::one(), T::zero());
    for _ in 0..k {
        let next_re = re * x1 - im * x2;
        im = re * x2 + im * x1;
        re = next_re;
    }
    (re, im)
}

impl HarmonicField {
    pub fn new_re(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidTransform("harmonic power must be >= 1".into()));
        }
        Ok(HarmonicField::RePower(k))
    }

    pub fn new_im(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidTransform("harmonic power must be >= 1".into()));
        }
        Ok(HarmonicField::ImPower(k))
    }

    pub fn power(&self) -> u32 {
        match *self {
            HarmonicField::RePower(k) | HarmonicField::ImPower(k) => k,
        }
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> T {
        let (re, im) = complex_power(x[0], x[1], self.power());
        match self {
            HarmonicField::RePower(_) => re,
            HarmonicField::ImPower(_) => im,
        }
    }

    /// From `d/dz z^k = k z^{k-1}` and the Cauchy–Riemann equations.
    pub fn gradient<T: Real>(&self, x: &[T], out: &mut [T]) {
        let k = self.power();
        let kk = T::lit(k as f64);
        let (re, im) = complex_power(x[0], x[1], k - 1);
        match self {
            HarmonicField::RePower(_) => {
                out[0] = kk * re;
                out[1] = -kk * im;
            }
            HarmonicField::ImPower(_) => {
                out[0] = kk * im;
                out[1] = kk * re;
            }
        }
    }
}

impl fmt::Display for HarmonicField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarmonicField::RePower(k) => write!(f, "re_z^{k}"),
            HarmonicField::ImPower(k) => write!(f, "im_z^{k}"),
        }
    }
}

/// `c · ∏ x_i^{e_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial<T: Real> {
    pub coefficient: T,
    pub exponents: Vec<u32>,
}

/// Polynomial scalar field on ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T: Real> {
    dim: usize,
    terms: Vec<Monomial<T>>,
}

impl<T: Real> Polynomial<T> {
    pub fn new(dim: usize, terms: Vec<Monomial<T>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidTransform("polynomial dimension must be >= 1".into()));
        }
        if let Some(t) = terms.iter().find(|t| t.exponents.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: t.exponents.len(),
            });
        }
        Ok(Self { dim, terms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Monomial<T>] {
        &self.terms
    }

    fn monomial(x: &[T], exps: &[u32], skip: Option<(usize, u32)>) -> T {
        x.iter()
            .zip(exps)
            .enumerate()
            .map(|(i, (&xi, &e))| {
                let e = match skip {
                    Some((j, lower)) if j == i => e - lower,
                    _ => e,
                };
                xi.powi(e as i32)
            })
            .fold(T::one(), |acc, v| acc * v)
    }

    pub fn eval(&self, x: &[T]) -> T {
        self.terms
            .iter()
            .map(|t| t.coefficient * Self::monomial(x, &t.exponents, None))
            .sum()
    }

    pub fn gradient(&self, x: &[T], out: &mut [T]) {
        for (i, g) in out.iter_mut().enumerate() {
            *g = self
                .terms
                .iter()
                .filter(|t| t.exponents[i] >= 1)
                .map(|t| {
                    t.coefficient
                        * T::lit(t.exponents[i] as f64)
                        * Self::monomial(x, &t.exponents, Some((i, 1)))
                })
                .sum();
        }
    }

    pub fn laplacian(&self, x: &[T]) -> T {
        (0..self.dim)
            .map(|i| {
                self.terms
                    .iter()
                    .filter(|t| t.exponents[i] >= 2)
                    .map(|t| {
                        let e = t.exponents[i] as f64;
                        t.coefficient * T::lit(e * (e - 1.0)) * Self::monomial(x, &t.exponents, Some((i, 2)))
                    })
                    .sum::<T>()
            })
            .sum()
    }
}

impl<T: Real> fmt::Display for Polynomial<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, t) in self.terms.iter().enumerate() {
            let c = t.coefficient;
            if n > 0 {
                write!(f, " {} ", if c < T::zero() { '-' } else { '+' })?;
            } else if c < T::zero() {
                write!(f, "-")?;
            }
            write!(f, "{}", c.abs())?;
            for (i, &e) in t.exponents.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*x{}", i + 1)?,
                    _ => write!(f, "*x{}^{}", i + 1, e)?,
                }
            }
        }
        Ok(())
    }
}

/// `e^{x₁} sin x₂`, the imaginary part of `e^z`: harmonic but not polynomial.
pub fn exp_sin<T: Real>(x: &[T]) -> T {
    x[0].exp() * x[1].sin()
}

pub fn exp_sin_gradient<T: Real>(x: &[T], out: &mut [T]) {
    let e = x[0].exp();
    let (s, c) = x[1].sin_cos();
    out[0] = e * s;
    out[1] = e * c;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn re_z_squared() {
        let u = HarmonicField::RePower(2);
        assert_eq!(u.eval(&[3.0, 1.0]), 8.0);
        let mut g = [0.0; 2];
        u.gradient(&[1.0, 0.0], &mut g);
        assert_eq!(g, [2.0, 0.0]);
        u.gradient(&[0.5, -2.0], &mut g);
        assert_eq!(g, [1.0, 4.0]);
    }

    #[test]
    fn im_z_cubed() {
        // Im (x + iy)^3 = 3x²y − y³
        let u = HarmonicField::ImPower(3);
        let (x, y): (f64, f64) = (0.7, -1.3);
        assert!((u.eval(&[x, y]) - (3.0 * x * x * y - y * y * y)).abs() < 1e-14);
        let mut g = [0.0; 2];
        u.gradient(&[x, y], &mut g);
        assert!((g[0] - 6.0 * x * y).abs() < 1e-14);
        assert!((g[1] - (3.0 * x * x - 3.0 * y * y)).abs() < 1e-14);
    }

    #[test]
    fn polynomial_derivatives() {
        // x1^2 − x2^2 + 3 x1 x2^3
        let p = Polynomial::new(
            2,
            vec![
                Monomial { coefficient: 1.0, exponents: vec![2, 0] },
                Monomial { coefficient: -1.0, exponents: vec![0, 2] },
                Monomial { coefficient: 3.0, exponents: vec![1, 3] },
            ],
        )
        .unwrap();
        let x: [f64; 2] = [1.5, -0.5];
        assert!((p.eval(&x) - (2.25 - 0.25 + 3.0 * 1.5 * -0.125)).abs() < 1e-14);
        let mut g = [0.0; 2];
        p.gradient(&x, &mut g);
        assert!((g[0] - (3.0 + 3.0 * -0.125)).abs() < 1e-14);
        assert!((g[1] - (1.0 + 9.0 * 1.5 * 0.25)).abs() < 1e-14);
        assert!((p.laplacian(&x) - (2.0 - 2.0 + 18.0 * 1.5 * -0.5)).abs() < 1e-14);
        assert_eq!(p.to_string(), "1*x1^2 - 1*x2^2 + 3*x1*x2^3");
    }

    #[test]
    fn coordinate_square_laplacian_is_two() {
        let p = Polynomial::new(2, vec![Monomial { coefficient: 1.0, exponents: vec![2, 0] }]).unwrap();
        for x in [[0.0, 0.0], [1.0, -3.0], [-2.5, 7.0]] {
            assert_eq!(p.laplacian(&x), 2.0);
        }
    }
}
