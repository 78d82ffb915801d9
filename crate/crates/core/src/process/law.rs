use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, cholesky, cholesky_semidefinite, max_asymmetry};
use crate::scalar::Real;

/// Law of an n-dimensional Brownian motion: drift `b` and covariance `A`
/// per unit time.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLaw<T: Real> {
    drift: Array1<T>,
    covariance: Array2<T>,
    non_singular: bool,
}

impl<T: Real> GaussianLaw<T> {
    /// Validates shape, exact symmetry and non-negative definiteness of `A`.
    pub fn new(drift: Array1<T>, covariance: Array2<T>) -> Result<Self> {
        let n = drift.len();
        if n == 0 {
            return Err(Error::InvalidLaw("dimension must be positive".into()));
        }
        if covariance.dim() != (n, n) {
            return Err(Error::InvalidLaw(format!(
                "covariance has shape {:?}, expected ({n}, {n})",
                covariance.dim()
            )));
        }
        if drift.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidLaw("non-finite parameter".into()));
        }
        if max_asymmetry(covariance.view()) > T::zero() {
            return Err(Error::InvalidLaw("covariance is not symmetric".into()));
        }
        cholesky_semidefinite(covariance.view())?;
        let non_singular = cholesky(covariance.view()).is_ok();
        Ok(Self {
            drift,
            covariance,
            non_singular,
        })
    }

    /// Standard Brownian law: zero drift, identity covariance.
    pub fn standard(n: usize) -> Self {
        Self {
            drift: Array1::zeros(n),
            covariance: Array2::eye(n),
            non_singular: n > 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn drift(&self) -> &Array1<T> {
        &self.drift
    }

    pub fn covariance(&self) -> &Array2<T> {
        &self.covariance
    }

    pub fn is_non_singular(&self) -> bool {
        self.non_singular
    }

    pub fn require_non_singular(&self) -> Result<()> {
        if self.non_singular {
            Ok(())
        } else {
            Err(Error::SingularCovariance {
                det: linalg::det(self.covariance.view()).to_f64_lossy(),
            })
        }
    }

    /// Cholesky factor of `A`; fails for singular covariance.
    pub fn cholesky_factor(&self) -> Result<Array2<T>> {
        cholesky(self.covariance.view())
    }

    /// A square root `L` of `A` (`L Lᵀ = A`), also for singular `A`.
    pub fn root(&self) -> Result<Array2<T>> {
        if self.non_singular {
            cholesky(self.covariance.view())
        } else {
            cholesky_semidefinite(self.covariance.view())
        }
    }
}

/// Strictly increasing observation times starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T: Real> {
    times: Vec<T>,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(times: Vec<T>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidGrid("need at least two time points".into()));
        }
        if times[0] != T::zero() {
            return Err(Error::InvalidGrid("first time must be 0".into()));
        }
        if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "times must be finite and strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { times })
    }

    /// `steps + 1` equally spaced points on `[0, horizon]`.
    pub fn uniform(horizon: T, steps: usize) -> Result<Self> {
        if steps == 0 || !(horizon > T::zero()) {
            return Err(Error::InvalidGrid(
                "uniform grid needs steps >= 1 and a positive horizon".into(),
            ));
        }
        let dt = horizon / T::lit(steps as f64);
        let mut times: Vec<T> = (0..=steps).map(|i| dt * T::lit(i as f64)).collect();
        times[steps] = horizon;
        Self::new(times)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    /// Number of points, `K + 1`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of steps `K`.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> T {
        self.times[self.times.len() - 1]
    }

    /// Index of the grid point equal to `t` up to a relative tolerance of `1e-9`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * (1.0 + t.abs());
        let pos = self
            .times
            .partition_point(|&s| s.to_f64_lossy() < t - tol);
        match self.times.get(pos) {
            Some(&s) if (s.to_f64_lossy() - t).abs() <= tol => Ok(pos),
            _ => Err(Error::WindowNotOnGrid { time: t }),
        }
    }
}
