use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};
use rayon::prelude::*;

use super::{GaussianLaw, TimeGrid};
use crate::error::{Error, Result};
use crate::rng::keyed_normals;
use crate::scalar::Real;
use crate::transforms::Transform;

/// `N` sampled paths of a `d`-dimensional process on a shared time grid.
///
/// Values are stored as an `N × (K+1) × d` array.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble<T: Real> {
    grid: TimeGrid<T>,
    paths: Array3<T>,
    seed: u64,
    origin: Array1<T>,
}

impl<T: Real> PathEnsemble<T> {
    /// Assembles an ensemble, checking shape and that every path starts at `origin`.
    pub fn from_parts(grid: TimeGrid<T>, paths: Array3<T>, seed: u64, origin: Array1<T>) -> Result<Self> {
        let (n, k1, d) = paths.dim();
        if n == 0 {
            return Err(Error::InvalidEnsemble("ensemble needs at least one path".into()));
        }
        if k1 != grid.len() {
            return Err(Error::InvalidEnsemble(format!(
                "path length {k1} does not match grid length {}",
                grid.len()
            )));
        }
        if d == 0 || origin.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: origin.len(),
            });
        }
        let start = paths.index_axis(Axis(1), 0);
        if start.rows().into_iter().any(|row| row != origin) {
            return Err(Error::InvalidEnsemble("paths must start at the origin".into()));
        }
        Ok(Self {
            grid,
            paths,
            seed,
            origin,
        })
    }

    pub fn n_paths(&self) -> usize {
        self.paths.dim().0
    }

    pub fn dim(&self) -> usize {
        self.paths.dim().2
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn origin(&self) -> &Array1<T> {
        &self.origin
    }

    pub fn paths(&self) -> &Array3<T> {
        &self.paths
    }

    pub fn into_paths(self) -> Array3<T> {
        self.paths
    }

    /// `N × d` values at grid index `idx`.
    pub fn values_at(&self, idx: usize) -> ArrayView2<'_, T> {
        self.paths.index_axis(Axis(1), idx)
    }

    /// `N × d` values at time `t`, which must be a grid point.
    pub fn values_at_time(&self, t: f64) -> Result<ArrayView2<'_, T>> {
        Ok(self.values_at(self.grid.index_of(t)?))
    }

    /// `X_{t} − X_{s}` for every path, as an `N × d` array.
    pub fn increments(&self, s: f64, t: f64) -> Result<Array2<T>> {
        let i = self.grid.index_of(s)?;
        let j = self.grid.index_of(t)?;
        Ok(&self.values_at(j) - &self.values_at(i))
    }

    /// Applies `f` pointwise at every `(path, time)` index.
    pub fn apply_transform(&self, f: &Transform<T>) -> Result<PathEnsemble<T>> {
        check_transform(f, self.dim())?;
        let (n, k1, _) = self.paths.dim();
        let m = f.output_dim();
        let mut out = Array3::<T>::zeros((n, k1, m));
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(self.paths.axis_iter(Axis(0)).into_par_iter())
            .for_each(|(mut dst, src)| {
                let mut x = vec![T::zero(); src.dim().1];
                let mut y = vec![T::zero(); m];
                for (mut drow, srow) in dst.rows_mut().into_iter().zip(src.rows()) {
                    x.iter_mut().zip(srow.iter()).for_each(|(a, &b)| *a = b);
                    f.eval_into(&x, &mut y);
                    drow.iter_mut().zip(&y).for_each(|(a, &b)| *a = b);
                }
            });
        let origin = Array1::from(f.eval(self.origin.as_slice().expect("contiguous origin"))?);
        Ok(PathEnsemble {
            grid: self.grid.clone(),
            paths: out,
            seed: self.seed,
            origin,
        })
    }

    /// Like [`apply_transform`](Self::apply_transform) but reuses the
    /// storage when input and output dimensions agree.
    pub fn into_transformed(mut self, f: &Transform<T>) -> Result<PathEnsemble<T>> {
        check_transform(f, self.dim())?;
        if f.output_dim() != self.dim() {
            return self.apply_transform(f);
        }
        let d = self.dim();
        self.paths
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .for_each(|mut path| {
                let mut x = vec![T::zero(); d];
                let mut y = vec![T::zero(); d];
                for mut row in path.rows_mut() {
                    x.iter_mut().zip(row.iter()).for_each(|(a, &b)| *a = b);
                    f.eval_into(&x, &mut y);
                    row.iter_mut().zip(&y).for_each(|(a, &b)| *a = b);
                }
            });
        self.origin = Array1::from(f.eval(self.origin.as_slice().expect("contiguous origin"))?);
        Ok(self)
    }
}

fn check_transform<T: Real>(f: &Transform<T>, dim: usize) -> Result<()> {
    if f.input_dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: f.input_dim(),
        });
    }
    if f.evaluation_domain().is_some() {
        return Err(Error::InvalidTransform(
            "restricted fields cannot be applied to unbounded paths".into(),
        ));
    }
    Ok(())
}

/// Simulates `n_paths` paths of the Brownian motion with law `law` on `grid`.
///
/// Each increment over `[t_i, t_{i+1}]` is drawn exactly as
/// `Δt·b + √Δt·L·Z`, where `Z` comes from the counter-based stream keyed by
/// `(seed, path, step)`. The result is bit-identical for any thread count.
pub fn sample_paths<T: Real>(
    law: &GaussianLaw<T>,
    grid: &TimeGrid<T>,
    n_paths: usize,
    origin: &Array1<T>,
    seed: u64,
) -> Result<PathEnsemble<T>> {
    let d = law.dim();
    if n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be at least 1".into()));
    }
    if origin.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: origin.len(),
        });
    }
    let root = law.root()?;
    let drift = law.drift();
    let times = grid.times();
    let steps: Vec<(T, T)> = times
        .windows(2)
        .map(|w| {
            let dt = w[1] - w[0];
            (dt, dt.sqrt())
        })
        .collect();

    let mut paths = Array3::<T>::zeros((n_paths, grid.len(), d));
    paths
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(p, mut path)| {
            let mut z = vec![0.0f64; d];
            let mut zt = vec![T::zero(); d];
            let mut x: Vec<T> = origin.to_vec();
            path.row_mut(0).iter_mut().zip(&x).for_each(|(a, &b)| *a = b);
            for (i, &(dt, sqrt_dt)) in steps.iter().enumerate() {
                keyed_normals(seed, p as u64, i as u32, &mut z);
                zt.iter_mut().zip(&z).for_each(|(a, &b)| *a = T::lit(b));
                for r in 0..d {
                    let mut shock = T::zero();
                    for c in 0..=r {
                        shock += root[[r, c]] * zt[c];
                    }
                    x[r] += dt * drift[r] + sqrt_dt * shock;
                }
                path.row_mut(i + 1).iter_mut().zip(&x).for_each(|(a, &b)| *a = b);
            }
        });
    PathEnsemble::from_parts(grid.clone(), paths, seed, origin.clone())
}
