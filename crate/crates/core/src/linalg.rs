//! Small dense linear algebra on `ndarray` matrices: Cholesky factorization
//! and the triangular solves built on it.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative pivot tolerance: pivots at or below `PIVOT_RTOL * max|A_ii|` are rejected.
pub const PIVOT_RTOL: f64 = 1e-10;

pub fn max_asymmetry<T: Real>(a: ArrayView2<T>) -> T {
    let n = a.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    worst
}

/// Lower-triangular `L` with `L Lᵀ = A`.
///
/// Fails with [`Error::NotPositiveDefinite`] when a pivot drops to
/// `1e-10 · max diagonal entry` or below, which catches singular and
/// indefinite input alike.
pub fn cholesky<T: Real>(a: ArrayView2<T>) -> Result<Array2<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    if max_asymmetry(a) > T::zero() {
        return Err(Error::InvalidArgument(
            "cholesky requires a symmetric matrix".into(),
        ));
    }
    let max_diag = (0..n).map(|i| a[[i, i]].abs()).fold(T::zero(), T::max);
    let tolerance = T::lit(PIVOT_RTOL) * max_diag;

    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut pivot = a[[j, j]];
        for k in 0..j {
            pivot -= l[[j, k]] * l[[j, k]];
        }
        if !(pivot > tolerance) {
            return Err(Error::NotPositiveDefinite {
                index: j,
                pivot: pivot.to_f64_lossy(),
                tolerance: tolerance.to_f64_lossy(),
            });
        }
        let diag = pivot.sqrt();
        l[[j, j]] = diag;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / diag;
        }
    }
    Ok(l)
}

/// Square root of a non-negative definite matrix, tolerating zero pivots.
///
/// Columns whose pivot falls within the tolerance are set to zero, so the
/// result satisfies `L Lᵀ = A` for singular but non-negative definite `A`.
/// A pivot below `-tolerance` means `A` is indefinite.
pub fn cholesky_semidefinite<T: Real>(a: ArrayView2<T>) -> Result<Array2<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    let max_diag = (0..n).map(|i| a[[i, i]].abs()).fold(T::zero(), T::max);
    let tolerance = T::lit(PIVOT_RTOL) * max_diag.max(T::min_positive_value());

    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut pivot = a[[j, j]];
        for k in 0..j {
            pivot -= l[[j, k]] * l[[j, k]];
        }
        if pivot < -tolerance {
            return Err(Error::NotPositiveDefinite {
                index: j,
                pivot: pivot.to_f64_lossy(),
                tolerance: -tolerance.to_f64_lossy(),
            });
        }
        if pivot <= tolerance {
            for i in (j + 1)..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                if s.abs() > tolerance.sqrt() * max_diag.sqrt() {
                    return Err(Error::NotPositiveDefinite {
                        index: j,
                        pivot: pivot.to_f64_lossy(),
                        tolerance: tolerance.to_f64_lossy(),
                    });
                }
            }
            continue;
        }
        let diag = pivot.sqrt();
        l[[j, j]] = diag;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / diag;
        }
    }
    Ok(l)
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower<T: Real>(l: ArrayView2<T>, b: ArrayView1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut x = Array1::<T>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_lower_transposed<T: Real>(l: ArrayView2<T>, b: ArrayView1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut x = Array1::<T>::zeros(n);
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solves `A x = b` given the Cholesky factor of `A`.
pub fn cholesky_solve<T: Real>(l: ArrayView2<T>, b: ArrayView1<T>) -> Array1<T> {
    let y = solve_lower(l, b);
    solve_lower_transposed(l, y.view())
}

/// `A⁻¹` from the Cholesky factor of `A`.
pub fn cholesky_inverse<T: Real>(l: ArrayView2<T>) -> Array2<T> {
    let n = l.nrows();
    let mut inv = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut e = Array1::<T>::zeros(n);
        e[j] = T::one();
        inv.column_mut(j).assign(&cholesky_solve(l, e.view()));
    }
    inv
}

/// `det(A) = ∏ L_ii²`.
pub fn cholesky_det<T: Real>(l: ArrayView2<T>) -> T {
    l.diag().iter().fold(T::one(), |acc, &d| acc * d * d)
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det<T: Real>(a: ArrayView2<T>) -> T {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut det = T::one();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[[i, c]].abs().partial_cmp(&m[[j, c]].abs()).unwrap())
            .unwrap();
        if m[[p, c]] == T::zero() {
            return T::zero();
        }
        if p != c {
            for k in 0..n {
                m.swap([p, k], [c, k]);
            }
            det = -det;
        }
        det *= m[[c, c]];
        for r in (c + 1)..n {
            let f = m[[r, c]] / m[[c, c]];
            for k in c..n {
                let v = m[[c, k]];
                m[[r, k]] -= f * v;
            }
        }
    }
    det
}

/// `y = A x` written into a slice, for hot loops.
#[inline]
pub fn mat_vec_into<T: Real>(a: ArrayView2<T>, x: &[T], y: &mut [T]) {
    for (i, yi) in y.iter_mut().enumerate() {
        let mut s = T::zero();
        for (j, &xj) in x.iter().enumerate() {
            s += a[[i, j]] * xj;
        }
        *yi = s;
    }
}
