use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `f(x) = P x + q` with `P` of shape `m × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTransform<T: Real> {
    p: Array2<T>,
    q: Array1<T>,
}

impl<T: Real> AffineTransform<T> {
    pub fn new(p: Array2<T>, q: Array1<T>) -> Result<Self> {
        if p.nrows() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: p.nrows(),
                found: q.len(),
            });
        }
        if p.nrows() == 0 || p.ncols() == 0 {
            return Err(Error::InvalidTransform("affine map needs m, n >= 1".into()));
        }
        Ok(Self { p, q })
    }

    /// Scalar field `⟨p, x⟩ + q`.
    pub fn scalar(p: Array1<T>, q: T) -> Result<Self> {
        let n = p.len();
        Self::new(p.into_shape_with_order((1, n)).expect("row vector"), Array1::from_elem(1, q))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            p: Array2::eye(n),
            q: Array1::zeros(n),
        }
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.p
    }

    pub fn offset(&self) -> &Array1<T> {
        &self.q
    }

    pub fn input_dim(&self) -> usize {
        self.p.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.p.nrows()
    }

    #[inline]
    pub fn eval_into(&self, x: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = self.q[i];
            for (j, &xj) in x.iter().enumerate() {
                s += self.p[[i, j]] * xj;
            }
            *o = s;
        }
    }

    /// `self ∘ inner`, i.e. `x ↦ P (P' x + q') + q`.
    pub fn compose(&self, inner: &AffineTransform<T>) -> Result<Self> {
        if self.input_dim() != inner.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: inner.output_dim(),
            });
        }
        Ok(Self {
            p: self.p.dot(&inner.p),
            q: self.p.dot(&inner.q) + &self.q,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn evaluation_at_zero_is_offset() {
        let f = AffineTransform::new(array![[2.0, 0.0], [1.0, 1.0]], array![3.0, -1.0]).unwrap();
        let mut out = [0.0; 2];
        f.eval_into(&[0.0, 0.0], &mut out);
        assert_eq!(out, [3.0, -1.0]);
        f.eval_into(&[1.0, 2.0], &mut out);
        assert_eq!(out, [5.0, 2.0]);
    }

    #[test]
    fn shape_checks() {
        assert!(AffineTransform::new(array![[1.0, 2.0]], array![0.0, 1.0]).is_err());
        let f = AffineTransform::new(array![[1.0, 2.0]], array![0.0]).unwrap();
        let g = AffineTransform::new(array![[1.0, 2.0]], array![0.0]).unwrap();
        assert!(f.compose(&g).is_err());
    }

    proptest! {
        #[test]
        fn exact_linearity(p in proptest::collection::vec(-4.0f64..4.0, 6), q in proptest::collection::vec(-4.0f64..4.0, 2),
                           x in proptest::collection::vec(-10.0f64..10.0, 3), y in proptest::collection::vec(-10.0f64..10.0, 3)) {
            let f = AffineTransform::new(Array2::from_shape_vec((2, 3), p).unwrap(), Array1::from(q)).unwrap();
            let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let (mut fxy, mut fx, mut fy, mut f0) = ([0.0; 2], [0.0; 2], [0.0; 2], [0.0; 2]);
            f.eval_into(&xy, &mut fxy);
            f.eval_into(&x, &mut fx);
            f.eval_into(&y, &mut fy);
            f.eval_into(&[0.0; 3], &mut f0);
            for i in 0..2 {
                let defect = fxy[i] - fx[i] - fy[i] + f0[i];
                let scale = 1.0 + fxy[i].abs() + fx[i].abs() + fy[i].abs();
                prop_assert!(defect.abs() <= 1e-14 * scale);
            }
        }

        #[test]
        fn composition_closure(a in proptest::collection::vec(-3.0f64..3.0, 4), b in proptest::collection::vec(-3.0f64..3.0, 4),
                               qa in proptest::collection::vec(-3.0f64..3.0, 2), qb in proptest::collection::vec(-3.0f64..3.0, 2),
                               x in proptest::collection::vec(-5.0f64..5.0, 2)) {
            let outer = AffineTransform::new(Array2::from_shape_vec((2, 2), a).unwrap(), Array1::from(qa)).unwrap();
            let inner = AffineTransform::new(Array2::from_shape_vec((2, 2), b).unwrap(), Array1::from(qb)).unwrap();
            let composed = outer.compose(&inner).unwrap();
            let (mut mid, mut two_step, mut one_step) = ([0.0; 2], [0.0; 2], [0.0; 2]);
            inner.eval_into(&x, &mut mid);
            outer.eval_into(&mid, &mut two_step);
            composed.eval_into(&x, &mut one_step);
            for i in 0..2 {
                prop_assert!((two_step[i] - one_step[i]).abs() <= 1e-12 * (1.0 + two_step[i].abs()));
            }
        }
    }
}
