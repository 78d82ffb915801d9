use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of grid nodes a domain may enumerate.
pub const MAX_GRID_POINTS: usize = 20_000_000;

/// Shape selecting grid nodes inside the bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Mask {
    /// Every node of the box.
    Box,
    Ball { center: Vec<f64>, radius: f64 },
    Annulus { center: Vec<f64>, inner: f64, outer: f64 },
}

impl Mask {
    fn contains(&self, x: &[f64]) -> bool {
        let dist = |c: &[f64]| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        match self {
            Mask::Box => true,
            Mask::Ball { center, radius } => dist(center) < *radius,
            Mask::Annulus { center, inner, outer } => {
                let r = dist(center);
                *inner < r && r < *outer
            }
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGrid(m));
        match self {
            Mask::Box => Ok(()),
            Mask::Ball { center, radius } => {
                if center.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: center.len() });
                }
                if !(*radius > 0.0) {
                    return bad(format!("ball radius must be positive, got {radius}"));
                }
                Ok(())
            }
            Mask::Annulus { center, inner, outer } => {
                if center.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: center.len() });
                }
                if !(*inner >= 0.0 && inner < outer) {
                    return bad(format!("annulus radii must satisfy 0 ≤ inner < outer, got {inner}, {outer}"));
                }
                Ok(())
            }
        }
    }
}

/// Masked nodes of a uniform grid over a box, connected under axis-neighbour adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
    h: f64,
    mask: Mask,
    points: Vec<Vec<f64>>,
}

impl GridDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, h: f64, mask: Mask) -> Result<Self> {
        let n = lo.len();
        if n == 0 || hi.len() != n {
            return Err(Error::InvalidGrid("box bounds must be non-empty and of equal length".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidGrid("each axis needs lo < hi".into()));
        }
        mask.validate(n)?;
        // Nodes lo + i·h up to hi, tolerating rounding in (hi − lo)/h.
        let counts: Vec<usize> = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| ((b - a) / h + 1e-9).floor() as usize + 1)
            .collect();
        let total = counts.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c));
        match total {
            Some(t) if t <= MAX_GRID_POINTS => {}
            _ => return Err(Error::InvalidGrid(format!("grid has more than {MAX_GRID_POINTS} nodes"))),
        }
        let total = total.unwrap_or(0);

        let mut inside = vec![false; total];
        let mut coord = vec![0.0; n];
        for (flat, flag) in inside.iter_mut().enumerate() {
            let mut rem = flat;
            for k in (0..n).rev() {
                coord[k] = lo[k] + (rem % counts[k]) as f64 * h;
                rem /= counts[k];
            }
            *flag = mask.contains(&coord);
        }
        let components = count_components(&inside, &counts);
        if components == 0 {
            return Err(Error::EmptyMask);
        }
        if components > 1 {
            return Err(Error::DisconnectedMask { components });
        }
        let points = inside
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(flat, _)| {
                let mut rem = flat;
                let mut x = vec![0.0; n];
                for k in (0..n).rev() {
                    x[k] = lo[k] + (rem % counts[k]) as f64 * h;
                    rem /= counts[k];
                }
                x
            })
            .collect();
        Ok(Self { lo, hi, h, mask, points })
    }

    /// `[−1, 1]ⁿ` with every node selected.
    pub fn cube(n: usize, h: f64) -> Result<Self> {
        Self::new(vec![-1.0; n], vec![1.0; n], h, Mask::Box)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }
}

/// Connected components of the flagged nodes (row-major, last axis fastest).
fn count_components(inside: &[bool], counts: &[usize]) -> usize {
    let n = counts.len();
    let mut strides = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * counts[k + 1];
    }
    let mut seen = vec![false; inside.len()];
    let mut queue = VecDeque::new();
    let mut components = 0;
    for start in 0..inside.len() {
        if !inside[start] || seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(cur) = queue.pop_front() {
            for k in 0..n {
                let idx = (cur / strides[k]) % counts[k];
                let mut visit = |nb: usize| {
                    if inside[nb] && !seen[nb] {
                        seen[nb] = true;
                        queue.push_back(nb);
                    }
                };
                if idx > 0 {
                    visit(cur - strides[k]);
                }
                if idx + 1 < counts[k] {
                    visit(cur + strides[k]);
                }
            }
        }
    }
    components
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_node_count() {
        let d = GridDomain::cube(2, 0.05).unwrap();
        assert_eq!(d.points().len(), 41 * 41);
        assert_eq!(d.points()[0], vec![-1.0, -1.0]);
        let last = d.points().last().unwrap();
        assert!((last[0] - 1.0).abs() < 1e-12 && (last[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ball_and_annulus_are_connected() {
        let ball = Mask::Ball { center: vec![0.0, 0.0], radius: 0.9 };
        let d = GridDomain::new(vec![-1.0; 2], vec![1.0; 2], 0.1, ball).unwrap();
        assert!(d.points().iter().all(|p| p[0].hypot(p[1]) < 0.9));
        let ring = Mask::Annulus { center: vec![0.0, 0.0], inner: 0.4, outer: 0.9 };
        assert!(GridDomain::new(vec![-1.0; 2], vec![1.0; 2], 0.1, ring).is_ok());
    }

    #[test]
    fn thin_ring_is_disconnected() {
        // A ring thinner than the spacing leaves isolated nodes.
        let ring = Mask::Annulus { center: vec![0.0, 0.0], inner: 0.69, outer: 0.71 };
        let err = GridDomain::new(vec![-1.0; 2], vec![1.0; 2], 0.1, ring).unwrap_err();
        assert!(matches!(err, Error::DisconnectedMask { components } if components > 1), "{err:?}");
    }

    #[test]
    fn empty_and_invalid() {
        let tiny = Mask::Ball { center: vec![0.05, 0.05], radius: 0.01 };
        assert!(matches!(
            GridDomain::new(vec![-1.0; 2], vec![1.0; 2], 0.1, tiny),
            Err(Error::EmptyMask)
        ));
        assert!(GridDomain::cube(2, 0.0).is_err());
        assert!(GridDomain::new(vec![1.0], vec![0.0], 0.1, Mask::Box).is_err());
    }

    #[test]
    fn three_dimensional_flood_fill() {
        let ring = Mask::Annulus { center: vec![0.0; 3], inner: 0.3, outer: 0.8 };
        let d = GridDomain::new(vec![-1.0; 3], vec![1.0; 3], 0.1, ring).unwrap();
        assert!(!d.points().is_empty());
        assert_eq!(d.dim(), 3);
    }
}
