//! Ensemble file formats.
//!
//! Binary layout (all little endian): a header of four `u64` words
//! `N, K+1, d, seed`, then `K+1` `f64` times, `d` `f64` origin coordinates
//! and finally the `N × (K+1) × d` values in path, time, coordinate order.
//!
//! CSV layout: `path,time_index,time,x1,…,xd`, one row per path and time.

use std::io::{Read, Write};

use ndarray::{Array1, Array3};

use super::{PathEnsemble, TimeGrid};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn write_binary<T: Real, W: Write>(ensemble: &PathEnsemble<T>, mut out: W) -> Result<()> {
    let (n, k1, d) = ensemble.paths().dim();
    for word in [n as u64, k1 as u64, d as u64, ensemble.seed()] {
        out.write_all(&word.to_le_bytes())?;
    }
    let floats = ensemble
        .grid()
        .times()
        .iter()
        .chain(ensemble.origin().iter())
        .chain(ensemble.paths().iter());
    for v in floats {
        out.write_all(&v.to_f64_lossy().to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<PathEnsemble<f64>> {
    let n = read_u64(&mut input)? as usize;
    let k1 = read_u64(&mut input)? as usize;
    let d = read_u64(&mut input)? as usize;
    let seed = read_u64(&mut input)?;
    let total = n
        .checked_mul(k1)
        .and_then(|v| v.checked_mul(d))
        .ok_or_else(|| Error::InvalidEnsemble("header sizes overflow".into()))?;
    let grid = TimeGrid::new(read_f64s(&mut input, k1)?)?;
    let origin = Array1::from(read_f64s(&mut input, d)?);
    let values = read_f64s(&mut input, total)?;
    let paths = Array3::from_shape_vec((n, k1, d), values)
        .map_err(|e| Error::InvalidEnsemble(e.to_string()))?;
    PathEnsemble::from_parts(grid, paths, seed, origin)
}

pub fn write_csv<T: Real, W: Write>(ensemble: &PathEnsemble<T>, mut out: W) -> Result<()> {
    let d = ensemble.dim();
    write!(out, "path,time_index,time")?;
    for c in 1..=d {
        write!(out, ",x{c}")?;
    }
    writeln!(out)?;
    let times = ensemble.grid().times();
    for (p, path) in ensemble.paths().outer_iter().enumerate() {
        for (i, row) in path.outer_iter().enumerate() {
            write!(out, "{p},{i},{}", times[i].to_f64_lossy())?;
            for v in row.iter() {
                write!(out, ",{}", v.to_f64_lossy())?;
            }
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{sample_paths, GaussianLaw};
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn csv_layout() {
        let grid = TimeGrid::new(vec![0.0, 0.5]).unwrap();
        let paths = Array3::from_shape_vec((1, 2, 2), vec![0.0, 0.0, 1.5, -2.0]).unwrap();
        let e = PathEnsemble::from_parts(grid, paths, 0, array![0.0, 0.0]).unwrap();
        let mut buf = Vec::new();
        write_csv(&e, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "path,time_index,time,x1,x2\n0,0,0,0,0\n0,1,0.5,1.5,-2\n"
        );
    }

    #[test]
    fn header_words() {
        let grid = TimeGrid::uniform(1.0, 3).unwrap();
        let e = sample_paths(&GaussianLaw::<f64>::standard(2), &grid, 5, &array![0.0, 0.0], 77).unwrap();
        let mut buf = Vec::new();
        write_binary(&e, &mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 8 * (4 + 2 + 5 * 4 * 2));
        assert_eq!(u64::from_le_bytes(buf[0..8].try_into().unwrap()), 5);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[24..32].try_into().unwrap()), 77);
        assert!(read_binary(&buf[..buf.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn binary_round_trip(n in 1usize..8, steps in 1usize..6, d in 1usize..4, seed in any::<u64>()) {
            let grid = TimeGrid::uniform(2.0, steps).unwrap();
            let origin = Array1::from_shape_fn(d, |i| i as f64 - 0.5);
            let e = sample_paths(&GaussianLaw::<f64>::standard(d), &grid, n, &origin, seed).unwrap();
            let mut buf = Vec::new();
            write_binary(&e, &mut buf).unwrap();
            prop_assert_eq!(read_binary(buf.as_slice()).unwrap(), e);
        }
    }
}
