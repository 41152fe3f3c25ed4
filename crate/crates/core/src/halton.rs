//! Halton point sets on the unit cube.
//!
//! The grid is the discrete reference measure that rank maps transport onto:
//! point `i` is the radical inverse of `start_index + i` in the first `d`
//! prime bases.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Largest dimension supported by the prime table.
pub const MAX_DIMENSION: usize = 512;

/// Default index offset. Index 0 maps to the origin in every base.
pub const DEFAULT_START_INDEX: u64 = 1;

/// An `m × d` Halton point set.
#[derive(Debug, Clone, PartialEq)]
pub struct HaltonGrid {
    pub points: Array2<f64>,
    pub bases: Vec<u64>,
    pub start_index: u64,
}

impl HaltonGrid {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Column-wise mean of the grid.
    pub fn centroid(&self) -> Vec<f64> {
        let m = self.len() as f64;
        (0..self.dim())
            .map(|j| self.points.column(j).iter().sum::<f64>() / m)
            .collect()
    }
}

/// First `count` primes.
pub fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while out.len() < count {
        if out
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| candidate % p != 0)
        {
            out.push(candidate);
        }
        candidate += 1;
    }
    out
}

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    value
}

/// Generates `m` Halton points in dimension `d`, starting at `start_index`.
pub fn generate(m: usize, d: usize, start_index: u64) -> Result<HaltonGrid> {
    if d > MAX_DIMENSION {
        return Err(Error::UnsupportedDimension {
            requested: d,
            max: MAX_DIMENSION,
        });
    }
    if m == 0 || d == 0 {
        return Err(Error::InvalidInput(format!(
            "Halton grid needs m >= 1 and d >= 1, got m={m}, d={d}"
        )));
    }
    let bases = primes(d);
    let points = Array2::from_shape_fn((m, d), |(i, j)| {
        radical_inverse(start_index + i as u64, bases[j])
    });
    Ok(HaltonGrid {
        points,
        bases,
        start_index,
    })
}
