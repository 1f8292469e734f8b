//! Uniform tensor grids on the periodic box `[-L, L]^d`.

use crate::{Error, Result};
use std::f64::consts::PI;

/// A uniform grid on `[-L_1, L_1] x ... x [-L_d, L_d]` with `N_i` points per
/// axis and periodic wrap-around. Mesh size per axis is `h_i = 2 L_i / N_i`
/// and the grid points are `x_m = -L + m h`, `m = 0..N-1`.
///
/// Data on the grid is stored with the first axis fastest, i.e. the flat
/// index of `(m_0, m_1[, m_2])` is `m_0 + N_0 (m_1 + N_1 m_2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    half_width: Vec<f64>,
    points: Vec<usize>,
}

impl GridSpec {
    /// Build a grid, validating dimension (2 or 3), positive half-widths and
    /// even point counts of at least 4 per axis.
    pub fn new(dim: usize, half_width: &[f64], points: &[usize]) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidArgument(format!(
                "grid dimension must be 2 or 3, got {dim}"
            )));
        }
        if half_width.len() != dim || points.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "expected {dim} half-widths and point counts, got {} and {}",
                half_width.len(),
                points.len()
            )));
        }
        for &l in half_width {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "half-width must be positive and finite, got {l}"
                )));
            }
        }
        for &n in points {
            if n < 4 || n % 2 != 0 {
                return Err(Error::InvalidArgument(format!(
                    "points per axis must be even and >= 4, got {n}"
                )));
            }
        }
        Ok(Self {
            half_width: half_width.to_vec(),
            points: points.to_vec(),
        })
    }

    pub fn square(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        Self::new(dim, &vec![half_width; dim], &vec![points; dim])
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn half_width(&self) -> &[f64] {
        &self.half_width
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    /// Mesh size per axis, `h = 2 L / N`.
    pub fn mesh(&self) -> Vec<f64> {
        self.half_width
            .iter()
            .zip(&self.points)
            .map(|(&l, &n)| 2.0 * l / n as f64)
            .collect()
    }

    /// Quadrature weight of one grid cell, `prod_i h_i`.
    pub fn cell_volume(&self) -> f64 {
        self.mesh().iter().product()
    }

    pub fn total_points(&self) -> usize {
        self.points.iter().product()
    }

    /// Physical coordinates along one axis: `x_m = -L + m h`.
    pub fn coords(&self, axis: usize) -> Vec<f64> {
        let l = self.half_width[axis];
        let h = 2.0 * l / self.points[axis] as f64;
        (0..self.points[axis]).map(|m| -l + m as f64 * h).collect()
    }

    /// Wavenumbers along one axis in FFT storage order: `v_p = pi p / L` with
    /// `p` running over `0..N/2-1` then `-N/2..-1`. The mode at index `N/2`
    /// keeps its signed value `-pi N / (2 L)`.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.points[axis];
        let scale = PI / self.half_width[axis];
        (0..n)
            .map(|k| {
                let p = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
                scale * p as f64
            })
            .collect()
    }

    /// Cache key with the half-widths compared bitwise.
    pub(crate) fn key(&self) -> (Vec<u64>, Vec<usize>) {
        (
            self.half_width.iter().map(|l| l.to_bits()).collect(),
            self.points.clone(),
        )
    }
}

/// Build a grid; thin wrapper kept for symmetry with the other operations.
pub fn make_grid(dim: usize, half_width: &[f64], points: &[usize]) -> Result<GridSpec> {
    GridSpec::new(dim, half_width, points)
}
