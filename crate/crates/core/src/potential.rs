//! External trapping potentials sampled on the grid.

use crate::grid::GridSpec;
use crate::spectral::dims3;
use crate::{Error, Result};

/// Trap shapes. The harmonic trap is `V = (1/2) sum_a gamma_a^2 x_a^2`; the
/// harmonic-plus-quartic trap is `V = a2 r^2 + a4 r^4` with `r^2 = x^2 + y^2`
/// (the paper-style planar radius, also in 3D). Tabulated values are accepted
/// from callers that sample their own trap.
#[derive(Debug, Clone, PartialEq)]
pub enum TrapPotential {
    Harmonic { freqs: Vec<f64> },
    HarmonicQuartic { a2: f64, a4: f64 },
    Tabulated { values: Vec<f64> },
}

impl TrapPotential {
    pub fn harmonic_isotropic(dim: usize) -> Self {
        TrapPotential::Harmonic {
            freqs: vec![1.0; dim],
        }
    }

    /// Harmonic trap frequencies, if this is a harmonic trap of the right
    /// dimension.
    pub fn harmonic_freqs(&self, dim: usize) -> Option<&[f64]> {
        match self {
            TrapPotential::Harmonic { freqs } if freqs.len() == dim => Some(freqs),
            _ => None,
        }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        match self {
            TrapPotential::Harmonic { freqs } => {
                if freqs.len() != grid.dim() {
                    return Err(Error::InvalidArgument(format!(
                        "harmonic trap has {} frequencies for a {}-d grid",
                        freqs.len(),
                        grid.dim()
                    )));
                }
                if freqs.iter().any(|g| !(*g > 0.0)) {
                    return Err(Error::InvalidArgument(
                        "harmonic trap frequencies must be positive".into(),
                    ));
                }
            }
            TrapPotential::HarmonicQuartic { a2, a4 } => {
                if !a2.is_finite() || !a4.is_finite() {
                    return Err(Error::InvalidArgument(
                        "quartic trap coefficients must be finite".into(),
                    ));
                }
            }
            TrapPotential::Tabulated { values } => {
                if values.len() != grid.total_points() {
                    return Err(Error::InvalidArgument(format!(
                        "tabulated trap has {} values, grid has {} points",
                        values.len(),
                        grid.total_points()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "tabulated trap values must be finite".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// True when `V(x) = V(|x|)` in the plane, which is what the rotation
    /// diagnostics require.
    pub fn is_radially_symmetric(&self) -> bool {
        match self {
            TrapPotential::Harmonic { freqs } => {
                freqs.len() >= 2 && (freqs[0] - freqs[1]).abs() < 1e-14
            }
            TrapPotential::HarmonicQuartic { .. } => true,
            TrapPotential::Tabulated { .. } => false,
        }
    }
}

/// Sample the trap at every grid point, in the grid's flat index order.
pub fn eval_potential(trap: &TrapPotential, grid: &GridSpec) -> Result<Vec<f64>> {
    trap.validate(grid)?;
    let (nx, ny, nz) = dims3(grid);
    let x = grid.coords(0);
    let y = grid.coords(1);
    let z = if grid.dim() > 2 {
        grid.coords(2)
    } else {
        vec![0.0]
    };
    let mut out = Vec::with_capacity(grid.total_points());
    match trap {
        TrapPotential::Harmonic { freqs } => {
            let gx2 = freqs[0] * freqs[0];
            let gy2 = freqs[1] * freqs[1];
            let gz2 = if freqs.len() > 2 {
                freqs[2] * freqs[2]
            } else {
                0.0
            };
            for iz in 0..nz {
                for iy in 0..ny {
                    let tail = gy2 * y[iy] * y[iy] + gz2 * z[iz] * z[iz];
                    for ix in 0..nx {
                        out.push(0.5 * (gx2 * x[ix] * x[ix] + tail));
                    }
                }
            }
        }
        TrapPotential::HarmonicQuartic { a2, a4 } => {
            for _iz in 0..nz {
                for iy in 0..ny {
                    let y2 = y[iy] * y[iy];
                    for ix in 0..nx {
                        let r2 = x[ix] * x[ix] + y2;
                        out.push(a2 * r2 + a4 * r2 * r2);
                    }
                }
            }
        }
        TrapPotential::Tabulated { values } => out.extend_from_slice(values),
    }
    Ok(out)
}
