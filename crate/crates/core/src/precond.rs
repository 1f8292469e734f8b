//! Preconditioners for the manifold conjugate gradient iteration.
//!
//! Three symmetric positive definite choices: inverse shifted kinetic
//! operator (diagonal in frequency space), inverse shifted potential-plus-
//! interaction multiplier (diagonal in physical space), and their symmetrized
//! combination. Shift constants are recomputed from the current iterate.

use crate::fft::GridEngine;
use crate::field::{SpinorField, COMPONENTS};
use crate::physics::{interaction_data, PhysicsParams, ProblemCtx};
use crate::potential::eval_potential;
use crate::spectral::{dims3, row_apply};
use crate::sum::{self, Kahan};
use crate::{Error, Result};

const SHIFT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecondKind {
    Kinetic,
    Potential,
    Combined,
    None,
}

impl PrecondKind {
    pub fn name(&self) -> &'static str {
        match self {
            PrecondKind::Kinetic => "kinetic",
            PrecondKind::Potential => "potential",
            PrecondKind::Combined => "combined",
            PrecondKind::None => "none",
        }
    }
}

pub(crate) fn clamp_shifts(shifts: &[f64; 3]) -> [f64; 3] {
    let mut out = *shifts;
    for s in &mut out {
        if !(*s > SHIFT_FLOOR) {
            *s = SHIFT_FLOOR;
        }
    }
    out
}

/// Per-component shift constants
/// `alpha_l = integral( |grad phi_l|^2 / 2 + V |phi_l|^2 + c0 rho |phi_l|^2 )`,
/// clamped below to keep the preconditioners invertible.
pub fn compute_shift(phi: &SpinorField, params: &PhysicsParams) -> Result<[f64; 3]> {
    let ctx = ProblemCtx::new(params, phi.grid())?;
    Ok(clamp_shifts(&crate::physics::ham_energy(&ctx, phi).shifts))
}

/// Apply one preconditioner to a residual. `density` is the total particle
/// density of the current iterate; it enters through the `c0 rho` term of
/// the potential-type divisors.
pub fn apply_preconditioner(
    r: &SpinorField,
    kind: PrecondKind,
    shifts: &[f64; 3],
    params: &PhysicsParams,
    density: &[f64],
) -> Result<SpinorField> {
    let v = eval_potential(&params.trap, r.grid())?;
    apply_with_potential(r, kind, shifts, params.c0, &v, density)
}

pub(crate) fn apply_with_potential(
    r: &SpinorField,
    kind: PrecondKind,
    shifts: &[f64; 3],
    c0: f64,
    potential: &[f64],
    density: &[f64],
) -> Result<SpinorField> {
    if density.len() != r.grid().total_points() {
        return Err(Error::InvalidArgument(
            "density table does not match the grid".into(),
        ));
    }
    match kind {
        PrecondKind::None => Ok(r.clone()),
        PrecondKind::Kinetic => Ok(kinetic_stage(r, shifts)),
        PrecondKind::Potential => {
            let mut out = r.clone();
            for l in 0..COMPONENTS {
                let inv = potential_divisor(shifts[l], c0, potential, density, false)?;
                scale_pointwise(out.component_mut(l), &inv);
            }
            Ok(out)
        }
        PrecondKind::Combined => {
            let mut out = r.clone();
            for l in 0..COMPONENTS {
                let inv_sqrt = potential_divisor(shifts[l], c0, potential, density, true)?;
                scale_pointwise(out.component_mut(l), &inv_sqrt);
            }
            let mut out = kinetic_stage(&out, shifts);
            for l in 0..COMPONENTS {
                let inv_sqrt = potential_divisor(shifts[l], c0, potential, density, true)?;
                scale_pointwise(out.component_mut(l), &inv_sqrt);
            }
            Ok(out)
        }
    }
}

/// Frequency-space division by `alpha_l + |v|^2 / 2`.
fn kinetic_stage(r: &SpinorField, shifts: &[f64; 3]) -> SpinorField {
    let engine = GridEngine::get(r.grid());
    let (nx, ny, _) = dims3(r.grid());
    let s = engine.inv_scale();
    let vx2: Vec<f64> = engine.wave(0).iter().map(|v| v * v).collect();
    let vy2: Vec<f64> = engine.wave(1).iter().map(|v| v * v).collect();
    let vz2: Vec<f64> = if r.grid().dim() > 2 {
        engine.wave(2).iter().map(|v| v * v).collect()
    } else {
        vec![0.0]
    };
    let mut out = r.clone();
    for l in 0..COMPONENTS {
        let alpha = shifts[l];
        let data = out.component_mut(l);
        engine.forward(data);
        row_apply(data, nx, |row, chunk| {
            let vyz = vy2[row % ny] + vz2[row / ny];
            for (i, z) in chunk.iter_mut().enumerate() {
                *z *= s / (alpha + 0.5 * (vx2[i] + vyz));
            }
        });
        engine.inverse(data);
    }
    out
}

/// Reciprocal (or reciprocal square root) of `alpha + V + c0 rho`; fails if
/// the divisor is nonpositive anywhere, which can happen for attractive
/// interactions with a small shift.
fn potential_divisor(
    alpha: f64,
    c0: f64,
    potential: &[f64],
    density: &[f64],
    sqrt: bool,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(potential.len());
    for (v, rho) in potential.iter().zip(density) {
        let d = alpha + v + c0 * rho;
        if !(d > 0.0) {
            return Err(Error::PreconditionerBreakdown(format!(
                "potential divisor {d} at alpha = {alpha}"
            )));
        }
        out.push(if sqrt { 1.0 / d.sqrt() } else { 1.0 / d });
    }
    Ok(out)
}

fn scale_pointwise(data: &mut [crate::C64], factors: &[f64]) {
    use rayon::prelude::*;
    if data.len() < 1 << 14 {
        for (z, f) in data.iter_mut().zip(factors) {
            *z *= *f;
        }
    } else {
        data.par_chunks_mut(1 << 13)
            .zip(factors.par_chunks(1 << 13))
            .for_each(|(zc, fc)| {
                for (z, f) in zc.iter_mut().zip(fc) {
                    *z *= *f;
                }
            });
    }
}

/// `Re <P r, r>` with the discrete quadrature weight; positive for any
/// nonzero residual when the preconditioner is positive definite.
pub(crate) fn precond_pairing(pr: &SpinorField, r: &SpinorField) -> f64 {
    let mut acc = 0.0;
    for l in 0..COMPONENTS {
        acc += sum::dot(r.component(l), pr.component(l)).re;
    }
    acc * r.grid().cell_volume()
}

#[allow(dead_code)]
pub(crate) fn naive_shift_quadrature(
    phi: &SpinorField,
    potential: &[f64],
    c0: f64,
) -> [f64; 3] {
    // Pointwise part only; used by tests as an independent route.
    let cell = phi.grid().cell_volume();
    let frozen = interaction_data(phi);
    let mut out = [0.0; 3];
    for l in 0..COMPONENTS {
        let mut acc = Kahan::default();
        for (i, z) in phi.component(l).iter().enumerate() {
            acc.add((potential[i] + c0 * frozen.rho[i]) * z.norm_sqr());
        }
        out[l] = cell * acc.value();
    }
    out
}
