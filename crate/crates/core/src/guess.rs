//! The library of initial states and energy sweeps over them.
//!
//! Ten single-component profiles are in common use as starting points for
//! condensate ground-state searches: a unit Gaussian, a singly quantized
//! central vortex, rotation-weighted blends of the two, their complex
//! conjugates, and the Thomas-Fermi profile of the interaction-dominated
//! regime. A spinor start assigns one profile per component with equal mass.

use crate::field::SpinorField;
use crate::grid::GridSpec;
use crate::multigrid::{cm_pcg_solve, MultigridPlan};
use crate::physics::{EnergyBreakdown, PhysicsParams};
use crate::potential::eval_potential;
#[cfg(test)]
use crate::potential::TrapPotential;
use crate::solver::{pcg_solve, SolverConfig};
use crate::spectral::dims3;
use crate::sum;
use crate::{C64, Error, Result};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt;

/// Tags of the guess library. `A` is the unit Gaussian; `B` carries a
/// central vortex `(x + i y)`; `C` mixes the two equally; `D` and `E` weight
/// them by `1 - omega` and `omega`; the `*Bar` variants are complex
/// conjugates; `F` is the normalized Thomas-Fermi profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GuessKind {
    A,
    B,
    BBar,
    C,
    CBar,
    D,
    DBar,
    E,
    EBar,
    F,
}

impl GuessKind {
    pub const ALL: [GuessKind; 10] = [
        GuessKind::A,
        GuessKind::B,
        GuessKind::BBar,
        GuessKind::C,
        GuessKind::CBar,
        GuessKind::D,
        GuessKind::DBar,
        GuessKind::E,
        GuessKind::EBar,
        GuessKind::F,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(GuessKind::A),
            "b" => Ok(GuessKind::B),
            "bbar" | "b-" => Ok(GuessKind::BBar),
            "c" => Ok(GuessKind::C),
            "cbar" | "c-" => Ok(GuessKind::CBar),
            "d" => Ok(GuessKind::D),
            "dbar" | "d-" => Ok(GuessKind::DBar),
            "e" => Ok(GuessKind::E),
            "ebar" | "e-" => Ok(GuessKind::EBar),
            "f" => Ok(GuessKind::F),
            other => Err(Error::InvalidArgument(format!("unknown guess tag '{other}'"))),
        }
    }
}

impl fmt::Display for GuessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GuessKind::A => "a",
            GuessKind::B => "b",
            GuessKind::BBar => "bbar",
            GuessKind::C => "c",
            GuessKind::CBar => "cbar",
            GuessKind::D => "d",
            GuessKind::DBar => "dbar",
            GuessKind::E => "e",
            GuessKind::EBar => "ebar",
            GuessKind::F => "f",
        };
        f.write_str(s)
    }
}

/// Thomas-Fermi chemical potential of the harmonic trap.
pub fn thomas_fermi_mu(c0: f64, freqs: &[f64]) -> f64 {
    match freqs.len() {
        2 => 0.5 * (4.0 * c0 * freqs[0] * freqs[1] / PI).sqrt(),
        _ => 0.5 * (15.0 * c0 * freqs[0] * freqs[1] * freqs[2] / (4.0 * PI)).powf(0.4),
    }
}

fn scalar_norm(grid: &GridSpec, data: &[C64]) -> f64 {
    (grid.cell_volume() * sum::norm_sqr(data)).sqrt()
}

fn normalize_scalar(grid: &GridSpec, mut data: Vec<C64>) -> Result<Vec<C64>> {
    let n = scalar_norm(grid, &data);
    if !(n > 0.0) {
        return Err(Error::DegenerateInput("guess sampled to zero".into()));
    }
    for z in &mut data {
        *z /= n;
    }
    Ok(data)
}

/// Sample one guess profile on the grid and normalize it to unit norm
/// (domain truncation perturbs the analytic normalizations).
pub fn make_guess(kind: GuessKind, grid: &GridSpec, params: &PhysicsParams) -> Result<Vec<C64>> {
    let dim = grid.dim();
    let (nx, ny, nz) = dims3(grid);
    let x = grid.coords(0);
    let y = grid.coords(1);
    let z: Vec<f64> = if dim > 2 { grid.coords(2) } else { vec![0.0] };
    let gauss_norm = PI.powf(-(dim as f64) / 4.0);
    let n = grid.total_points();

    let sample = |f: &dyn Fn(f64, f64, f64, f64) -> C64| -> Vec<C64> {
        let mut out = Vec::with_capacity(n);
        for iz in 0..nz {
            for iy in 0..ny {
                for ix in 0..nx {
                    let r2 = x[ix] * x[ix] + y[iy] * y[iy] + z[iz] * z[iz];
                    out.push(f(x[ix], y[iy], z[iz], r2));
                }
            }
        }
        out
    };
    let gaussian = |x: f64, y: f64, _z: f64, r2: f64| -> C64 {
        let _ = (x, y);
        C64::new(gauss_norm * (-r2 / 2.0).exp(), 0.0)
    };
    let vortex =
        |x: f64, y: f64, _z: f64, r2: f64| C64::new(x, y) * gauss_norm * (-r2 / 2.0).exp();

    let omega = params.omega;
    let data = match kind {
        GuessKind::A => sample(&gaussian),
        GuessKind::B => sample(&vortex),
        GuessKind::BBar => sample(&|x, y, z, r2| vortex(x, y, z, r2).conj()),
        GuessKind::C => sample(&|x, y, z, r2| gaussian(x, y, z, r2) + vortex(x, y, z, r2)),
        GuessKind::CBar => {
            sample(&|x, y, z, r2| (gaussian(x, y, z, r2) + vortex(x, y, z, r2)).conj())
        }
        GuessKind::D => sample(&|x, y, z, r2| {
            gaussian(x, y, z, r2) * (1.0 - omega) + vortex(x, y, z, r2) * omega
        }),
        GuessKind::DBar => sample(&|x, y, z, r2| {
            (gaussian(x, y, z, r2) * (1.0 - omega) + vortex(x, y, z, r2) * omega).conj()
        }),
        GuessKind::E => sample(&|x, y, z, r2| {
            gaussian(x, y, z, r2) * omega + vortex(x, y, z, r2) * (1.0 - omega)
        }),
        GuessKind::EBar => sample(&|x, y, z, r2| {
            (gaussian(x, y, z, r2) * omega + vortex(x, y, z, r2) * (1.0 - omega)).conj()
        }),
        GuessKind::F => {
            if !(params.c0 > 0.0) {
                return Err(Error::InvalidArgument(
                    "the Thomas-Fermi guess requires c0 > 0".into(),
                ));
            }
            let freqs = params.trap.harmonic_freqs(dim).ok_or_else(|| {
                Error::InvalidArgument(
                    "the Thomas-Fermi guess is defined for harmonic traps only".into(),
                )
            })?;
            let mu_tf = thomas_fermi_mu(params.c0, freqs);
            let v = eval_potential(&params.trap, grid)?;
            v.iter()
                .map(|&vi| {
                    if vi < mu_tf {
                        C64::new(((mu_tf - vi) / params.c0).sqrt(), 0.0)
                    } else {
                        C64::default()
                    }
                })
                .collect()
        }
    };
    normalize_scalar(grid, data)
}

/// Assemble a spinor start from three profile tags; each component gets
/// mass 1/3 so the total norm is one.
pub fn make_spinor_guess(
    tags: [GuessKind; 3],
    grid: &GridSpec,
    params: &PhysicsParams,
) -> Result<SpinorField> {
    let scale = 1.0 / 3.0f64.sqrt();
    let mut comps: [Vec<C64>; 3] = Default::default();
    for (l, tag) in tags.iter().enumerate() {
        let mut c = make_guess(*tag, grid, params)?;
        for v in &mut c {
            *v *= scale;
        }
        comps[l] = c;
    }
    SpinorField::from_components(grid.clone(), comps)
}

/// All identical-component triples `(t, t, t)` of a tag set.
pub fn identical_triples(tags: &[GuessKind]) -> Vec<[GuessKind; 3]> {
    tags.iter().map(|&t| [t, t, t]).collect()
}

/// The full cartesian product of a tag set over the three components.
pub fn all_triples(tags: &[GuessKind]) -> Vec<[GuessKind; 3]> {
    let mut out = Vec::with_capacity(tags.len().pow(3));
    for &a in tags {
        for &b in tags {
            for &c in tags {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// How each sweep entry is solved.
#[derive(Debug, Clone)]
pub enum SweepMethod {
    Fixed(SolverConfig),
    Cascade(MultigridPlan),
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub tags: [GuessKind; 3],
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub table: Vec<SweepEntry>,
    pub best_index: usize,
    pub field: SpinorField,
    pub breakdown: EnergyBreakdown,
}

/// Solve one problem per guess triple (in parallel) and keep the
/// lowest-energy stationary state. `grid` is the solve grid for the fixed
/// method and the coarsest level for the cascade.
pub fn sweep_guesses(
    triples: &[[GuessKind; 3]],
    grid: &GridSpec,
    params: &PhysicsParams,
    method: &SweepMethod,
) -> Result<SweepOutcome> {
    if triples.is_empty() {
        return Err(Error::InvalidArgument("empty guess sweep".into()));
    }
    let results: Vec<(SweepEntry, Option<(SpinorField, EnergyBreakdown)>)> = triples
        .par_iter()
        .map(|&tags| {
            let run = || -> Result<(SpinorField, EnergyBreakdown, usize, bool)> {
                let phi0 = make_spinor_guess(tags, grid, params)?;
                match method {
                    SweepMethod::Fixed(cfg) => {
                        let out = pcg_solve(&phi0, params, cfg)?;
                        Ok((
                            out.field,
                            out.breakdown,
                            out.record.iterations(),
                            out.record.converged(),
                        ))
                    }
                    SweepMethod::Cascade(plan) => {
                        let out = cm_pcg_solve(&phi0, params, plan)?;
                        let iterations = out.total_iterations();
                        let converged = out.converged();
                        Ok((out.field, out.breakdown, iterations, converged))
                    }
                }
            };
            match run() {
                Ok((field, breakdown, iterations, converged)) => (
                    SweepEntry {
                        tags,
                        energy: breakdown.total,
                        iterations,
                        converged,
                        error: None,
                    },
                    Some((field, breakdown)),
                ),
                Err(e) => (
                    SweepEntry {
                        tags,
                        energy: f64::NAN,
                        iterations: 0,
                        converged: false,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, (entry, state)) in results.iter().enumerate() {
        if state.is_some() && best.map_or(true, |(_, e)| entry.energy < e) {
            best = Some((i, entry.energy));
        }
    }
    let Some((best_index, _)) = best else {
        return Err(Error::SweepFailed);
    };
    let mut table = Vec::with_capacity(results.len());
    let mut picked = None;
    for (i, (entry, state)) in results.into_iter().enumerate() {
        if i == best_index {
            picked = state;
        }
        table.push(entry);
    }
    let (field, breakdown) = picked.expect("best entry has a state");
    Ok(SweepOutcome {
        table,
        best_index,
        field,
        breakdown,
    })
}
