//! Coarse-to-fine solver cascade: solve on the coarsest grid, interpolate
//! the result onto the next grid as its initial state, repeat to the finest
//! level. Each level runs the full conjugate gradient solve.

use crate::field::SpinorField;
use crate::grid::GridSpec;
use crate::physics::{EnergyBreakdown, PhysicsParams};
use crate::solver::{pcg_solve, ConvergenceRecord, SolverConfig};
use crate::spectral::prolongate;
use crate::{Error, Result};

/// An ordered chain of grids on a fixed domain, each doubling the points per
/// axis, with a solver configuration per level.
#[derive(Debug, Clone)]
pub struct MultigridPlan {
    levels: Vec<GridSpec>,
    configs: Vec<SolverConfig>,
}

impl MultigridPlan {
    pub fn new(levels: Vec<GridSpec>, configs: Vec<SolverConfig>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument("a cascade needs at least one level".into()));
        }
        if configs.len() != levels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} levels but {} solver configurations",
                levels.len(),
                configs.len()
            )));
        }
        for w in levels.windows(2) {
            if w[0].half_width() != w[1].half_width() {
                return Err(Error::InvalidArgument(
                    "all cascade levels must share the domain".into(),
                ));
            }
            for (c, f) in w[0].points().iter().zip(w[1].points()) {
                if *f != 2 * c {
                    return Err(Error::InvalidArgument(format!(
                        "cascade levels must double the points per axis, got {c} -> {f}"
                    )));
                }
            }
        }
        for c in &configs {
            c.validate()?;
        }
        Ok(Self { levels, configs })
    }

    /// Chain of `n_levels` grids starting at `coarsest`, the same solver
    /// configuration at every level.
    pub fn doubling(coarsest: &GridSpec, n_levels: usize, config: &SolverConfig) -> Result<Self> {
        if n_levels == 0 {
            return Err(Error::InvalidArgument("a cascade needs at least one level".into()));
        }
        let mut levels = Vec::with_capacity(n_levels);
        let mut pts = coarsest.points().to_vec();
        for _ in 0..n_levels {
            levels.push(GridSpec::new(coarsest.dim(), coarsest.half_width(), &pts)?);
            for p in &mut pts {
                *p *= 2;
            }
        }
        let configs = vec![config.clone(); n_levels];
        Self::new(levels, configs)
    }

    /// Chain from `coarsest` up to (and including) `finest`; the point ratio
    /// must be the same power of two on every axis.
    pub fn between(coarsest: &GridSpec, finest: &GridSpec, config: &SolverConfig) -> Result<Self> {
        if coarsest.half_width() != finest.half_width() || coarsest.dim() != finest.dim() {
            return Err(Error::InvalidArgument(
                "cascade endpoints must share the domain".into(),
            ));
        }
        let ratio = finest.points()[0] / coarsest.points()[0];
        if !ratio.is_power_of_two()
            || coarsest
                .points()
                .iter()
                .zip(finest.points())
                .any(|(c, f)| c * ratio != *f)
        {
            return Err(Error::InvalidArgument(
                "cascade endpoints must differ by one power-of-two factor on every axis".into(),
            ));
        }
        Self::doubling(coarsest, ratio.trailing_zeros() as usize + 1, config)
    }

    pub fn levels(&self) -> &[GridSpec] {
        &self.levels
    }

    pub fn coarsest(&self) -> &GridSpec {
        &self.levels[0]
    }

    pub fn finest(&self) -> &GridSpec {
        self.levels.last().unwrap()
    }

    pub fn config(&self, level: usize) -> &SolverConfig {
        &self.configs[level]
    }

    pub fn set_config(&mut self, level: usize, config: SolverConfig) {
        self.configs[level] = config;
    }
}

#[derive(Debug, Clone)]
pub struct CascadeOutcome {
    pub field: SpinorField,
    pub breakdown: EnergyBreakdown,
    /// Per-level convergence records, coarsest first.
    pub records: Vec<ConvergenceRecord>,
    /// Energy of each level's initial state; the prolongated coarse solution
    /// should already sit close to the next level's converged energy.
    pub start_energies: Vec<f64>,
}

impl CascadeOutcome {
    pub fn converged(&self) -> bool {
        self.records.iter().all(|r| r.converged())
    }

    pub fn total_iterations(&self) -> usize {
        self.records.iter().map(|r| r.iterations()).sum()
    }
}

/// Run the cascade from an initial state on the coarsest grid.
pub fn cm_pcg_solve(
    phi0: &SpinorField,
    params: &PhysicsParams,
    plan: &MultigridPlan,
) -> Result<CascadeOutcome> {
    if phi0.grid() != plan.coarsest() {
        return Err(Error::GridMismatch(
            "initial state must live on the coarsest level".into(),
        ));
    }
    let mut field = phi0.normalized()?;
    let mut records = Vec::with_capacity(plan.levels.len());
    let mut start_energies = Vec::with_capacity(plan.levels.len());
    let mut breakdown = EnergyBreakdown::default();
    for (k, grid) in plan.levels.iter().enumerate() {
        if k > 0 {
            field = prolongate(&field, grid)?.normalized()?;
        }
        start_energies.push(crate::physics::energy(&field, params)?.total);
        let out = pcg_solve(&field, params, &plan.configs[k])?;
        field = out.field;
        breakdown = out.breakdown;
        records.push(out.record);
    }
    Ok(CascadeOutcome {
        field,
        breakdown,
        records,
        start_energies,
    })
}
