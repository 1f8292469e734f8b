//! Ground states of rotating, spin-orbit-coupled spin-1 condensates.
//!
//! The condensate is described by a three-component complex wave function on
//! a uniform periodic grid. Its energy is minimized over the unit-norm
//! manifold by a preconditioned nonlinear conjugate gradient iteration with
//! a quadratic line-search model, optionally accelerated by a cascadic
//! multigrid chain of grids. A semi-implicit projected gradient flow is
//! included as a reference solver.
//!
//! Module map:
//! - [`grid`], [`field`], [`spectral`]: grids, spinor fields, FFT-based
//!   differential operators and trigonometric interpolation.
//! - [`potential`], [`physics`]: trap potentials, the coupled Hamiltonian,
//!   energy breakdown and stationary-state diagnostics.
//! - [`precond`], [`solver`]: preconditioners and the manifold CG iteration.
//! - [`multigrid`]: coarse-to-fine solver cascade.
//! - [`pgf`]: projected gradient flow baseline.
//! - [`guess`]: library of initial states and energy sweeps over them.

pub mod error;
pub mod field;
mod fft;
pub mod grid;
pub mod guess;
pub mod multigrid;
pub mod pgf;
pub mod physics;
pub mod potential;
pub mod precond;
pub mod solver;
pub mod spectral;
pub(crate) mod sum;

pub use error::Error;
pub use field::SpinorField;
pub use grid::GridSpec;
pub use physics::{EnergyBreakdown, PhysicsParams};
pub use potential::TrapPotential;
pub use solver::{SolveOutcome, SolverConfig};

pub type Result<T> = std::result::Result<T, Error>;

/// Complex scalar used throughout (double precision).
pub type C64 = num_complex::Complex64;
