//! Library error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A preconditioner divisor became nonpositive somewhere on the grid.
    /// The caller is expected to fall back to an unpreconditioned step.
    #[error("preconditioner breakdown: {0}")]
    PreconditionerBreakdown(String),

    #[error("line search stalled after {0} backtracks")]
    StepStalled(usize),

    #[error("unsupported diagnostic: {0}")]
    UnsupportedDiagnostic(String),

    #[error("sweep failed: no initial guess produced a stationary state")]
    SweepFailed,
}
