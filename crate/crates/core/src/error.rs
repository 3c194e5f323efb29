//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by grid construction, kernels, solvers and the campaign runner.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Problem parameters violate the regime bounds under which ground states exist.
    #[error("regime violation: {0}")]
    Regime(String),

    /// Two fields (or a field and a kernel) live on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The iteration hit its budget with the residual above tolerance.
    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// The iterate collapsed to the zero field.
    #[error("iterate collapsed to zero (L2 norm {norm:.3e})")]
    CollapseToZero { norm: f64 },

    /// A root or minimum could not be bracketed.
    #[error("bracketing failed: {0}")]
    Bracket(String),

    /// More than half of the entries of a sweep failed.
    #[error("sweep aborted: {failed} of {total} entries failed")]
    SweepAborted { failed: usize, total: usize },

    /// Malformed or inconsistent run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Filesystem failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short stable tag naming the variant, used in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Regime(_) => "regime",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::NonConvergence { .. } => "non-convergence",
            Error::CollapseToZero { .. } => "collapse-to-zero",
            Error::Bracket(_) => "bracket",
            Error::SweepAborted { .. } => "sweep-aborted",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}
