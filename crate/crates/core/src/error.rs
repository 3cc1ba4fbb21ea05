//! Error type shared across the crate.

use crate::solver::SolveOutput;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally invalid input (mass mismatch, degenerate box, singular
    /// matrix, unknown instance name, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The dual ascent hit `max_iter` with residual above tolerance. Carries
    /// the best iterate so callers can inspect or continue it.
    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence {
        residual: f64,
        iterations: usize,
        best: Box<SolveOutput>,
    },

    /// The weighted mass under a map sample vanished; signals an unconverged
    /// or degenerate input.
    #[error("zero weighted mass in map sample at source index {0}")]
    ZeroMass(usize),

    /// A finite-difference stencil left the support lattice.
    #[error("boundary point: {0}")]
    Boundary(String),

    /// A rate fit was asked to take logs of nonpositive values.
    #[error("nonpositive values in rate fit at sweep points {0:?}")]
    NonPositiveFit(Vec<usize>),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
