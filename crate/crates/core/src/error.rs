use thiserror::Error;

use crate::flow::PhaseTrajectory;
use crate::stationary::StationaryResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid inertia operator: {0}")]
    InvalidInertia(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionError {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    /// The integrator gave up; `partial` holds everything computed so far.
    #[error("integration failed at s = {at}: {reason}")]
    IntegrationError {
        at: f64,
        reason: String,
        partial: Box<PhaseTrajectory>,
    },

    #[error("grid too coarse: {nodes} nodes, at least {required} required")]
    GridTooCoarse { nodes: usize, required: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Newton (or shooting) ran out of iterations or stalled. `best` is the
    /// best iterate found, fully evaluated.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Box<StationaryResult>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionError { context, expected, got })
    }
}
