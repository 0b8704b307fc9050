use thiserror::Error;

use crate::conic::{Defect, SolveStatus};
use crate::surrogate::SubproblemKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid expansion point for user {user}: {reason}")]
    InvalidExpansionPoint { user: usize, reason: String },

    #[error("instance is infeasible: {0}")]
    InfeasibleInstance(String),

    #[error("malformed cone program ({} defects, first: {})", .0.len(), .0.first().map(|d| d.to_string()).unwrap_or_default())]
    MalformedProgram(Vec<Defect>),

    #[error("{step:?} solve ended with {status:?} at outer iteration {iteration}")]
    Solver {
        iteration: usize,
        step: SubproblemKind,
        status: SolveStatus,
    },

    #[error("energy efficiency decreased at iteration {iteration} ({step:?}): {previous} -> {current}")]
    Monotonicity {
        iteration: usize,
        step: SubproblemKind,
        previous: f64,
        current: f64,
    },
}
