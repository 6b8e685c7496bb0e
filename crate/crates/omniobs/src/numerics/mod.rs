//! Shared numerical machinery: fixed-step integration, trajectories,
//! eigenstructure assignment, Riccati solutions, and subspace utilities.

mod care;
mod linalg;
mod place;
mod trajectory;

pub use care::solve_care;
pub use linalg::{image_equal, orthonormal_complement, svd_rank};
pub use place::{default_poles, is_detectable, place_observer_gain};
pub use trajectory::{integrate, rk4_step, IntegrateError, Trajectory};

use thiserror::Error;

/// Errors from the dense numerical routines.
#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("the pair (A, C) is not detectable")]
    NotDetectable,
    #[error("bad pole set: {0}")]
    BadPoleSet(String),
    #[error("eigenstructure assignment failed: {0}")]
    PlacementFailed(String),
    #[error("columns are not orthonormal")]
    NotOrthonormal,
    #[error("iteration failed to converge: {0}")]
    NoConvergence(String),
}
