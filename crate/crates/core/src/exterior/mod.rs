//! Exterior Stokes problem around one particle by regularized Stokeslets.
//!
//! Unknowns are the panel forces `g_j = f_j A_j`; the collocation condition at
//! every panel centroid reads `sum_j S_eps(x_k - x_j) g_j = ell + omega x (x_k - c)`.

mod panels;
mod resistance;
mod solver;

pub use panels::{regularized_stokeslet, PanelDiscretization};
pub use resistance::{
    resistance_bound, resistance_matrix, ResistanceComputation, ResistanceMatrix, RESISTANCE_BOUND_SLACK,
};
pub use solver::{
    energy_pairing, evaluate_velocity, force_torque, pairing_asymmetry, rigid_basis_motion, solve_exterior,
    ExteriorOptions, ExteriorProblem, SolverKind, TractionSolution, DENSE_PANEL_LIMIT, SOLVER_TOLERANCE,
};

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum ExteriorError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("singular collocation system: {0}")]
    Singular(String),
    #[error("linear solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("solutions live on different surfaces")]
    ShapeMismatch,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
