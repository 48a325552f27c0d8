//! Empirical measures of particle clouds, mollified Brinkman coefficients and
//! the comparison between the N-particle flow and its Stokes-Brinkman limit.

mod closure;
mod measure;
mod mollifier;
mod study;

pub use closure::{drag_closure_check, ClosureEntry, ClosureStats};
pub use measure::{empirical_measure, Atom, EmpiricalMeasure};
pub use mollifier::{assemble_brinkman_fields, AssemblyReport, Mollifier};
pub(crate) use study::with_suffix;
pub use study::{convergence_study, ConvergenceReport, StudyRow, StudySpec};

use thiserror::Error;

use crate::exterior::ExteriorError;
use crate::geometry::GeometryError;
use crate::grid::GridError;

#[derive(Debug, Error)]
pub enum HomogenizationError {
    #[error("no resistance matrix for shape {0}")]
    MissingMatrix(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("mollifier width {sigma} is narrower than the grid spacing {h}")]
    MollifierTooNarrow { sigma: f64, h: f64 },
    #[error("study lists no N values")]
    EmptyStudy,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Exterior(#[from] ExteriorError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
