//! Configuration, run manifests, plot tables and the command-line front end.

mod cli;
mod config;
mod manifest;
mod plot;
mod selftest;

pub use cli::{run, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
pub use config::{canonical, digest_hex, CloudDefaults, Config};
pub use manifest::{manifest_path_for_file, manifest_path_for_prefix, RunManifest};
pub use plot::{emit_plot_data, parse_plot_data, PlotRow};
pub use selftest::{selftest, SelftestCheck};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::exterior::ExteriorError;
use crate::geometry::GeometryError;
use crate::grid::GridError;
use crate::homogenization::HomogenizationError;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "BRINKMAN_THREADS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Exterior(#[from] ExteriorError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Homogenization(#[from] HomogenizationError),
    /// A run finished but did not produce all results.
    #[error("{0}")]
    Incomplete(String),
    #[error("self-test failed: {0}")]
    Selftest(String),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// True for numerical failures (as opposed to bad input).
    pub fn is_solver_failure(&self) -> bool {
        match self {
            HarnessError::Exterior(e) => exterior_failure(e),
            HarnessError::Grid(e) => grid_failure(e),
            HarnessError::Homogenization(e) => match e {
                HomogenizationError::Exterior(e) => exterior_failure(e),
                HomogenizationError::Grid(e) => grid_failure(e),
                _ => false,
            },
            HarnessError::Incomplete(_) | HarnessError::Selftest(_) => true,
            _ => false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_solver_failure() {
            EXIT_FAILURE
        } else {
            EXIT_USAGE
        }
    }
}

fn exterior_failure(e: &ExteriorError) -> bool {
    matches!(e, ExteriorError::NotConverged { .. } | ExteriorError::Singular(_))
}

fn grid_failure(e: &GridError) -> bool {
    matches!(e, GridError::NotConverged { .. })
}

/// Thread count: the request, capped by `BRINKMAN_THREADS` when set.
pub fn thread_cap(requested: Option<usize>, env: Option<&str>) -> Result<Option<usize>, HarnessError> {
    let cap =
        match env {
            Some(s) if !s.trim().is_empty() => {
                Some(s.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
                    HarnessError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{s}`"))
                })?)
            }
            _ => None,
        };
    Ok(match (requested, cap) {
        (Some(r), Some(c)) => Some(r.min(c)),
        (r, c) => r.or(c),
    })
}
