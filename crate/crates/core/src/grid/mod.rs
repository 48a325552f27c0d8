//! Staggered-grid Stokes solver with penalized particles or Brinkman friction.
//!
//! Velocity component `a` lives on the faces normal to axis `a`, pressure at
//! cell centres. Arrays are stored `i + n0 * (j + n1 * k)`. Normal velocities
//! on the walls are fixed at zero, tangential no-slip uses the reflected
//! ghost value `u_ghost = -u`.

mod brinkman;
mod diagnostics;
mod field;
mod io;
mod multigrid;
mod ops;
mod penalization;
mod poisson;
mod stokes;

pub use brinkman::{energy_identity, solve_brinkman, solve_brinkman_with, BrinkmanFields, SymMat3};
pub use diagnostics::{
    energy_norm, energy_norm_interior, l2_distance, local_mean_velocity, relative_l2_distance, restrict_to,
};
pub use field::GridField;
pub use io::{read_raw, write_raw, write_vtk, RawHeader};
pub use multigrid::{AxisKind, Multigrid, ScalarOperator};
pub use ops::{cell_average, divergence, face_average_of_cells, laplacian_component, max_divergence};
pub use penalization::{particle_force, solve_nbody, solve_nbody_with, NBodySolution, PenalizationMask};
pub use poisson::NeumannPoisson;
pub use stokes::{solve_stokes, Reaction, SolveStats, StokesMethod, StokesOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, GeometryError};
use crate::Vec3;

/// Smallest admissible number of cells per axis.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("grid under-resolves the particles: h = {h} but at most {max_h} is required")]
    UnderResolved { h: f64, max_h: f64 },
    #[error("{solver} did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("empty averaging region for particle {0}")]
    EmptyRegion(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Uniform box grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub domain: Aabb,
    /// Cells per axis.
    pub n: [usize; 3],
    pub h: f64,
}

impl Grid {
    pub fn new(domain: Aabb, n: [usize; 3]) -> Result<Self, GridError> {
        if !domain.is_valid() {
            return Err(GridError::InvalidGrid("empty domain".into()));
        }
        if n.iter().any(|&c| c < MIN_CELLS) {
            return Err(GridError::InvalidGrid(format!(
                "need at least {MIN_CELLS} cells per axis, got {n:?}"
            )));
        }
        let e = domain.extent();
        let h = e.x / n[0] as f64;
        for a in 1..3 {
            let ha = e[a] / n[a] as f64;
            if (ha - h).abs() > 1e-12 * h {
                return Err(GridError::InvalidGrid(format!(
                    "cells are not cubic: h = {h} along x but {ha} along axis {a}"
                )));
            }
        }
        Ok(Grid { domain, n, h })
    }

    /// `nx` cells along x; the other counts follow from the box aspect ratio.
    pub fn with_nx(domain: Aabb, nx: usize) -> Result<Self, GridError> {
        let e = domain.extent();
        let h = e.x / nx as f64;
        let mut n = [nx; 3];
        for a in 1..3 {
            let c = e[a] / h;
            if (c - c.round()).abs() > 1e-9 {
                return Err(GridError::InvalidGrid(format!(
                    "box side {} along axis {a} is not a multiple of h = {h}",
                    e[a]
                )));
            }
            n[a] = c.round() as usize;
        }
        Grid::new(domain, n)
    }

    pub fn cells(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(3)
    }

    /// Array dimensions of velocity component `a`.
    pub fn face_dims(&self, a: usize) -> [usize; 3] {
        let mut d = self.n;
        d[a] += 1;
        d
    }

    pub fn face_count(&self, a: usize) -> usize {
        let d = self.face_dims(a);
        d[0] * d[1] * d[2]
    }

    #[inline]
    pub fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n[0] * (j + self.n[1] * k)
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.domain.min + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.h
    }

    /// Position of face `(i, j, k)` of component `a`.
    #[inline]
    pub fn face_point(&self, a: usize, i: usize, j: usize, k: usize) -> Vec3 {
        let mut off = Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5);
        off[a] -= 0.5;
        self.domain.min + off * self.h
    }

    /// Cell containing `x`, clamped to the grid.
    pub fn locate_cell(&self, x: &Vec3) -> [usize; 3] {
        std::array::from_fn(|a| {
            let t = ((x[a] - self.domain.min[a]) / self.h).floor();
            (t.max(0.0) as usize).min(self.n[a] - 1)
        })
    }
}

/// Decompose a flat index of an array with dimensions `d`.
#[inline]
pub(crate) fn unflatten(idx: usize, d: [usize; 3]) -> [usize; 3] {
    [idx % d[0], (idx / d[0]) % d[1], idx / (d[0] * d[1])]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_construction() {
        let g = Grid::with_nx(Aabb::new(Vec3::zeros(), Vec3::new(1.0, 0.5, 2.0)), 16).unwrap();
        assert_eq!(g.n, [16, 8, 32]);
        assert_eq!(g.face_dims(1), [16, 9, 32]);
        assert!(Grid::with_nx(Aabb::unit(), 4).is_err());
        assert!(Grid::new(Aabb::unit(), [16, 16, 17]).is_err());
        let p = g.face_point(0, 0, 0, 0);
        assert!((p - Vec3::new(0.0, g.h / 2.0, g.h / 2.0)).norm() < 1e-15);
        assert_eq!(g.locate_cell(&Vec3::new(0.99, 0.01, 1.5)), [15, 0, 24]);
        assert_eq!(unflatten(g.cell_index(3, 5, 7), g.n), [3, 5, 7]);
    }
}
