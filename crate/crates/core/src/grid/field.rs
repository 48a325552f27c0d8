use crate::par;
use crate::Vec3;

use super::ops::{cell_average, divergence};
use super::{unflatten, Grid};

/// Staggered velocity and cell pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub u: [Vec<f64>; 3],
    pub p: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Grid) -> Self {
        GridField {
            u: std::array::from_fn(|a| vec![0.0; grid.face_count(a)]),
            p: vec![0.0; grid.cells()],
            grid,
        }
    }

    /// Sample `f` at the face nodes (wall-normal faces set to zero).
    pub fn from_velocity_fn(grid: Grid, f: impl Fn(&Vec3) -> Vec3 + Sync) -> Self {
        let mut field = GridField::zeros(grid);
        for a in 0..3 {
            let d = grid.face_dims(a);
            let vals = par::map_range(grid.face_count(a), |idx| {
                let ijk = unflatten(idx, d);
                if ijk[a] == 0 || ijk[a] == grid.n[a] {
                    0.0
                } else {
                    f(&grid.face_point(a, ijk[0], ijk[1], ijk[2]))[a]
                }
            });
            field.u[a] = vals;
        }
        field
    }

    pub fn divergence(&self) -> Vec<f64> {
        divergence(&self.grid, &self.u)
    }

    pub fn max_divergence(&self) -> f64 {
        par::max_abs(&self.divergence())
    }

    pub fn pressure_mean(&self) -> f64 {
        par::sum_chunks(self.p.len(), |r| self.p[r].iter().sum()) / self.p.len() as f64
    }

    pub fn remove_pressure_mean(&mut self) {
        let m = self.pressure_mean();
        self.p.iter_mut().for_each(|v| *v -= m);
    }

    /// Velocity interpolated to cell centres.
    pub fn cell_velocities(&self) -> Vec<Vec3> {
        let c: [Vec<f64>; 3] = std::array::from_fn(|a| cell_average(&self.grid, a, &self.u[a]));
        (0..self.grid.cells())
            .map(|i| Vec3::new(c[0][i], c[1][i], c[2][i]))
            .collect()
    }

    pub fn speed(&self) -> Vec<f64> {
        self.cell_velocities().iter().map(|v| v.norm()).collect()
    }

    /// Velocity at cell `(i, j, k)`.
    pub fn cell_velocity(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::from_fn(|a, _| {
            let d = self.grid.face_dims(a);
            let mut ijk = [i, j, k];
            let f0 = ijk[0] + d[0] * (ijk[1] + d[1] * ijk[2]);
            ijk[a] += 1;
            let f1 = ijk[0] + d[0] * (ijk[1] + d[1] * ijk[2]);
            0.5 * (self.u[a][f0] + self.u[a][f1])
        })
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().flatten().chain(&self.p).all(|v| v.is_finite())
    }

    pub fn max_speed(&self) -> f64 {
        self.u.iter().map(|c| par::max_abs(c)).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;

    #[test]
    fn sampling_and_cell_values() {
        let g = Grid::with_nx(Aabb::unit(), 8).unwrap();
        let f = GridField::from_velocity_fn(g, |x| Vec3::new(1.0, x.x, 0.0));
        assert_eq!(f.u[0][0], 0.0);
        let v = f.cell_velocity(3, 4, 5);
        assert!((v - Vec3::new(1.0, g.cell_center(3, 4, 5).x, 0.0)).norm() < 1e-15);
        assert_eq!(f.cell_velocities()[g.cell_index(3, 4, 5)], v);
        let mut f = f;
        f.p.iter_mut().enumerate().for_each(|(i, p)| *p = i as f64);
        f.remove_pressure_mean();
        assert!(f.pressure_mean().abs() < 1e-12);
    }
}
