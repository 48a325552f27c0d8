use serde::{Deserialize, Serialize};

use crate::{Mat3, Vec3};

use super::diagnostics::energy_norm;
use super::field::GridField;
use super::ops::face_average_of_cells;
use super::stokes::{solve_stokes, Reaction, SolveStats, StokesOptions};
use super::{Grid, GridError};

/// Symmetric 3x3 matrix stored by its six independent entries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SymMat3 {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

impl SymMat3 {
    pub fn identity(s: f64) -> Self {
        SymMat3 {
            xx: s,
            yy: s,
            zz: s,
            ..Default::default()
        }
    }

    /// Symmetric part of `m` if its asymmetry is within `tol` (relative).
    pub fn from_mat3(m: &Mat3, tol: f64) -> Result<Self, GridError> {
        let asym = (m - m.transpose()).norm();
        if asym > tol * m.norm().max(f64::MIN_POSITIVE) {
            return Err(GridError::InvalidInput(format!(
                "matrix is not symmetric (defect {asym:e})"
            )));
        }
        let s = (m + m.transpose()) * 0.5;
        Ok(SymMat3 {
            xx: s[(0, 0)],
            yy: s[(1, 1)],
            zz: s[(2, 2)],
            xy: s[(0, 1)],
            xz: s[(0, 2)],
            yz: s[(1, 2)],
        })
    }

    pub fn to_mat3(&self) -> Mat3 {
        Mat3::new(
            self.xx, self.xy, self.xz, self.xy, self.yy, self.yz, self.xz, self.yz, self.zz,
        )
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        match (a.min(b), a.max(b)) {
            (0, 0) => self.xx,
            (1, 1) => self.yy,
            (2, 2) => self.zz,
            (0, 1) => self.xy,
            (0, 2) => self.xz,
            _ => self.yz,
        }
    }

    #[inline]
    pub fn mul(&self, v: &Vec3) -> Vec3 {
        Vec3::new(
            self.xx * v.x + self.xy * v.y + self.xz * v.z,
            self.xy * v.x + self.yy * v.y + self.yz * v.z,
            self.xz * v.x + self.yz * v.y + self.zz * v.z,
        )
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.to_mat3().symmetric_eigenvalues().min()
    }

    pub fn scaled(&self, s: f64) -> Self {
        SymMat3 {
            xx: self.xx * s,
            yy: self.yy * s,
            zz: self.zz * s,
            xy: self.xy * s,
            xz: self.xz * s,
            yz: self.yz * s,
        }
    }

    pub fn add_scaled(&mut self, other: &SymMat3, s: f64) {
        self.xx += other.xx * s;
        self.yy += other.yy * s;
        self.zz += other.zz * s;
        self.xy += other.xy * s;
        self.xz += other.xz * s;
        self.yz += other.yz * s;
    }

    pub fn is_finite(&self) -> bool {
        [self.xx, self.yy, self.zz, self.xy, self.xz, self.yz]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Cell-centred force density and resistance density of the limit system.
#[derive(Debug, Clone, PartialEq)]
pub struct BrinkmanFields {
    pub grid: Grid,
    pub f_bar: Vec<Vec3>,
    pub m_bar: Vec<SymMat3>,
}

impl BrinkmanFields {
    pub fn zeros(grid: Grid) -> Self {
        BrinkmanFields {
            f_bar: vec![Vec3::zeros(); grid.cells()],
            m_bar: vec![SymMat3::default(); grid.cells()],
            grid,
        }
    }

    /// Sample analytic densities at cell centres.
    pub fn from_fn(grid: Grid, f: impl Fn(&Vec3) -> Vec3, m: impl Fn(&Vec3) -> SymMat3) -> Self {
        let mut out = BrinkmanFields::zeros(grid);
        for k in 0..grid.n[2] {
            for j in 0..grid.n[1] {
                for i in 0..grid.n[0] {
                    let x = grid.cell_center(i, j, k);
                    let c = grid.cell_index(i, j, k);
                    out.f_bar[c] = f(&x);
                    out.m_bar[c] = m(&x);
                }
            }
        }
        out
    }

    /// Check lengths, finiteness and pointwise positive semidefiniteness.
    pub fn validate(&self) -> Result<(), GridError> {
        let n = self.grid.cells();
        if self.f_bar.len() != n || self.m_bar.len() != n {
            return Err(GridError::InvalidInput(format!(
                "fields have {} / {} entries for {n} cells",
                self.f_bar.len(),
                self.m_bar.len()
            )));
        }
        if self.f_bar.iter().any(|v| !v.iter().all(|c| c.is_finite())) || self.m_bar.iter().any(|m| !m.is_finite()) {
            return Err(GridError::InvalidInput("non-finite Brinkman fields".into()));
        }
        for (c, m) in self.m_bar.iter().enumerate() {
            let scale = m.to_mat3().norm();
            if m.min_eigenvalue() < -1e-12 * scale {
                return Err(GridError::InvalidInput(format!(
                    "m_bar is not positive semidefinite in cell {c}"
                )));
            }
        }
        Ok(())
    }

    /// `h^3 sum F_bar`.
    pub fn total_force(&self) -> Vec3 {
        self.f_bar.iter().sum::<Vec3>() * self.grid.cell_volume()
    }

    pub fn total_resistance(&self) -> Mat3 {
        self.m_bar.iter().map(|m| m.to_mat3()).sum::<Mat3>() * self.grid.cell_volume()
    }
}

/// `-Lap u + grad p + M_bar u = F_bar`, `div u = 0`, `u = 0` on the walls.
pub fn solve_brinkman(fields: &BrinkmanFields) -> Result<GridField, GridError> {
    Ok(solve_brinkman_with(fields, &StokesOptions::default())?.0)
}

pub fn solve_brinkman_with(
    fields: &BrinkmanFields,
    opts: &StokesOptions,
) -> Result<(GridField, SolveStats), GridError> {
    fields.validate()?;
    let grid = &fields.grid;
    let forcing: [Vec<f64>; 3] = std::array::from_fn(|a| {
        let fa: Vec<f64> = fields.f_bar.iter().map(|v| v[a]).collect();
        face_average_of_cells(grid, a, &fa)
    });
    let reaction = if fields.m_bar.iter().all(|m| *m == SymMat3::default()) {
        Reaction::None
    } else {
        Reaction::CellTensor(fields.m_bar.clone())
    };
    solve_stokes(grid, &reaction, &forcing, opts)
}

/// Both sides of the discrete energy identity
/// `2 |D u|^2 + int M u.u = int F.u` (cell averages of `u`).
pub fn energy_identity(field: &GridField, fields: &BrinkmanFields) -> (f64, f64) {
    let uc = field.cell_velocities();
    let h3 = field.grid.cell_volume();
    let friction: f64 = uc.iter().zip(&fields.m_bar).map(|(u, m)| u.dot(&m.mul(u))).sum::<f64>() * h3;
    let work: f64 = uc.iter().zip(&fields.f_bar).map(|(u, f)| u.dot(f)).sum::<f64>() * h3;
    (2.0 * energy_norm(field) + friction, work)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;

    #[test]
    fn zero_forcing_gives_zero_field() {
        let g = Grid::with_nx(Aabb::unit(), 16).unwrap();
        let mut f = BrinkmanFields::zeros(g);
        f.m_bar.iter_mut().for_each(|m| *m = SymMat3::identity(5.0));
        let u = solve_brinkman(&f).unwrap();
        assert_eq!(u.max_speed(), 0.0);
        assert!(u.p.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn rejects_bad_tensors() {
        let mut m = Mat3::identity();
        m[(0, 1)] = 0.5;
        assert!(SymMat3::from_mat3(&m, 1e-12).is_err());
        let g = Grid::with_nx(Aabb::unit(), 8).unwrap();
        let mut f = BrinkmanFields::zeros(g);
        f.m_bar[3] = SymMat3::identity(-1.0);
        assert!(f.validate().is_err());
        let s = SymMat3 {
            xx: 1.0,
            yy: 2.0,
            zz: 3.0,
            xy: 0.1,
            xz: 0.2,
            yz: 0.3,
        };
        let v = Vec3::new(1.0, -2.0, 0.5);
        assert!((s.mul(&v) - s.to_mat3() * v).norm() < 1e-15);
        assert_eq!(SymMat3::from_mat3(&s.to_mat3(), 0.0).unwrap(), s);
    }

    #[test]
    fn energy_identity_holds() {
        let g = Grid::with_nx(Aabb::unit(), 16).unwrap();
        let c = Vec3::repeat(0.5);
        let fields = BrinkmanFields::from_fn(
            g,
            |x| {
                let r2 = (x - c).norm_squared();
                Vec3::new(1.0, 0.5, -0.3) * (-r2 / 0.02).exp()
            },
            |x| {
                let mut m = SymMat3::identity(20.0 + 10.0 * x.x);
                m.xy = 3.0;
                m
            },
        );
        let (u, stats) = solve_brinkman_with(&fields, &StokesOptions::default()).unwrap();
        assert!(stats.max_divergence < 1e-8);
        let (lhs, rhs) = energy_identity(&u, &fields);
        assert!((lhs - rhs).abs() < 1e-6 * rhs.abs(), "{lhs} vs {rhs}");
    }
}
