use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::ParticleShape;
use crate::{Mat3, Matrix6};

use super::solver::{force_torque, rigid_basis_motion, ExteriorProblem};
use super::ExteriorError;

/// Slack on the ball bound in [`resistance_bound`], covering discretization error.
pub const RESISTANCE_BOUND_SLACK: f64 = 1.05;

/// Symmetric positive definite 6x6 map from `(ell, omega)` to `(F, T)`,
/// split into blocks `[[M_I, M_II^T], [M_II, M_III]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "RowMajor", from = "RowMajor")]
pub struct ResistanceMatrix {
    pub m: Matrix6,
}

#[derive(Serialize, Deserialize)]
struct RowMajor {
    rows: [[f64; 6]; 6],
}

impl From<ResistanceMatrix> for RowMajor {
    fn from(r: ResistanceMatrix) -> Self {
        RowMajor {
            rows: std::array::from_fn(|i| std::array::from_fn(|j| r.m[(i, j)])),
        }
    }
}

impl From<RowMajor> for ResistanceMatrix {
    fn from(r: RowMajor) -> Self {
        ResistanceMatrix::new(Matrix6::from_fn(|i, j| r.rows[i][j]))
    }
}

fn block(m: &Matrix6, r: usize, c: usize) -> Mat3 {
    m.fixed_view::<3, 3>(r, c).into_owned()
}

impl ResistanceMatrix {
    pub fn new(m: Matrix6) -> Self {
        ResistanceMatrix { m }
    }

    pub fn from_blocks(m_i: &Mat3, m_ii: &Mat3, m_iii: &Mat3) -> Self {
        let mut m = Matrix6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(m_i);
        m.fixed_view_mut::<3, 3>(0, 3).copy_from(&m_ii.transpose());
        m.fixed_view_mut::<3, 3>(3, 0).copy_from(m_ii);
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(m_iii);
        ResistanceMatrix { m }
    }

    /// Isotropic matrix of a sphere of radius `r`.
    pub fn sphere(r: f64) -> Self {
        Self::from_blocks(
            &(Mat3::identity() * 6.0 * PI * r),
            &Mat3::zeros(),
            &(Mat3::identity() * 8.0 * PI * r.powi(3)),
        )
    }

    pub fn m_i(&self) -> Mat3 {
        block(&self.m, 0, 0)
    }

    /// Lower-left block: torque from translation. The force from rotation
    /// is its transpose.
    pub fn m_ii(&self) -> Mat3 {
        block(&self.m, 3, 0)
    }

    pub fn m_iii(&self) -> Mat3 {
        block(&self.m, 3, 3)
    }

    /// `|M - M^T| / |M|` in the Frobenius norm.
    pub fn symmetry_defect(&self) -> f64 {
        (self.m - self.m.transpose()).norm() / self.m.norm()
    }

    pub fn symmetrized(&self) -> Self {
        ResistanceMatrix::new((self.m + self.m.transpose()) * 0.5)
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn eigenvalues(&self) -> [f64; 6] {
        let e = self.symmetrized().m.symmetric_eigenvalues();
        let mut v: [f64; 6] = std::array::from_fn(|i| e[i]);
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn spectral_norm(&self) -> f64 {
        self.m.singular_values().max()
    }

    /// Matrix of the rotated shape `Q B`: `blockdiag(Q,Q) M blockdiag(Q,Q)^T`.
    pub fn conjugated(&self, q: &Mat3) -> Self {
        let mut b = Matrix6::zeros();
        b.fixed_view_mut::<3, 3>(0, 0).copy_from(q);
        b.fixed_view_mut::<3, 3>(3, 3).copy_from(q);
        ResistanceMatrix::new(b * self.m * b.transpose())
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|x| x.is_finite())
    }
}

/// Resistance matrix together with solver diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResistanceComputation {
    pub matrix: ResistanceMatrix,
    pub panel_count: usize,
    pub epsilon: f64,
    /// Relative residuals of the six canonical solves.
    pub residuals: [f64; 6],
}

impl ExteriorProblem {
    /// Six solves with data `K_j`; column `j` holds the force and the torque
    /// about the centroid.
    pub fn resistance(&self) -> Result<ResistanceComputation, ExteriorError> {
        let c = self.center();
        let motions: Vec<_> = (0..6).map(|j| rigid_basis_motion(j, c)).collect();
        let sols = self.solve_many(&motions)?;
        let mut m = Matrix6::zeros();
        let mut residuals = [0.0; 6];
        for (j, s) in sols.iter().enumerate() {
            let (f, t) = force_torque(s, &c);
            for a in 0..3 {
                m[(a, j)] = f[a];
                m[(a + 3, j)] = t[a];
            }
            residuals[j] = s.residual;
        }
        Ok(ResistanceComputation {
            matrix: ResistanceMatrix::new(m),
            panel_count: self.panels().len(),
            epsilon: self.panels().epsilon,
            residuals,
        })
    }
}

pub fn resistance_matrix(shape: &ParticleShape, epsilon_factor: f64) -> Result<ResistanceMatrix, ExteriorError> {
    Ok(ExteriorProblem::new(shape, epsilon_factor)?.resistance()?.matrix)
}

/// Uniform bound on the spectral norm for shapes inside `B(0, r0)`.
///
/// Resistance is monotone under inclusion of bodies, so the ball of radius
/// `r0` dominates; its norm is `max(6 pi r0, 8 pi r0^3)`.
pub fn resistance_bound(r0: f64) -> f64 {
    RESISTANCE_BOUND_SLACK * (6.0 * PI * r0).max(8.0 * PI * r0.powi(3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_ellipsoid_mesh, make_sphere_mesh, rotation_about_axis};
    use crate::Vec3;

    #[test]
    fn blocks_roundtrip() {
        let a = Mat3::new(3.0, 0.1, 0.0, 0.1, 2.0, 0.0, 0.0, 0.0, 1.0);
        let b = Mat3::new(0.0, 0.2, 0.0, 0.0, 0.0, 0.3, 0.1, 0.0, 0.0);
        let c = Mat3::identity() * 4.0;
        let r = ResistanceMatrix::from_blocks(&a, &b, &c);
        assert_eq!(r.m_i(), a);
        assert_eq!(r.m_ii(), b);
        assert_eq!(r.m_iii(), c);
        assert_eq!(r.symmetry_defect(), 0.0);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.starts_with("{\"rows\":[[3.0,0.1,0.0,0.0,0.0,0.1]"));
        assert_eq!(serde_json::from_str::<ResistanceMatrix>(&json).unwrap(), r);
    }

    #[test]
    fn sphere_matrix_is_isotropic() {
        let s = make_sphere_mesh(1.0, 3).unwrap();
        let r = resistance_matrix(&s, 1.0).unwrap();
        assert!((r.m_i() - Mat3::identity() * 6.0 * PI).norm() <= 0.02 * 6.0 * PI);
        assert!(r.m_ii().abs().max() <= 0.01 * 6.0 * PI);
        assert!((r.m_iii() - Mat3::identity() * 8.0 * PI).norm() <= 0.03 * 8.0 * PI);
        assert!(r.symmetry_defect() < 1e-10);
        assert!(r.spectral_norm() <= resistance_bound(1.0));
    }

    #[test]
    fn conjugation_matches_rotated_shape() {
        let s = make_ellipsoid_mesh([1.0, 0.5, 0.5], 2).unwrap();
        let q = rotation_about_axis(&Vec3::new(1.0, 2.0, -0.5), 0.9);
        let rotated = s.rotated(&q);
        let m0 = resistance_matrix(&s, 1.0).unwrap();
        let m1 = resistance_matrix(&rotated, 1.0).unwrap();
        assert!((m0.conjugated(&q).m - m1.m).norm() <= 1e-8 * m0.m.norm());
    }

    #[test]
    fn sphere_closed_form() {
        let r = ResistanceMatrix::sphere(2.0);
        assert!((r.min_eigenvalue() - 12.0 * PI).abs() < 1e-12);
        assert!((r.spectral_norm() - 64.0 * PI).abs() < 1e-10);
    }
}
