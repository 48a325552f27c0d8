use serde::{Deserialize, Serialize};

use crate::exterior::ResistanceMatrix;
use crate::geometry::{Aabb, CloudConfiguration};
use crate::{Mat3, Vec3};

use super::HomogenizationError;

/// One particle of the empirical measure; every atom has weight `1/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub h: Vec3,
    pub ell: Vec3,
    pub omega: Vec3,
    /// Translation block of the rotated reference shape.
    pub m_i: Mat3,
    /// Torque-from-translation block; force from rotation is its transpose.
    pub m_ii: Mat3,
}

impl Atom {
    /// `M_I ell + (1/N) M_II^T omega`
    pub fn force(&self, n: usize) -> Vec3 {
        self.m_i * self.ell + self.m_ii.transpose() * self.omega / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub n: usize,
    pub domain: Aabb,
    /// Separation scale of the cloud.
    pub delta: f64,
    pub atoms: Vec<Atom>,
}

impl EmpiricalMeasure {
    pub fn weight(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// `max_i (|M_I^i| + |M_II^i|)` with Frobenius norms.
    pub fn matrix_bound(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.m_i.norm() + a.m_ii.norm())
            .fold(0.0, f64::max)
    }

    /// `(1/N) sum (|ell_i|^2 + |omega_i / N|^2)`
    pub fn velocity_statistic(&self) -> f64 {
        let n = self.n as f64;
        self.atoms
            .iter()
            .map(|a| a.ell.norm_squared() + (a.omega / n).norm_squared())
            .sum::<f64>()
            / n
    }

    /// Total force `(1/N) sum (M_I ell + (1/N) M_II^T omega)`.
    pub fn total_force(&self) -> Vec3 {
        self.atoms.iter().map(|a| a.force(self.n)).sum::<Vec3>() * self.weight()
    }

    /// Total resistance `(1/N) sum M_I`.
    pub fn total_resistance(&self) -> Mat3 {
        self.atoms.iter().map(|a| a.m_i).sum::<Mat3>() * self.weight()
    }

    /// First moment in `ell`: `(1/N) sum M_I ell`.
    pub fn first_moment(&self) -> Vec3 {
        self.atoms.iter().map(|a| a.m_i * a.ell).sum::<Vec3>() * self.weight()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("measure serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Atoms carry the blocks of `blockdiag(Q, Q) M blockdiag(Q, Q)^T`, `M` the
/// matrix of the particle's reference shape.
pub fn empirical_measure(
    cloud: &CloudConfiguration,
    matrices: &[ResistanceMatrix],
) -> Result<EmpiricalMeasure, HomogenizationError> {
    if cloud.n == 0 || cloud.particles.len() != cloud.n {
        return Err(HomogenizationError::InvalidParameter(format!(
            "cloud has n = {} but {} particles",
            cloud.n,
            cloud.particles.len()
        )));
    }
    let atoms = cloud
        .particles
        .iter()
        .map(|p| {
            let m = matrices
                .get(p.shape_id)
                .ok_or(HomogenizationError::MissingMatrix(p.shape_id))?
                .conjugated(&p.q);
            Ok(Atom {
                h: p.h,
                ell: p.ell,
                omega: p.omega,
                m_i: m.m_i(),
                m_ii: m.m_ii(),
            })
        })
        .collect::<Result<Vec<_>, HomogenizationError>>()?;
    Ok(EmpiricalMeasure {
        n: cloud.n,
        domain: cloud.domain,
        delta: cloud.delta(),
        atoms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_cloud, make_sphere_mesh, rotation_about_axis, CloudSpec, VelocityLaw};

    #[test]
    fn sphere_atoms_are_isotropic() {
        let shapes = [make_sphere_mesh(1.0, 1).unwrap()];
        let spec = CloudSpec::random(8, 3, VelocityLaw::translation(Vec3::x()), 0.4, Aabb::unit());
        let cloud = generate_cloud(&spec, &shapes).unwrap();
        let m = empirical_measure(&cloud, &[ResistanceMatrix::sphere(1.0)]).unwrap();
        assert_eq!(m.atoms.len(), 8);
        for a in &m.atoms {
            assert!((a.m_i - Mat3::identity() * 6.0 * std::f64::consts::PI).norm() < 1e-12);
            assert!(a.m_ii.norm() < 1e-12);
        }
        assert!((m.first_moment() - Vec3::x() * 6.0 * std::f64::consts::PI).norm() < 1e-12);
        assert!(empirical_measure(&cloud, &[]).is_err());
    }

    #[test]
    fn rotation_conjugates_blocks() {
        let q = rotation_about_axis(&Vec3::new(1.0, 2.0, 0.5), 0.7);
        let base = ResistanceMatrix::from_blocks(
            &Mat3::from_diagonal(&Vec3::new(3.0, 2.0, 1.0)),
            &Mat3::new(0.0, 0.1, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0, 0.3),
            &Mat3::identity(),
        );
        let mut cloud = CloudConfiguration {
            n: 1,
            c0: 0.4,
            domain: Aabb::unit(),
            r0: 1.0,
            shapes: vec![],
            particles: vec![],
        };
        cloud.particles.push(crate::geometry::Particle {
            h: Vec3::repeat(0.5),
            q,
            ell: Vec3::x(),
            omega: Vec3::z(),
            shape_id: 0,
        });
        let m = empirical_measure(&cloud, std::slice::from_ref(&base)).unwrap();
        assert_eq!(m.weight(), 1.0);
        assert!((m.atoms[0].m_i - q * base.m_i() * q.transpose()).norm() < 1e-12);
        assert!((m.atoms[0].m_ii - q * base.m_ii() * q.transpose()).norm() < 1e-12);
        let f = m.atoms[0].m_i * Vec3::x() + m.atoms[0].m_ii.transpose() * Vec3::z();
        assert!((m.total_force() - f).norm() < 1e-12);
    }
}
