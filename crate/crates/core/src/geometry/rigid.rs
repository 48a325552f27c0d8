use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::{Mat3, Vec3};

/// Rigid velocity field `ell + omega x (x - center)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    pub ell: Vec3,
    pub omega: Vec3,
    pub center: Vec3,
}

impl RigidMotion {
    pub fn new(ell: Vec3, omega: Vec3, center: Vec3) -> Self {
        RigidMotion { ell, omega, center }
    }

    pub fn translation(ell: Vec3) -> Self {
        RigidMotion::new(ell, Vec3::zeros(), Vec3::zeros())
    }

    pub fn rotation(omega: Vec3) -> Self {
        RigidMotion::new(Vec3::zeros(), omega, Vec3::zeros())
    }

    pub fn zero() -> Self {
        RigidMotion::new(Vec3::zeros(), Vec3::zeros(), Vec3::zeros())
    }

    /// Motion with generalised velocity `(ell, omega)` stacked as a 6-vector.
    pub fn from_generalized(v: &nalgebra::Vector6<f64>, center: Vec3) -> Self {
        RigidMotion::new(Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5]), center)
    }

    pub fn generalized(&self) -> nalgebra::Vector6<f64> {
        nalgebra::Vector6::new(
            self.ell.x,
            self.ell.y,
            self.ell.z,
            self.omega.x,
            self.omega.y,
            self.omega.z,
        )
    }

    #[inline]
    pub fn velocity_at(&self, x: &Vec3) -> Vec3 {
        self.ell + self.omega.cross(&(x - self.center))
    }

    pub fn is_finite(&self) -> bool {
        self.ell
            .iter()
            .chain(self.omega.iter())
            .chain(self.center.iter())
            .all(|c| c.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        RigidMotion::new(self.ell * s, self.omega * s, self.center)
    }
}

/// `Ok(())` if `q` is orthogonal with determinant one to within `tol`;
/// otherwise the size of the defect.
pub fn is_rotation(q: &Mat3, tol: f64) -> Result<(), f64> {
    let defect = (q * q.transpose() - Mat3::identity()).abs().max();
    let det = (q.determinant() - 1.0).abs();
    let worst = defect.max(det);
    if worst <= tol && q.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(worst)
    }
}

/// Rodrigues rotation about `axis` (need not be normalised) by `angle`.
pub fn rotation_about_axis(axis: &Vec3, angle: f64) -> Mat3 {
    let k = axis.normalize();
    let kx = Mat3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Mat3::identity() + angle.sin() * kx + (1.0 - angle.cos()) * kx * kx
}

/// Uniformly distributed rotation (Shoemake's unit-quaternion construction).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Mat3 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let u3: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
        b * u3.cos(),
        a * u2.sin(),
        a * u2.cos(),
        b * u3.sin(),
    ));
    let m = q.to_rotation_matrix().into_inner();
    // re-orthonormalise so the 1e-12 rotation checks hold after rounding
    let svd = m.svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rigid_velocity_field() {
        let m = RigidMotion::new(Vec3::x(), Vec3::z(), Vec3::new(1.0, 0.0, 0.0));
        let v = m.velocity_at(&Vec3::new(1.0, 1.0, 0.0));
        // (1,0,0) + z x (0,1,0) = 0
        assert!(v.norm() < 1e-15);
        assert_eq!(RigidMotion::from_generalized(&m.generalized(), m.center), m);
    }

    #[test]
    fn random_rotations_are_proper() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q = random_rotation(&mut rng);
            assert!(is_rotation(&q, 1e-12).is_ok());
        }
        let r = rotation_about_axis(&Vec3::new(0.0, 0.0, 2.0), std::f64::consts::FRAC_PI_2);
        assert!((r * Vec3::x() - Vec3::y()).norm() < 1e-15);
        let mut refl = Mat3::identity();
        refl[(2, 2)] = -1.0;
        assert!(is_rotation(&refl, 1e-12).is_err());
    }
}
