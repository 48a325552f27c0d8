use std::f64::consts::PI;

use crate::geometry::ParticleShape;
use crate::{Mat3, Vec3};

use super::ExteriorError;

/// Collocation panels of a triangulated surface.
#[derive(Debug, Clone)]
pub struct PanelDiscretization {
    pub centers: Vec<Vec3>,
    pub areas: Vec<f64>,
    pub normals: Vec<Vec3>,
    /// Regularization length.
    pub epsilon: f64,
    /// Mean longest edge of the panels.
    pub mean_diameter: f64,
}

impl PanelDiscretization {
    /// Panels at triangle centroids with `epsilon = epsilon_factor * mean diameter`.
    pub fn from_shape(shape: &ParticleShape, epsilon_factor: f64) -> Result<Self, ExteriorError> {
        if !(epsilon_factor > 0.0 && epsilon_factor <= 2.0) {
            return Err(ExteriorError::InvalidParameter(format!(
                "epsilon factor must lie in (0, 2], got {epsilon_factor}"
            )));
        }
        let n = shape.triangles().len();
        let mut centers = Vec::with_capacity(n);
        let mut areas = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        let mut diam = 0.0;
        for t in 0..n {
            let [a, b, c] = shape.triangle(t);
            let cr = (b - a).cross(&(c - a));
            let area = 0.5 * cr.norm();
            if !(area > 0.0) {
                return Err(ExteriorError::Singular(format!("panel {t} has zero area")));
            }
            centers.push((a + b + c) / 3.0);
            areas.push(area);
            normals.push(cr / (2.0 * area));
            diam += (b - a).norm().max((c - b).norm()).max((a - c).norm());
        }
        let mean_diameter = diam / n as f64;
        Ok(PanelDiscretization {
            centers,
            areas,
            normals,
            epsilon: epsilon_factor * mean_diameter,
            mean_diameter,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// 3x3 block `(k, j)` of the collocation operator acting on `g_j = f_j A_j`.
    ///
    /// Diagonal blocks carry a tangential self-correction
    /// `(eps/4)(I - n n^T)/A_k` which keeps the operator positive definite
    /// while cancelling the leading regularization error of the blob sum.
    #[inline]
    pub fn block(&self, k: usize, j: usize) -> Mat3 {
        let s = regularized_stokeslet(&(self.centers[k] - self.centers[j]), self.epsilon);
        if k == j {
            let n = self.normals[k];
            s + (Mat3::identity() - n * n.transpose()) * (self.epsilon / (4.0 * self.areas[k]))
        } else {
            s
        }
    }
}

/// Regularized Oseen tensor with unit viscosity:
/// `[(r^2 + 2 eps^2) I + r r^T] / (8 pi (r^2 + eps^2)^{3/2})`.
#[inline]
pub fn regularized_stokeslet(r: &Vec3, eps: f64) -> Mat3 {
    let r2 = r.norm_squared();
    let e2 = eps * eps;
    let d = r2 + e2;
    let inv = 1.0 / (8.0 * PI * d * d.sqrt());
    let mut m = r * r.transpose();
    for a in 0..3 {
        m[(a, a)] += r2 + 2.0 * e2;
    }
    m * inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_sphere_mesh;

    #[test]
    fn sphere_panels_cover_the_surface() {
        let s = make_sphere_mesh(1.0, 3).unwrap();
        let p = PanelDiscretization::from_shape(&s, 1.0).unwrap();
        assert_eq!(p.len(), 1280);
        assert!((p.total_area() - 4.0 * PI).abs() / (4.0 * PI) < 0.01);
        assert!((p.epsilon - p.mean_diameter).abs() < 1e-15);
        for (c, n) in p.centers.iter().zip(&p.normals) {
            assert!(c.normalize().dot(n) > 0.99);
        }
    }

    #[test]
    fn epsilon_factor_range() {
        let s = make_sphere_mesh(1.0, 1).unwrap();
        assert!(PanelDiscretization::from_shape(&s, 0.0).is_err());
        assert!(PanelDiscretization::from_shape(&s, 2.5).is_err());
        assert!(PanelDiscretization::from_shape(&s, 2.0).is_ok());
    }

    #[test]
    fn kernel_approaches_oseen_far_away() {
        let r = Vec3::new(3.0, -4.0, 12.0);
        let rn = r.norm();
        let oseen = (Mat3::identity() / rn + r * r.transpose() / rn.powi(3)) / (8.0 * PI);
        let s = regularized_stokeslet(&r, 1e-3);
        assert!((s - oseen).norm() / oseen.norm() < 1e-7);
        let s0 = regularized_stokeslet(&Vec3::zeros(), 0.5);
        assert!((s0 - Mat3::identity() / (4.0 * PI * 0.5)).norm() < 1e-15);
    }
}
