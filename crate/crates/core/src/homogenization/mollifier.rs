use serde::{Deserialize, Serialize};

use crate::grid::{BrinkmanFields, Grid, SymMat3};
use crate::{Mat3, Vec3};

use super::{EmpiricalMeasure, HomogenizationError};

/// Relative asymmetry accepted in atom matrices before symmetrization.
const ASYMMETRY_TOLERANCE: f64 = 0.05;

/// Truncated isotropic Gaussian, renormalized per atom on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Mollifier {
    /// Width; `max(2h, delta/2)` when unset.
    pub sigma: Option<f64>,
    /// Support radius in units of `sigma`.
    pub truncation: f64,
}

impl Default for Mollifier {
    fn default() -> Self {
        Mollifier {
            sigma: None,
            truncation: 4.0,
        }
    }
}

impl Mollifier {
    pub fn with_sigma(sigma: f64) -> Self {
        Mollifier {
            sigma: Some(sigma),
            ..Default::default()
        }
    }

    pub fn width(&self, grid: &Grid, delta: f64) -> f64 {
        self.sigma.unwrap_or((2.0 * grid.h).max(delta / 2.0))
    }
}

/// Diagnostics of one assembly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyReport {
    pub sigma: f64,
    /// `h^3 sum f_bar`.
    pub force_total: Vec3,
    /// Direct sum over the atoms.
    pub force_direct: Vec3,
    /// `|force_total - force_direct| / |force_direct|` (absolute if zero).
    pub force_gap: f64,
    /// Same for `h^3 sum m_bar` against `(1/N) sum M_I`, Frobenius norm.
    pub resistance_gap: f64,
    /// Atoms whose support was cut by the walls.
    pub truncated_atoms: usize,
}

/// Cell densities of `(1/N) sum (M_I ell + (1/N) M_II^T omega) delta_{h_i}`
/// and `(1/N) sum M_I delta_{h_i}`, each atom spread by the mollifier.
pub fn assemble_brinkman_fields(
    measure: &EmpiricalMeasure,
    grid: &Grid,
    mollifier: &Mollifier,
) -> Result<(BrinkmanFields, AssemblyReport), HomogenizationError> {
    let sigma = mollifier.width(grid, measure.delta);
    if !(sigma.is_finite() && sigma >= grid.h) {
        return Err(HomogenizationError::MollifierTooNarrow { sigma, h: grid.h });
    }
    if !(mollifier.truncation > 0.0) {
        return Err(HomogenizationError::InvalidParameter(
            "truncation must be positive".into(),
        ));
    }
    let support = mollifier.truncation * sigma;
    let h3 = grid.cell_volume();
    let w = measure.weight();
    let mut fields = BrinkmanFields::zeros(*grid);
    let mut truncated = 0;
    let mut weights = Vec::new();
    for (i, atom) in measure.atoms.iter().enumerate() {
        if !grid.domain.contains(&atom.h) {
            return Err(HomogenizationError::InvalidParameter(format!(
                "atom {i} lies outside the grid box"
            )));
        }
        let m = SymMat3::from_mat3(&atom.m_i, ASYMMETRY_TOLERANCE)?;
        let f = atom.force(measure.n);
        let lo = grid.locate_cell(&(atom.h - Vec3::repeat(support)));
        let hi = grid.locate_cell(&(atom.h + Vec3::repeat(support)));
        if grid.domain.distance_to_boundary(&atom.h) < support {
            truncated += 1;
        }
        weights.clear();
        let mut total = 0.0;
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for ii in lo[0]..=hi[0] {
                    let r2 = (grid.cell_center(ii, j, k) - atom.h).norm_squared();
                    if r2 <= support * support {
                        let g = (-0.5 * r2 / (sigma * sigma)).exp();
                        weights.push((grid.cell_index(ii, j, k), g));
                        total += g;
                    }
                }
            }
        }
        if total == 0.0 {
            return Err(HomogenizationError::MollifierTooNarrow { sigma, h: grid.h });
        }
        let scale = w / (total * h3);
        for &(c, g) in &weights {
            fields.f_bar[c] += f * (g * scale);
            fields.m_bar[c].add_scaled(&m, g * scale);
        }
    }

    let force_total = fields.total_force();
    let force_direct = measure.total_force();
    let gap = |a: f64, b: f64| if b > 0.0 { a / b } else { a };
    let force_gap = gap((force_total - force_direct).norm(), force_direct.norm());
    let m_total = fields.total_resistance();
    let m_direct: Mat3 = measure.total_resistance();
    let m_sym = (m_direct + m_direct.transpose()) * 0.5;
    let resistance_gap = gap((m_total - m_sym).norm(), m_sym.norm());
    Ok((
        fields,
        AssemblyReport {
            sigma,
            force_total,
            force_direct,
            force_gap,
            resistance_gap,
            truncated_atoms: truncated,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::ResistanceMatrix;
    use crate::geometry::{generate_cloud, make_sphere_mesh, Aabb, CloudSpec, VelocityLaw};
    use crate::homogenization::empirical_measure;
    use std::f64::consts::PI;

    fn lattice_measure(n: usize, ell: Vec3) -> EmpiricalMeasure {
        let shapes = [make_sphere_mesh(1.0, 1).unwrap()];
        let spec = CloudSpec::lattice(n, VelocityLaw::translation(ell), 0.4, Aabb::unit());
        let cloud = generate_cloud(&spec, &shapes).unwrap();
        empirical_measure(&cloud, &[ResistanceMatrix::sphere(1.0)]).unwrap()
    }

    #[test]
    fn uniform_lattice_gives_constant_interior_density() {
        let m = lattice_measure(512, Vec3::x());
        let g = Grid::with_nx(Aabb::unit(), 32).unwrap();
        // wider than the lattice spacing 1/8 so the blobs merge
        let (f, rep) = assemble_brinkman_fields(&m, &g, &Mollifier::with_sigma(0.1)).unwrap();
        assert!(rep.force_gap < 1e-10 && rep.resistance_gap < 1e-10, "{rep:?}");
        for c in [g.cell_index(16, 16, 16), g.cell_index(14, 17, 15)] {
            assert!(
                (f.f_bar[c] - Vec3::x() * 6.0 * PI).norm() < 0.02 * 6.0 * PI,
                "{:?}",
                f.f_bar[c]
            );
            assert!((f.m_bar[c].xx - 6.0 * PI).abs() < 0.02 * 6.0 * PI);
            assert!(f.m_bar[c].xy.abs() < 1e-12);
        }
        assert!(f.m_bar.iter().all(|m| m.min_eigenvalue() >= 0.0));
    }

    #[test]
    fn zero_velocities_leave_resistance_unchanged() {
        let g = Grid::with_nx(Aabb::unit(), 16).unwrap();
        let moving = assemble_brinkman_fields(&lattice_measure(8, Vec3::x()), &g, &Mollifier::default())
            .unwrap()
            .0;
        let still = assemble_brinkman_fields(&lattice_measure(8, Vec3::zeros()), &g, &Mollifier::default())
            .unwrap()
            .0;
        assert!(still.f_bar.iter().all(|v| *v == Vec3::zeros()));
        assert_eq!(still.m_bar, moving.m_bar);
    }

    #[test]
    fn rejects_narrow_kernels() {
        let g = Grid::with_nx(Aabb::unit(), 16).unwrap();
        let r = assemble_brinkman_fields(&lattice_measure(8, Vec3::x()), &g, &Mollifier::with_sigma(0.01));
        assert!(matches!(r, Err(HomogenizationError::MollifierTooNarrow { .. })));
    }
}
