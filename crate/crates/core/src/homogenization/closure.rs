use serde::{Deserialize, Serialize};

use crate::geometry::{CloudConfiguration, ParticleShape};
use crate::grid::{local_mean_velocity, particle_force, GridField, PenalizationMask};
use crate::Vec3;

use super::{EmpiricalMeasure, HomogenizationError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureEntry {
    /// `N` times the force the particle exerts on the fluid.
    pub resolved: Vec3,
    /// `M_I (ell - m) + M_II^T omega / N`.
    pub predicted: Vec3,
    /// Mean fluid velocity `m` around the particle.
    pub local_mean: Vec3,
    pub mismatch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureStats {
    pub entries: Vec<ClosureEntry>,
    pub median: f64,
}

/// `|a - b| / |a|`; zero when both vanish.
pub fn relative_mismatch(resolved: &Vec3, predicted: &Vec3) -> f64 {
    let d = (resolved - predicted).norm();
    if d == 0.0 {
        return 0.0;
    }
    let scale = resolved.norm();
    if scale > 0.0 {
        d / scale
    } else {
        1.0
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Compare each particle's resolved momentum exchange with the leading-order
/// drag predicted from its resistance blocks and the local mean velocity.
pub fn drag_closure_check(
    field: &GridField,
    cloud: &CloudConfiguration,
    shapes: &[ParticleShape],
    measure: &EmpiricalMeasure,
    mask: &PenalizationMask,
) -> Result<ClosureStats, HomogenizationError> {
    if measure.atoms.len() != cloud.particles.len() {
        return Err(HomogenizationError::InvalidParameter(
            "measure and cloud sizes differ".into(),
        ));
    }
    let n = cloud.n as f64;
    let entries = measure
        .atoms
        .iter()
        .enumerate()
        .map(|(i, atom)| {
            let (force, _) = particle_force(field, cloud, mask, i)?;
            let m = local_mean_velocity(field, cloud, shapes, i)?;
            let resolved = force * n;
            let predicted = atom.m_i * (atom.ell - m) + atom.m_ii.transpose() * atom.omega / n;
            Ok(ClosureEntry {
                resolved,
                predicted,
                local_mean: m,
                mismatch: relative_mismatch(&resolved, &predicted),
            })
        })
        .collect::<Result<Vec<_>, HomogenizationError>>()?;
    let median = median(&entries.iter().map(|e| e.mismatch).collect::<Vec<_>>());
    Ok(ClosureStats { entries, median })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mismatch_and_median() {
        assert_eq!(relative_mismatch(&Vec3::zeros(), &Vec3::zeros()), 0.0);
        assert_eq!(relative_mismatch(&Vec3::x(), &(Vec3::x() * 0.5)), 0.5);
        assert_eq!(relative_mismatch(&Vec3::zeros(), &Vec3::x()), 1.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[]), 0.0);
    }
}
