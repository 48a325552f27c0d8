use crate::geometry::{CloudConfiguration, ParticleShape};
use crate::par;
use crate::Vec3;

use super::field::GridField;
use super::stokes::{solve_stokes, Reaction, SolveStats, StokesOptions};
use super::{unflatten, Grid, GridError};

/// Rasterized particles with their rigid target velocities.
///
/// The indicator is sampled at the velocity nodes (faces), where the
/// penalization acts; `cell_chi` samples cell centres for output.
#[derive(Debug, Clone)]
pub struct PenalizationMask {
    pub grid: Grid,
    pub eta: f64,
    /// Per face: 0 in the fluid, `i + 1` inside particle `i`.
    pub owner: [Vec<u32>; 3],
    /// Rigid velocity component at owned faces (0 elsewhere).
    pub target: [Vec<f64>; 3],
    pub cell_chi: Vec<u8>,
}

impl PenalizationMask {
    pub fn new(cloud: &CloudConfiguration, shapes: &[ParticleShape], grid: &Grid, eta: f64) -> Result<Self, GridError> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(GridError::InvalidInput(format!("eta must be positive, got {eta}")));
        }
        let mut owner: [Vec<u32>; 3] = std::array::from_fn(|a| vec![0; grid.face_count(a)]);
        let mut target: [Vec<f64>; 3] = std::array::from_fn(|a| vec![0.0; grid.face_count(a)]);
        let mut cell_chi = vec![0u8; grid.cells()];
        for (pi, p) in cloud.particles.iter().enumerate() {
            let placed = cloud.placed_shape(pi, shapes)?;
            let tester = placed.inside_tester();
            let motion = p.motion();
            let (lo, hi) = bounding_box(&placed);
            for a in 0..3 {
                let d = grid.face_dims(a);
                let range: [(usize, usize); 3] =
                    std::array::from_fn(|b| node_range(grid, b, a == b, lo[b], hi[b], d[b]));
                for k in range[2].0..range[2].1 {
                    for j in range[1].0..range[1].1 {
                        for i in range[0].0..range[0].1 {
                            let x = grid.face_point(a, i, j, k);
                            if tester.contains(&x) {
                                let idx = i + d[0] * (j + d[1] * k);
                                owner[a][idx] = pi as u32 + 1;
                                target[a][idx] = motion.velocity_at(&x)[a];
                            }
                        }
                    }
                }
            }
            let range: [(usize, usize); 3] =
                std::array::from_fn(|b| node_range(grid, b, false, lo[b], hi[b], grid.n[b]));
            for k in range[2].0..range[2].1 {
                for j in range[1].0..range[1].1 {
                    for i in range[0].0..range[0].1 {
                        if tester.contains(&grid.cell_center(i, j, k)) {
                            cell_chi[grid.cell_index(i, j, k)] = 1;
                        }
                    }
                }
            }
        }
        // wall-normal faces are not unknowns
        for a in 0..3 {
            let d = grid.face_dims(a);
            for idx in 0..owner[a].len() {
                let ijk = unflatten(idx, d);
                if ijk[a] == 0 || ijk[a] == grid.n[a] {
                    owner[a][idx] = 0;
                    target[a][idx] = 0.0;
                }
            }
        }
        Ok(PenalizationMask {
            grid: *grid,
            eta,
            owner,
            target,
            cell_chi,
        })
    }

    /// Number of penalized faces of particle `i`.
    pub fn face_count(&self, i: usize) -> usize {
        let id = i as u32 + 1;
        self.owner.iter().map(|o| o.iter().filter(|&&v| v == id).count()).sum()
    }

    fn reaction(&self) -> Reaction {
        let inv = 1.0 / self.eta;
        Reaction::Face(std::array::from_fn(|a| {
            self.owner[a].iter().map(|&o| if o > 0 { inv } else { 0.0 }).collect()
        }))
    }

    fn forcing(&self) -> [Vec<f64>; 3] {
        let inv = 1.0 / self.eta;
        std::array::from_fn(|a| self.target[a].iter().map(|t| t * inv).collect())
    }

    /// Largest `|u - u_rigid|` over penalized faces (per component).
    pub fn max_violation(&self, field: &GridField) -> f64 {
        (0..3)
            .map(|a| {
                self.owner[a]
                    .iter()
                    .zip(&field.u[a])
                    .zip(&self.target[a])
                    .filter(|((o, _), _)| **o > 0)
                    .map(|((_, u), t)| (u - t).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

fn bounding_box(shape: &ParticleShape) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for v in shape.vertices() {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    (lo, hi)
}

/// Index range of nodes along `axis` whose coordinate may lie in `[lo, hi]`.
fn node_range(grid: &Grid, axis: usize, vertex: bool, lo: f64, hi: f64, len: usize) -> (usize, usize) {
    let off = if vertex { 0.0 } else { 0.5 };
    let o = grid.domain.min[axis];
    let a = ((lo - o) / grid.h - off).floor() - 1.0;
    let b = ((hi - o) / grid.h - off).ceil() + 2.0;
    (a.max(0.0) as usize, (b.max(0.0) as usize).min(len))
}

/// Result of a penalized N-particle solve.
#[derive(Debug, Clone)]
pub struct NBodySolution {
    pub field: GridField,
    pub mask: PenalizationMask,
    pub stats: SolveStats,
    /// Largest rigid-motion violation inside the particles.
    pub max_violation: f64,
    /// `max_violation * h^2 / (eta * U)`, `U` the largest rigid speed.
    pub violation_constant: f64,
}

/// Penalized solve with default tolerances; returns the extended field.
pub fn solve_nbody(
    cloud: &CloudConfiguration,
    shapes: &[ParticleShape],
    grid: &Grid,
    eta: f64,
) -> Result<GridField, GridError> {
    Ok(solve_nbody_with(cloud, shapes, grid, eta, &StokesOptions::default())?.field)
}

pub fn solve_nbody_with(
    cloud: &CloudConfiguration,
    shapes: &[ParticleShape],
    grid: &Grid,
    eta: f64,
    opts: &StokesOptions,
) -> Result<NBodySolution, GridError> {
    if cloud.domain != grid.domain {
        return Err(GridError::InvalidInput("cloud and grid boxes differ".into()));
    }
    if !cloud.particles.is_empty() {
        let max_h = cloud.r0 / cloud.n as f64 / 4.0;
        if grid.h > max_h * (1.0 + 1e-12) {
            return Err(GridError::UnderResolved { h: grid.h, max_h });
        }
    }
    if eta > grid.h * grid.h * (1.0 + 1e-12) {
        return Err(GridError::InvalidInput(format!(
            "eta = {eta} exceeds h^2 = {}",
            grid.h * grid.h
        )));
    }
    let mask = PenalizationMask::new(cloud, shapes, grid, eta)?;
    let (field, stats) = solve_stokes(grid, &mask.reaction(), &mask.forcing(), opts)?;
    let max_violation = mask.max_violation(&field);
    let u_max = mask.target.iter().map(|t| par::max_abs(t)).fold(0.0, f64::max);
    let violation_constant = if u_max > 0.0 {
        max_violation * grid.h * grid.h / (eta * u_max)
    } else {
        0.0
    };
    Ok(NBodySolution {
        field,
        mask,
        stats,
        max_violation,
        violation_constant,
    })
}

/// Force and torque (about `h_i`) exerted by particle `i` on the fluid:
/// `(1/eta) int_{B_i} (u_rigid - u)`.
pub fn particle_force(
    field: &GridField,
    cloud: &CloudConfiguration,
    mask: &PenalizationMask,
    i: usize,
) -> Result<(Vec3, Vec3), GridError> {
    let p = cloud.particles.get(i).ok_or(GridError::IndexOutOfRange(i))?;
    let g = &mask.grid;
    let id = i as u32 + 1;
    let w = g.cell_volume() / mask.eta;
    let mut f = Vec3::zeros();
    let mut t = Vec3::zeros();
    for a in 0..3 {
        let d = g.face_dims(a);
        for (idx, _) in mask.owner[a].iter().enumerate().filter(|(_, &o)| o == id) {
            let ijk = unflatten(idx, d);
            let x = g.face_point(a, ijk[0], ijk[1], ijk[2]);
            let v = Vec3::ith(a, w * (mask.target[a][idx] - field.u[a][idx]));
            f += v;
            t += (x - p.h).cross(&v);
        }
    }
    Ok((f, t))
}
