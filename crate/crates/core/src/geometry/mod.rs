//! Particle shapes, rigid motions and particle clouds.

mod cloud;
mod mesh;
mod off;
mod rigid;

pub use cloud::{
    generate_cloud, Aabb, CloudConfiguration, CloudSpec, OrientationLaw, Particle, Placement, ShapeSource, VelocityLaw,
    DEFAULT_ATTEMPT_BUDGET, DEFAULT_C0,
};
pub use mesh::{make_ellipsoid_mesh, make_sphere_mesh, place_particle, ParticleShape, DEFAULT_R0};
pub use off::{load_mesh, load_mesh_with_radius, parse_off, write_off};
pub use rigid::{is_rotation, random_rotation, rotation_about_axis, RigidMotion};

use thiserror::Error;

/// Errors raised while building or validating geometry.
#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("OFF parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("surface is not closed: edge ({0}, {1}) is used by {2} triangle(s)")]
    OpenSurface(usize, usize, usize),
    #[error("surface is not consistently oriented at edge ({0}, {1})")]
    NonOrientable(usize, usize),
    #[error("degenerate mesh: {0}")]
    Degenerate(String),
    #[error("vertex at distance {dist} exceeds containment radius R0 = {r0}")]
    Containment { dist: f64, r0: f64 },
    #[error("matrix is not a rotation (orthogonality defect {0:e})")]
    NotRotation(f64),
    #[error("dilution constraint infeasible: {0}")]
    Infeasible(String),
    #[error("cloud invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
