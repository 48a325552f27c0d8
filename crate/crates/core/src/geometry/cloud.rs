//! Particle clouds obeying the dilution scaling.

use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mesh::{make_ellipsoid_mesh, make_sphere_mesh, place_particle, ParticleShape, DEFAULT_R0};
use super::off::load_mesh_with_radius;
use super::rigid::{is_rotation, random_rotation, RigidMotion};
use super::GeometryError;
use crate::{Mat3, Vec3};

/// Dilution constant used when none is given.
pub const DEFAULT_C0: f64 = 0.4;
/// Rejection-sampling budget for random clouds.
pub const DEFAULT_ATTEMPT_BUDGET: u64 = 1_000_000;

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn unit() -> Self {
        Aabb::cube(1.0)
    }

    /// `[0, side]^3`
    pub fn cube(side: f64) -> Self {
        Aabb::new(Vec3::zeros(), Vec3::repeat(side))
    }

    /// Cube of the given side centred at `c`.
    pub fn centered_cube(c: Vec3, side: f64) -> Self {
        Aabb::new(c - Vec3::repeat(side / 2.0), c + Vec3::repeat(side / 2.0))
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) / 2.0
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// Distance from an interior point to the boundary.
    pub fn distance_to_boundary(&self, p: &Vec3) -> f64 {
        (0..3)
            .map(|a| (p[a] - self.min[a]).min(self.max[a] - p[a]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|a| self.max[a] > self.min[a] && self.min[a].is_finite() && self.max[a].is_finite())
    }
}

mod row_major {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::Mat3;

    pub fn serialize<S: Serializer>(m: &Mat3, s: S) -> Result<S::Ok, S::Error> {
        let a: [f64; 9] = std::array::from_fn(|k| m[(k / 3, k % 3)]);
        a.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat3, D::Error> {
        let a = <[f64; 9]>::deserialize(d)?;
        Ok(Mat3::from_fn(|i, j| a[3 * i + j]))
    }
}

/// One particle of a cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    /// Centre `h_i`.
    pub h: Vec3,
    /// Rotation `Q_i`, serialised row-major.
    #[serde(with = "row_major")]
    pub q: Mat3,
    /// Translation velocity `ell_i`.
    pub ell: Vec3,
    /// Angular velocity `omega_i`.
    pub omega: Vec3,
    pub shape_id: usize,
}

impl Particle {
    pub fn motion(&self) -> RigidMotion {
        RigidMotion::new(self.ell, self.omega, self.h)
    }
}

/// Where a reference shape comes from; stored in cloud documents so that
/// solvers can rebuild the meshes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSource {
    Sphere { radius: f64, refinement: u32 },
    Ellipsoid { semiaxes: [f64; 3], refinement: u32 },
    Off { path: PathBuf },
}

impl ShapeSource {
    pub fn build(&self, r0: f64) -> Result<ParticleShape, GeometryError> {
        let shape = match self {
            ShapeSource::Sphere { radius, refinement } => make_sphere_mesh(*radius, *refinement)?,
            ShapeSource::Ellipsoid { semiaxes, refinement } => make_ellipsoid_mesh(*semiaxes, *refinement)?,
            ShapeSource::Off { path } => load_mesh_with_radius(path, r0)?,
        };
        shape.check_containment(r0)?;
        Ok(shape)
    }
}

/// N particles in a box with their rigid velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudConfiguration {
    pub n: usize,
    pub c0: f64,
    pub domain: Aabb,
    #[serde(default = "default_r0")]
    pub r0: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shapes: Vec<ShapeSource>,
    pub particles: Vec<Particle>,
}

fn default_r0() -> f64 {
    DEFAULT_R0
}

impl CloudConfiguration {
    /// Minimal separation scale `delta = C0 N^{-1/3}`.
    pub fn delta(&self) -> f64 {
        self.c0 * (self.n as f64).powf(-1.0 / 3.0)
    }

    /// `(1/N) sum (|ell_i|^2 + |omega_i / N|^2)`
    pub fn velocity_statistic(&self) -> f64 {
        velocity_statistic(&self.particles)
    }

    pub fn motion(&self, i: usize) -> RigidMotion {
        self.particles[i].motion()
    }

    /// Build the reference meshes listed in the document.
    pub fn build_shapes(&self) -> Result<Vec<ParticleShape>, GeometryError> {
        self.shapes.iter().map(|s| s.build(self.r0)).collect()
    }

    /// Physical surface of particle `i`.
    pub fn placed_shape(&self, i: usize, shapes: &[ParticleShape]) -> Result<ParticleShape, GeometryError> {
        let p = &self.particles[i];
        let shape = shapes
            .get(p.shape_id)
            .ok_or_else(|| GeometryError::Invariant(format!("particle {i} references missing shape {}", p.shape_id)))?;
        place_particle(shape, self.n, &p.h, &p.q)
    }

    /// Check every dilution and geometric invariant by brute force.
    pub fn validate(&self, shapes: &[ParticleShape]) -> Result<(), GeometryError> {
        if self.n == 0 || self.particles.len() != self.n {
            return Err(GeometryError::Invariant(format!(
                "n = {} but {} particle records",
                self.n,
                self.particles.len()
            )));
        }
        if !self.domain.is_valid() {
            return Err(GeometryError::Invariant("empty or non-finite domain".into()));
        }
        let delta = self.delta();
        let radii: Vec<f64> = self
            .particles
            .iter()
            .map(|p| {
                shapes
                    .get(p.shape_id)
                    .map(|s| s.bounding_radius() / self.n as f64)
                    .ok_or_else(|| GeometryError::Invariant(format!("missing shape {}", p.shape_id)))
            })
            .collect::<Result<_, _>>()?;
        for (i, p) in self.particles.iter().enumerate() {
            if !(p.motion().is_finite() && p.h.iter().all(|c| c.is_finite())) {
                return Err(GeometryError::Invariant(format!("particle {i} has non-finite data")));
            }
            if let Err(d) = is_rotation(&p.q, 1e-12) {
                return Err(GeometryError::NotRotation(d));
            }
            if !self.domain.contains(&p.h) {
                return Err(GeometryError::Invariant(format!("particle {i} outside the domain")));
            }
            let wall = self.domain.distance_to_boundary(&p.h);
            if wall < delta * (1.0 - 1e-12) {
                return Err(GeometryError::Invariant(format!(
                    "particle {i} is {wall} from the wall, below delta = {delta}"
                )));
            }
            if wall <= radii[i] {
                return Err(GeometryError::Invariant(format!("particle {i} crosses the wall")));
            }
        }
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let d = (self.particles[i].h - self.particles[j].h).norm();
                if d < delta * (1.0 - 1e-12) {
                    return Err(GeometryError::Invariant(format!(
                        "particles {i} and {j} are {d} apart, below delta = {delta}"
                    )));
                }
                if d <= radii[i] + radii[j] {
                    return Err(GeometryError::Invariant(format!("particles {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cloud serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| GeometryError::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }
}

fn velocity_statistic(particles: &[Particle]) -> f64 {
    let n = particles.len().max(1) as f64;
    particles
        .iter()
        .map(|p| p.ell.norm_squared() + (p.omega / n).norm_squared())
        .sum::<f64>()
        / n
}

/// How centres are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Placement {
    /// Regular `k x k x k` lattice, centres half a spacing from the walls.
    #[default]
    Lattice,
    /// Rejection sampling with a fixed seed.
    Random { seed: u64 },
}

/// Orientation of the particles.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum OrientationLaw {
    #[default]
    Identity,
    Random {
        seed: u64,
    },
}

/// Per-particle rigid velocity rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum VelocityLaw {
    /// Same translation and rotation for every particle.
    Constant { ell: Vec3, omega: Vec3 },
    /// The cloud rotates rigidly with angular velocity `angular` about
    /// `center` (domain centre when absent): `ell_i = angular x (h_i - c)` and
    /// each particle spins with `omega_i = N * angular`, so that `omega_i / N`
    /// stays of order one.
    SolidRotation { angular: Vec3, center: Option<Vec3> },
    /// Independent random unit vectors for `ell_i` and `omega_i / N`.
    RandomUnit { seed: u64 },
}

impl VelocityLaw {
    pub fn translation(ell: Vec3) -> Self {
        VelocityLaw::Constant {
            ell,
            omega: Vec3::zeros(),
        }
    }

    fn assign(&self, particles: &mut [Particle], domain: &Aabb) {
        let n = particles.len() as f64;
        match *self {
            VelocityLaw::Constant { ell, omega } => {
                for p in particles {
                    p.ell = ell;
                    p.omega = omega;
                }
            }
            VelocityLaw::SolidRotation { angular, center } => {
                let c = center.unwrap_or_else(|| domain.center());
                for p in particles {
                    p.ell = angular.cross(&(p.h - c));
                    p.omega = angular * n;
                }
            }
            VelocityLaw::RandomUnit { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0005_eed0_f7e1_0c17);
                for p in particles {
                    p.ell = random_unit(&mut rng);
                    p.omega = random_unit(&mut rng) * n;
                }
            }
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let r = v.norm();
        if r > 1e-3 && r <= 1.0 {
            return v / r;
        }
    }
}

/// Everything needed to generate a cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudSpec {
    pub n: usize,
    pub placement: Placement,
    pub velocity_law: VelocityLaw,
    #[serde(default)]
    pub orientation: OrientationLaw,
    pub c0: f64,
    pub domain: Aabb,
    #[serde(default = "default_budget")]
    pub attempt_budget: u64,
    #[serde(default = "default_r0")]
    pub r0: f64,
}

fn default_budget() -> u64 {
    DEFAULT_ATTEMPT_BUDGET
}

impl CloudSpec {
    pub fn lattice(n: usize, velocity_law: VelocityLaw, c0: f64, domain: Aabb) -> Self {
        CloudSpec {
            n,
            placement: Placement::Lattice,
            velocity_law,
            orientation: OrientationLaw::Identity,
            c0,
            domain,
            attempt_budget: DEFAULT_ATTEMPT_BUDGET,
            r0: DEFAULT_R0,
        }
    }

    pub fn random(n: usize, seed: u64, velocity_law: VelocityLaw, c0: f64, domain: Aabb) -> Self {
        CloudSpec {
            placement: Placement::Random { seed },
            orientation: OrientationLaw::Random { seed },
            ..CloudSpec::lattice(n, velocity_law, c0, domain)
        }
    }
}

/// Generate a cloud and check all of its invariants.
///
/// Shapes are assigned round-robin (`shape_id = i mod shapes.len()`).
pub fn generate_cloud(spec: &CloudSpec, shapes: &[ParticleShape]) -> Result<CloudConfiguration, GeometryError> {
    if spec.n == 0 {
        return Err(GeometryError::InvalidParameter("n must be >= 1".into()));
    }
    if shapes.is_empty() {
        return Err(GeometryError::InvalidParameter("at least one shape is required".into()));
    }
    if !(spec.c0 > 0.0 && spec.c0.is_finite()) {
        return Err(GeometryError::InvalidParameter(format!(
            "c0 must be positive, got {}",
            spec.c0
        )));
    }
    if !spec.domain.is_valid() {
        return Err(GeometryError::InvalidParameter("invalid domain".into()));
    }
    for s in shapes {
        s.check_containment(spec.r0)?;
    }
    let n = spec.n;
    let delta = spec.c0 * (n as f64).powf(-1.0 / 3.0);
    let radius_of = |i: usize| shapes[i % shapes.len()].bounding_radius() / n as f64;

    let centers = match spec.placement {
        Placement::Lattice => lattice_centers(n, &spec.domain, delta)?,
        Placement::Random { seed } => random_centers(n, seed, &spec.domain, delta, spec.attempt_budget, &radius_of)?,
    };

    let mut orient_rng = match spec.orientation {
        OrientationLaw::Identity => None,
        OrientationLaw::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed ^ 0x01e4_7a7e)),
    };
    let mut particles: Vec<Particle> = centers
        .into_iter()
        .enumerate()
        .map(|(i, h)| Particle {
            h,
            q: orient_rng.as_mut().map(random_rotation).unwrap_or_else(Mat3::identity),
            ell: Vec3::zeros(),
            omega: Vec3::zeros(),
            shape_id: i % shapes.len(),
        })
        .collect();
    spec.velocity_law.assign(&mut particles, &spec.domain);

    let cloud = CloudConfiguration {
        n,
        c0: spec.c0,
        domain: spec.domain,
        r0: spec.r0,
        shapes: Vec::new(),
        particles,
    };
    cloud.validate(shapes).map_err(|e| match e {
        GeometryError::Invariant(m) => GeometryError::Infeasible(m),
        other => other,
    })?;
    Ok(cloud)
}

fn lattice_centers(n: usize, domain: &Aabb, delta: f64) -> Result<Vec<Vec3>, GeometryError> {
    let k = (n as f64).cbrt().round() as usize;
    if k.pow(3) != n {
        return Err(GeometryError::InvalidParameter(format!(
            "lattice placement needs a perfect cube, got n = {n}"
        )));
    }
    let spacing = domain.extent() / k as f64;
    let min_spacing = spacing.min();
    if min_spacing < delta || min_spacing / 2.0 < delta {
        return Err(GeometryError::Infeasible(format!(
            "lattice spacing {min_spacing} (wall distance {}) cannot honour delta = {delta}",
            min_spacing / 2.0
        )));
    }
    let mut centers = Vec::with_capacity(n);
    for kz in 0..k {
        for ky in 0..k {
            for kx in 0..k {
                centers.push(Vec3::new(
                    domain.min.x + (kx as f64 + 0.5) * spacing.x,
                    domain.min.y + (ky as f64 + 0.5) * spacing.y,
                    domain.min.z + (kz as f64 + 0.5) * spacing.z,
                ));
            }
        }
    }
    Ok(centers)
}

fn random_centers(
    n: usize,
    seed: u64,
    domain: &Aabb,
    delta: f64,
    budget: u64,
    radius_of: &dyn Fn(usize) -> f64,
) -> Result<Vec<Vec3>, GeometryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec3> = Vec::with_capacity(n);
    let mut attempts = 0u64;
    while centers.len() < n {
        if attempts >= budget {
            return Err(GeometryError::Infeasible(format!(
                "placed {} of {n} particles after {budget} attempts",
                centers.len()
            )));
        }
        attempts += 1;
        let i = centers.len();
        let margin = delta.max(radius_of(i) * (1.0 + 1e-9));
        let mut h = Vec3::zeros();
        let mut ok = true;
        for a in 0..3 {
            let (lo, hi) = (domain.min[a] + margin, domain.max[a] - margin);
            if lo >= hi {
                ok = false;
                break;
            }
            h[a] = rng.random_range(lo..hi);
        }
        if !ok {
            return Err(GeometryError::Infeasible(format!(
                "no room for centres at distance {margin} from the walls"
            )));
        }
        let fits = centers.iter().enumerate().all(|(j, c)| {
            let d = (c - h).norm();
            d >= delta && d > radius_of(i) + radius_of(j)
        });
        if fits {
            centers.push(h);
        }
    }
    Ok(centers)
}
