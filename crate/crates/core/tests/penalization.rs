use std::f64::consts::PI;

use stokes_brinkman::geometry::{make_sphere_mesh, Aabb, CloudConfiguration, Particle, ParticleShape};
use stokes_brinkman::grid::{self, Grid, NBodySolution, StokesOptions};
use stokes_brinkman::{Mat3, Vec3};

const R: f64 = 0.1;

fn single(h: Vec3, ell: Vec3, omega: Vec3) -> CloudConfiguration {
    CloudConfiguration {
        n: 1,
        c0: 0.4,
        domain: Aabb::unit(),
        r0: 1.0,
        shapes: vec![],
        particles: vec![Particle {
            h,
            q: Mat3::identity(),
            ell,
            omega,
            shape_id: 0,
        }],
    }
}

fn solve(cloud: &CloudConfiguration, shape: &ParticleShape, eta_factor: f64) -> NBodySolution {
    let g = Grid::with_nx(Aabb::unit(), 40).unwrap();
    grid::solve_nbody_with(
        cloud,
        std::slice::from_ref(shape),
        &g,
        eta_factor * g.h * g.h,
        &StokesOptions::default(),
    )
    .unwrap()
}

#[test]
fn empty_cloud_leaves_fluid_at_rest() {
    let mut cloud = single(Vec3::repeat(0.5), Vec3::x(), Vec3::zeros());
    cloud.particles.clear();
    let g = Grid::with_nx(Aabb::unit(), 16).unwrap();
    let u = grid::solve_nbody(&cloud, &[], &g, 0.1 * g.h * g.h).unwrap();
    assert_eq!(u.max_speed(), 0.0);
}

#[test]
fn rigid_violation_shrinks_with_eta() {
    let shape = make_sphere_mesh(R, 3).unwrap();
    let cloud = single(Vec3::repeat(0.5), Vec3::x(), Vec3::zeros());
    let a = solve(&cloud, &shape, 0.2);
    let b = solve(&cloud, &shape, 0.1);
    let ratio = b.max_violation / a.max_violation;
    assert!(ratio < 0.7, "violation {} -> {}", a.max_violation, b.max_violation);
    assert!(b.violation_constant.is_finite());
}

#[test]
fn spinning_sphere_torque() {
    let shape = make_sphere_mesh(R, 3).unwrap();
    let cloud = single(Vec3::repeat(0.5), Vec3::zeros(), Vec3::z());
    let sol = solve(&cloud, &shape, 0.1);
    let (f, t) = grid::particle_force(&sol.field, &cloud, &sol.mask, 0).unwrap();
    let exact = 8.0 * PI * R.powi(3);
    assert!((t.z / exact - 1.0).abs() < 0.35, "torque {t} vs {exact}");
    assert!(t.x.abs() + t.y.abs() < 1e-6 * t.z.abs());
    assert!(f.norm() < 1e-6 * t.z.abs() / R);
}

#[test]
fn mirrored_configuration_mirrors_the_force() {
    let shape = make_sphere_mesh(R, 3).unwrap();
    let a = single(Vec3::new(0.4, 0.5, 0.5), Vec3::new(1.0, 0.5, 0.0), Vec3::zeros());
    let b = single(Vec3::new(1.0 - 0.4, 0.5, 0.5), Vec3::new(-1.0, 0.5, 0.0), Vec3::zeros());
    let sa = solve(&a, &shape, 0.1);
    let sb = solve(&b, &shape, 0.1);
    let (fa, _) = grid::particle_force(&sa.field, &a, &sa.mask, 0).unwrap();
    let (fb, _) = grid::particle_force(&sb.field, &b, &sb.mask, 0).unwrap();
    assert!(
        (fb - Vec3::new(-fa.x, fa.y, fa.z)).norm() < 1e-6 * fa.norm(),
        "{fa} vs {fb}"
    );
    assert!(fa.x > 0.0 && fa.y > 0.0);
}
