//! Quick battery of closed-form checks exercising every module.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::exterior::ExteriorProblem;
use crate::exterior::ResistanceMatrix;
use crate::geometry::{
    generate_cloud, make_ellipsoid_mesh, make_sphere_mesh, parse_off, place_particle, Aabb, CloudConfiguration,
    CloudSpec, GeometryError, ParticleShape, RigidMotion, VelocityLaw,
};
use crate::grid::{
    energy_norm, energy_norm_interior, local_mean_velocity, solve_brinkman, solve_nbody, BrinkmanFields, Grid,
    GridField, SymMat3,
};
use crate::homogenization::{
    assemble_brinkman_fields, convergence_study, empirical_measure, ConvergenceReport, HomogenizationError, Mollifier,
    StudySpec,
};
use crate::{Mat3, Vec3};

use super::plot::{emit_plot_data, parse_plot_data};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn() -> Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const CUBE_OFF: &str = "OFF\n8 12 0\n\
-0.5 -0.5 -0.5\n0.5 -0.5 -0.5\n0.5 0.5 -0.5\n-0.5 0.5 -0.5\n\
-0.5 -0.5 0.5\n0.5 -0.5 0.5\n0.5 0.5 0.5\n-0.5 0.5 0.5\n\
3 0 2 1\n3 0 3 2\n3 4 5 6\n3 4 6 7\n3 0 1 5\n3 0 5 4\n\
3 2 3 7\n3 2 7 6\n3 1 2 6\n3 1 6 5\n3 0 4 7\n3 0 7 3\n";

fn shape_from_off(text: &str) -> Result<ParticleShape, GeometryError> {
    let (v, t) = parse_off(text)?;
    ParticleShape::new(v, t)
}

fn sphere_counts() -> Result<(), String> {
    let s = make_sphere_mesh(1.0, 3).map_err(|e| e.to_string())?;
    ensure(s.triangles().len() == 1280, || {
        format!("{} triangles", s.triangles().len())
    })?;
    let worst = s.vertices().iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max);
    ensure(worst < 1e-12, || format!("vertex off the sphere by {worst:e}"))
}

fn icosahedron() -> Result<(), String> {
    let s = make_sphere_mesh(0.5, 0).map_err(|e| e.to_string())?;
    ensure(s.triangles().len() == 20 && s.vertices().len() == 12, || {
        "not an icosahedron".into()
    })?;
    ensure((s.bounding_radius() - 0.5).abs() < 1e-12, || {
        format!("radius {}", s.bounding_radius())
    })
}

fn round_ellipsoid() -> Result<(), String> {
    let e = make_ellipsoid_mesh([1.0; 3], 3).map_err(|e| e.to_string())?;
    let s = make_sphere_mesh(1.0, 3).map_err(|e| e.to_string())?;
    ensure(e.triangles() == s.triangles(), || "connectivity differs".into())?;
    let d = e
        .vertices()
        .iter()
        .zip(s.vertices())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    ensure(d < 1e-12, || format!("vertices differ by {d:e}"))?;
    ensure(make_ellipsoid_mesh([1.0, 1.0, 0.0], 2).is_err(), || {
        "flat ellipsoid accepted".into()
    })
}

fn off_fixtures() -> Result<(), String> {
    let cube = shape_from_off(CUBE_OFF).map_err(|e| e.to_string())?;
    ensure(cube.triangles().len() == 12, || "cube is not 12 triangles".into())?;
    // drop the last face: two boundary edges
    let open: String = CUBE_OFF
        .lines()
        .take(CUBE_OFF.lines().count() - 1)
        .collect::<Vec<_>>()
        .join("\n");
    let open = open.replacen("8 12 0", "8 11 0", 1);
    ensure(
        matches!(shape_from_off(&open), Err(GeometryError::OpenSurface(..))),
        || "open surface accepted".into(),
    )?;
    let far = make_sphere_mesh(2.0, 1).map_err(|e| e.to_string())?;
    ensure(
        matches!(far.check_containment(1.0), Err(GeometryError::Containment { .. })),
        || "containment not enforced".into(),
    )
}

fn lattice_cloud() -> Result<(), String> {
    let shape = make_sphere_mesh(1.0, 1).map_err(|e| e.to_string())?;
    let spec = CloudSpec::lattice(8, VelocityLaw::translation(Vec3::x()), 0.4, Aabb::unit());
    let c = generate_cloud(&spec, std::slice::from_ref(&shape)).map_err(|e| e.to_string())?;
    let d = (c.particles[0].h - c.particles[1].h).norm();
    ensure((d - 0.5).abs() < 1e-12, || format!("spacing {d}"))?;
    let bad = CloudSpec::lattice(8, VelocityLaw::translation(Vec3::x()), 10.0, Aabb::unit());
    ensure(
        matches!(generate_cloud(&bad, &[shape]), Err(GeometryError::Infeasible(_))),
        || "infeasible dilution accepted".into(),
    )
}

fn placement_scaling() -> Result<(), String> {
    let s = make_sphere_mesh(1.0, 2).map_err(|e| e.to_string())?;
    let same = place_particle(&s, 1, &Vec3::zeros(), &Mat3::identity()).map_err(|e| e.to_string())?;
    ensure(same.vertices() == s.vertices(), || {
        "identity placement moved vertices".into()
    })?;
    let c = Vec3::repeat(0.5);
    let small = place_particle(&s, 10, &c, &Mat3::identity()).map_err(|e| e.to_string())?;
    let r = small.radius_about(&c);
    ensure((r - 0.1).abs() < 1e-12, || format!("radius {r}"))
}

fn zero_motion_exterior() -> Result<(), String> {
    let s = make_sphere_mesh(1.0, 1).map_err(|e| e.to_string())?;
    let p = ExteriorProblem::new(&s, 1.0).map_err(|e| e.to_string())?;
    let sol = p.solve(&RigidMotion::zero()).map_err(|e| e.to_string())?;
    ensure(sol.densities.iter().all(|d| d.norm() == 0.0), || {
        "nonzero traction".into()
    })
}

fn empty_cloud_flow() -> Result<(), String> {
    let g = Grid::with_nx(Aabb::unit(), 8).map_err(|e| e.to_string())?;
    let cloud = CloudConfiguration {
        n: 1,
        c0: 0.4,
        domain: Aabb::unit(),
        r0: 1.0,
        shapes: Vec::new(),
        particles: Vec::new(),
    };
    let u = solve_nbody(&cloud, &[], &g, g.h * g.h / 10.0).map_err(|e| e.to_string())?;
    ensure(u.max_speed() == 0.0 && u.p.iter().all(|p| *p == 0.0), || {
        "flow without forcing".into()
    })
}

fn brinkman_without_forcing() -> Result<(), String> {
    let g = Grid::with_nx(Aabb::unit(), 8).map_err(|e| e.to_string())?;
    let mut f = BrinkmanFields::zeros(g);
    f.m_bar.iter_mut().for_each(|m| *m = SymMat3::identity(3.0));
    let u = solve_brinkman(&f).map_err(|e| e.to_string())?;
    ensure(u.max_speed() == 0.0, || "flow without forcing".into())
}

fn energies() -> Result<(), String> {
    let g = Grid::with_nx(Aabb::unit(), 16).map_err(|e| e.to_string())?;
    ensure(energy_norm(&GridField::zeros(g)) == 0.0, || {
        "zero field has energy".into()
    })?;
    let shear = GridField::from_velocity_fn(g, |x| Vec3::new(x.y, 0.0, 0.0));
    let d = energy_norm_interior(&shear, 2);
    ensure((d - 0.5).abs() < 1e-12, || format!("shear energy density {d}"))
}

fn uniform_local_mean() -> Result<(), String> {
    let shape = make_sphere_mesh(0.5, 1).map_err(|e| e.to_string())?;
    let spec = CloudSpec::lattice(8, VelocityLaw::translation(Vec3::x()), 0.4, Aabb::unit());
    let cloud = generate_cloud(&spec, std::slice::from_ref(&shape)).map_err(|e| e.to_string())?;
    let g = Grid::with_nx(Aabb::unit(), 32).map_err(|e| e.to_string())?;
    let c = Vec3::new(0.3, -0.2, 1.1);
    for (f, want) in [
        (GridField::zeros(g), Vec3::zeros()),
        (GridField::from_velocity_fn(g, |_| c), c),
    ] {
        let m = local_mean_velocity(&f, &cloud, std::slice::from_ref(&shape), 0).map_err(|e| e.to_string())?;
        ensure((m - want).norm() < 1e-12, || format!("mean {m:?}, expected {want:?}"))?;
    }
    Ok(())
}

fn single_atom_measure() -> Result<(), String> {
    let shape = make_sphere_mesh(0.25, 1).map_err(|e| e.to_string())?;
    let spec = CloudSpec::lattice(1, VelocityLaw::translation(Vec3::zeros()), 0.4, Aabb::unit());
    let cloud = generate_cloud(&spec, &[shape]).map_err(|e| e.to_string())?;
    let m = empirical_measure(&cloud, &[ResistanceMatrix::sphere(1.0)]).map_err(|e| e.to_string())?;
    ensure(m.atoms.len() == 1 && m.weight() == 1.0, || "not a unit atom".into())?;
    let g = Grid::with_nx(Aabb::unit(), 16).map_err(|e| e.to_string())?;
    let (f, _) = assemble_brinkman_fields(&m, &g, &Mollifier::with_sigma(0.15)).map_err(|e| e.to_string())?;
    ensure(f.f_bar.iter().all(|v| v.norm() == 0.0), || {
        "force density without motion".into()
    })?;
    let total = f.total_resistance();
    ensure((total - m.total_resistance()).norm() < 1e-10 * total.norm(), || {
        "resistance not conserved".into()
    })
}

fn empty_study() -> Result<(), String> {
    let spec = StudySpec::new(Vec::new(), Vec::new());
    ensure(
        matches!(
            convergence_study(&spec, &mut |_| {}),
            Err(HomogenizationError::EmptyStudy)
        ),
        || "empty study accepted".into(),
    )
}

fn empty_plot_table() -> Result<(), String> {
    let dir = std::env::temp_dir().join(format!("selftest-plot-{}", std::process::id()));
    let report = ConvergenceReport::empty();
    emit_plot_data(&report, &dir).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(&dir).map_err(|e| e.to_string())?;
    let _ = std::fs::remove_file(&dir);
    ensure(text.lines().count() == 1, || "more than a header".into())?;
    ensure(parse_plot_data(&text).map_err(|e| e.to_string())?.is_empty(), || {
        "rows in empty table".into()
    })
}

const CHECKS: &[(&str, Check)] = &[
    ("sphere mesh has 1280 unit triangles", sphere_counts),
    ("refinement 0 is the icosahedron", icosahedron),
    ("round ellipsoid equals sphere; flat one rejected", round_ellipsoid),
    ("OFF cube, open surface and containment", off_fixtures),
    ("2x2x2 lattice and infeasible dilution", lattice_cloud),
    ("placement identity and 1/n scaling", placement_scaling),
    ("zero motion gives zero traction", zero_motion_exterior),
    ("empty cloud gives zero flow", empty_cloud_flow),
    ("Brinkman without forcing gives zero flow", brinkman_without_forcing),
    ("energy of zero and shear fields", energies),
    ("local mean of zero and uniform fields", uniform_local_mean),
    ("single atom, zero velocity assembly", single_atom_measure),
    ("study without N values is an error", empty_study),
    ("empty report plots a header only", empty_plot_table),
];

/// Run every check; never panics.
pub fn selftest() -> Vec<SelftestCheck> {
    CHECKS
        .iter()
        .map(|(name, f)| {
            let t = Instant::now();
            let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
            SelftestCheck {
                name: name.to_string(),
                passed: r.is_ok(),
                detail: r.err().unwrap_or_default(),
                seconds: t.elapsed().as_secs_f64(),
            }
        })
        .collect()
}
