use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stokes_brinkman::exterior::ResistanceMatrix;
use stokes_brinkman::geometry::{
    generate_cloud, make_sphere_mesh, random_rotation, Aabb, CloudSpec, ParticleShape, VelocityLaw,
};
use stokes_brinkman::grid::{read_raw, write_raw, Grid, RawHeader};
use stokes_brinkman::homogenization::{assemble_brinkman_fields, empirical_measure, Mollifier};
use stokes_brinkman::{Matrix6, Vec3};

fn sphere() -> ParticleShape {
    make_sphere_mesh(0.5, 1).unwrap()
}

fn cloud_spec(n: usize, seed: u64) -> CloudSpec {
    CloudSpec::random(n, seed, VelocityLaw::RandomUnit { seed }, 0.3, Aabb::unit())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn conjugation_preserves_spectrum(seed in any::<u64>(), entries in prop::collection::vec(-1.0..1.0f64, 36)) {
        let b = Matrix6::from_row_slice(&entries);
        let m = ResistanceMatrix::new(b.transpose() * b + Matrix6::identity());
        let q = random_rotation(&mut ChaCha8Rng::seed_from_u64(seed));
        let c = m.conjugated(&q);
        let mut e0 = m.eigenvalues();
        let mut e1 = c.eigenvalues();
        e0.sort_by(f64::total_cmp);
        e1.sort_by(f64::total_cmp);
        for (a, b) in e0.iter().zip(&e1) {
            prop_assert!((a - b).abs() <= 1e-10 * e0[5]);
        }
        prop_assert!(c.symmetry_defect() < 1e-12);
    }

    #[test]
    fn monodisperse_first_moment(n in 2usize..28, seed in any::<u64>()) {
        // isotropic blocks make the identity exact for any orientation
        let m = ResistanceMatrix::sphere(0.5);
        let cloud = generate_cloud(&cloud_spec(n, seed), &[sphere()]).unwrap();
        let meas = empirical_measure(&cloud, std::slice::from_ref(&m)).unwrap();
        let mean_ell = cloud.particles.iter().map(|p| p.ell).sum::<Vec3>() / n as f64;
        let expect = meas.total_resistance() * mean_ell;
        prop_assert!((meas.first_moment() - expect).norm() <= 1e-12 * (1.0 + expect.norm()));
        prop_assert!((meas.total_resistance() - m.m_i()).norm() <= 1e-12 * m.m_i().norm());
    }

    #[test]
    fn mollification_conserves_force_and_stays_spd(n in 2usize..20, seed in any::<u64>(), width in 1.0..3.0f64) {
        let cloud = generate_cloud(&cloud_spec(n, seed), &[sphere()]).unwrap();
        let meas = empirical_measure(&cloud, &[ResistanceMatrix::sphere(0.5)]).unwrap();
        let g = Grid::with_nx(Aabb::unit(), 16).unwrap();
        let (fields, rep) = assemble_brinkman_fields(&meas, &g, &Mollifier::with_sigma(width * g.h)).unwrap();
        prop_assert!(rep.force_gap < 1e-12, "{rep:?}");
        prop_assert!(rep.resistance_gap < 1e-12, "{rep:?}");
        prop_assert!((fields.total_force() - meas.total_force()).norm() <= 1e-12 * (1.0 + meas.total_force().norm()));
        for m in &fields.m_bar {
            prop_assert!(m.min_eigenvalue() >= -1e-12 * (1.0 + m.trace()));
        }
    }

    #[test]
    fn generated_clouds_validate(n in 2usize..40, seed in any::<u64>()) {
        let shapes = [sphere()];
        let cloud = generate_cloud(&cloud_spec(n, seed), &shapes).unwrap();
        prop_assert_eq!(cloud.particles.len(), n);
        prop_assert!(cloud.validate(&shapes).is_ok());
        let again = generate_cloud(&cloud_spec(n, seed), &shapes).unwrap();
        prop_assert_eq!(again, cloud);
    }

    #[test]
    fn raw_dump_roundtrip(dims in (1usize..6, 1usize..6, 1usize..6), comps in 1usize..4, scale in -1e6..1e6f64) {
        let (a, b, c) = dims;
        let data: Vec<f64> = (0..a * b * c * comps).map(|i| scale * (i as f64 * 0.37).sin()).collect();
        let header = RawHeader { dims: [a, b, c], spacing: 0.125, origin: [0.5, -1.0, 2.0], components: comps, name: "u".into() };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.raw");
        write_raw(&p, &header, &data).unwrap();
        let (h, d) = read_raw(&p).unwrap();
        prop_assert_eq!(h, header);
        prop_assert_eq!(d, data);
    }
}
