use proptest::prelude::*;
use stokes_brinkman::harness::{digest_hex, emit_plot_data, parse_plot_data, Config, RunManifest};
use stokes_brinkman::homogenization::{ConvergenceReport, StudyRow};

fn row(n: usize, l2: f64, energy: f64) -> StudyRow {
    StudyRow {
        n,
        grid: 32,
        brinkman_grid: 16,
        eta: 1e-4,
        sigma: 0.1,
        l2_error: l2,
        energy,
        brinkman_energy: 0.0,
        closure_median: 0.0,
        velocity_statistic: 1.0,
        matrix_bound: 1.0,
        force_gap: 0.0,
        max_violation: 0.0,
        nbody_iterations: 1,
        brinkman_iterations: 1,
        sigma_sensitivity: vec![],
        seconds: 0.0,
    }
}

fn emit(rows: Vec<StudyRow>) -> String {
    let mut rep = ConvergenceReport::empty();
    rep.rows = rows;
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.dat");
    emit_plot_data(&rep, &p).unwrap();
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn plot_table_shapes() {
    let empty = emit(vec![]);
    assert_eq!(empty.lines().count(), 1);
    assert!(parse_plot_data(&empty).unwrap().is_empty());

    let text = emit(vec![row(8, 0.5, 2.0), row(27, 0.25, 2.1), row(64, 0.125, 2.2)]);
    let rows = parse_plot_data(&text).unwrap();
    assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![8, 27, 64]);
    assert_eq!(rows[1].l2_error, 0.25);
    assert!(parse_plot_data("8 1.0\n").is_err());
}

#[test]
fn manifest_json_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Config::default();
    let mut m = RunManifest::new(vec!["stokes-brinkman".into(), "selftest".into()], "selftest", &cfg, 1);
    let out = dir.path().join("x.txt");
    std::fs::write(&out, "x").unwrap();
    m.outputs.push(out);
    assert!(m.check_outputs().is_ok());
    let back = RunManifest::from_json(&m.to_json()).unwrap();
    assert_eq!(back.config_digest, cfg.digest());
    assert_eq!(back.to_json(), m.to_json());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plot_values_roundtrip_exactly(vals in prop::collection::vec((1usize..10_000, any::<f64>(), any::<f64>()), 0..8)) {
        let vals: Vec<_> = vals.into_iter().filter(|(_, a, b)| a.is_finite() && b.is_finite()).collect();
        let rows = parse_plot_data(&emit(vals.iter().map(|&(n, a, b)| row(n, a, b)).collect())).unwrap();
        prop_assert_eq!(rows.len(), vals.len());
        for (r, (n, a, b)) in rows.iter().zip(&vals) {
            prop_assert_eq!((r.n, r.l2_error, r.energy), (*n, *a, *b));
        }
    }

    #[test]
    fn digest_is_stable_under_reserialization(eta in 1e-3..1.0f64, tol in 1e-12..1e-4f64, eps in 0.1..2.0f64) {
        let mut cfg = Config { eta_factor: eta, ..Config::default() };
        cfg.stokes.outer_tol = tol;
        cfg.exterior.epsilon_factor = eps;
        let back: Config = serde_json::from_str(&cfg.canonical_json()).unwrap();
        prop_assert_eq!(back.digest(), cfg.digest());
        prop_assert_eq!(cfg.digest(), digest_hex(cfg.canonical_json().as_bytes()));
    }
}
