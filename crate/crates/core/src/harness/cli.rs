use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::exterior::ExteriorProblem;
use crate::geometry::{
    generate_cloud, load_mesh_with_radius, Aabb, CloudConfiguration, CloudSpec, OrientationLaw, ParticleShape,
    Placement, ShapeSource, VelocityLaw,
};
use crate::grid::{
    energy_identity, energy_norm, particle_force, solve_brinkman_with, solve_nbody_with, write_raw, write_vtk, Grid,
    GridField, RawHeader,
};
use crate::homogenization::{
    assemble_brinkman_fields, convergence_study, empirical_measure, with_suffix, EmpiricalMeasure, StudySpec,
};
use crate::{par, Vec3};

use super::config::Config;
use super::manifest::{manifest_path_for_file, manifest_path_for_prefix, RunManifest};
use super::plot::emit_plot_data;
use super::selftest::selftest;
use super::{thread_cap, HarnessError, THREADS_ENV};

pub const EXIT_OK: i32 = 0;
/// Validation and usage errors.
pub const EXIT_USAGE: i32 = 1;
/// Solver failures.
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "stokes-brinkman",
    version,
    about = "Resistance matrices, penalized particle flows and their Brinkman limit"
)]
struct Cli {
    /// JSON configuration file layered over the built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set stokes.outer_tol=1e-8`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads (capped by BRINKMAN_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// 6x6 resistance matrix of a closed surface mesh.
    Resistance(ResistanceArgs),
    /// Generate a particle cloud.
    Cloud(CloudArgs),
    /// Penalized flow around a particle cloud.
    Nbody(NbodyArgs),
    /// Solve the Brinkman problem for a measure or a cloud.
    Brinkman(BrinkmanArgs),
    /// Run a convergence study.
    Converge(ConvergeArgs),
    /// Run the built-in check battery.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
struct ResistanceArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Regularization width in units of the mean longest panel edge.
    #[arg(long)]
    epsilon_factor: Option<f64>,
    /// Containment radius of the mesh.
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlacementArg {
    Lattice,
    Random,
}

#[derive(Debug, Args)]
struct CloudArgs {
    /// Cloud specification (JSON); flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    c0: Option<f64>,
    /// Side of the cubic box `[0, L]^3`.
    #[arg(long = "box")]
    box_side: Option<f64>,
    #[arg(long, value_enum)]
    placement: Option<PlacementArg>,
    /// Seed for random placement and orientation.
    #[arg(long)]
    seed: Option<u64>,
    /// Translation velocity `x,y,z` shared by all particles.
    #[arg(long, value_parser = parse_vec3)]
    ell: Option<Vec3>,
    /// Reference shape; a sphere of radius `--radius` when absent.
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct NbodyArgs {
    #[arg(long)]
    cloud: PathBuf,
    /// Cells along x.
    #[arg(long)]
    grid: usize,
    /// Penalization parameter; `eta_factor * h^2` when absent.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BrinkmanArgs {
    /// Empirical measure (with `atoms`) or cloud (with `particles`) as JSON.
    #[arg(long)]
    fields: PathBuf,
    #[arg(long)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ConvergeArgs {
    /// Study specification (JSON).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[arg(long, default_value = "selftest")]
    out: PathBuf,
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(format!("expected three comma-separated numbers, got `{s}`")),
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Resistance(_) => "resistance",
            Command::Cloud(_) => "cloud",
            Command::Nbody(_) => "nbody",
            Command::Brinkman(_) => "brinkman",
            Command::Converge(_) => "converge",
            Command::Selftest(_) => "selftest",
        }
    }

    fn manifest_path(&self) -> PathBuf {
        match self {
            Command::Resistance(a) => manifest_path_for_file(&a.out),
            Command::Cloud(a) => manifest_path_for_file(&a.out),
            Command::Nbody(a) => manifest_path_for_prefix(&a.out),
            Command::Brinkman(a) => manifest_path_for_prefix(&a.out),
            Command::Converge(a) => manifest_path_for_prefix(&a.out),
            Command::Selftest(a) => manifest_path_for_prefix(&a.out),
        }
    }

    /// Fold command flags that shadow configuration keys into `config`.
    fn apply_flags(&self, config: &mut Config) {
        match self {
            Command::Resistance(a) => {
                if let Some(e) = a.epsilon_factor {
                    config.exterior.epsilon_factor = e;
                }
                if let Some(r) = a.r0 {
                    config.cloud.r0 = r;
                }
            }
            Command::Cloud(a) => {
                if let Some(c) = a.c0 {
                    config.cloud.c0 = c;
                }
            }
            _ => {}
        }
    }
}

/// Parse `argv` (program name first), run, and return the exit status.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut config = match Config::layered(cli.config.as_deref(), &cli.set) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    cli.command.apply_flags(&mut config);
    let env = std::env::var(THREADS_ENV).ok();
    config.threads = cli.threads.or(config.threads);
    let threads = match thread_cap(config.threads, env.as_deref()) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let used = par::init_threads(threads);

    let mut manifest = RunManifest::new(argv.to_vec(), cli.command.name(), &config, used);
    let t0 = Instant::now();
    let result = dispatch(&cli.command, &config, &mut manifest).and_then(|_| manifest.check_outputs());
    manifest.time("total", t0.elapsed().as_secs_f64());
    if let Err(e) = &result {
        manifest.fail(e);
        eprintln!("error: {e}");
    }
    let path = cli.command.manifest_path();
    if let Err(e) = manifest.write(&path) {
        eprintln!("error: {e}");
        return if result.is_err() {
            manifest.exit_code
        } else {
            EXIT_USAGE
        };
    }
    manifest.exit_code
}

fn dispatch(cmd: &Command, config: &Config, manifest: &mut RunManifest) -> Result<(), HarnessError> {
    match cmd {
        Command::Resistance(a) => resistance(a, config, manifest),
        Command::Cloud(a) => cloud(a, config, manifest),
        Command::Nbody(a) => nbody(a, config, manifest),
        Command::Brinkman(a) => brinkman(a, config, manifest),
        Command::Converge(a) => converge(a, config, manifest),
        Command::Selftest(a) => run_selftest(a, manifest),
    }
}

fn read_text(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn write_text(path: &Path, text: &str, manifest: &mut RunManifest) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))?;
    manifest.outputs.push(path.to_path_buf());
    Ok(())
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, HarnessError> {
    serde_json::from_str(text).map_err(|e| HarnessError::Usage(format!("{}: {e}", path.display())))
}

fn timed<T>(
    manifest: &mut RunManifest,
    stage: &str,
    f: impl FnOnce() -> Result<T, HarnessError>,
) -> Result<T, HarnessError> {
    let t = Instant::now();
    let r = f();
    manifest.time(stage, t.elapsed().as_secs_f64());
    r
}

fn resistance(a: &ResistanceArgs, config: &Config, manifest: &mut RunManifest) -> Result<(), HarnessError> {
    let shape = timed(manifest, "load", || {
        Ok(load_mesh_with_radius(&a.mesh, config.cloud.r0)?)
    })?;
    let comp = timed(manifest, "solve", || {
        Ok(ExteriorProblem::with_options(&shape, &config.exterior)?.resistance()?)
    })?;
    let m = &comp.matrix.m;
    let rows: Vec<Vec<f64>> = (0..6).map(|i| (0..6).map(|j| m[(i, j)]).collect()).collect();
    let doc = json!({
        "mesh": a.mesh,
        "matrix": rows,
        "panel_count": comp.panel_count,
        "epsilon": comp.epsilon,
        "epsilon_factor": config.exterior.epsilon_factor,
        "residuals": comp.residuals,
        "symmetry_defect": comp.matrix.symmetry_defect(),
        "min_eigenvalue": comp.matrix.min_eigenvalue(),
    });
    write_text(&a.out, &pretty(&doc), manifest)
}

/// Cloud specification as read from disk: a [`CloudSpec`] plus the shapes.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CloudDocument {
    #[serde(flatten)]
    spec: CloudSpec,
    #[serde(default)]
    shapes: Vec<ShapeSource>,
}

fn cloud(a: &CloudArgs, config: &Config, manifest: &mut RunManifest) -> Result<(), HarnessError> {
    let mut doc = match &a.spec {
        Some(p) => parse_json::<CloudDocument>(p, &read_text(p)?)?,
        None => {
            let n =
                a.n.ok_or_else(|| HarnessError::Usage("either --spec or --n is required".into()))?;
            let mut spec = CloudSpec::lattice(n, VelocityLaw::translation(Vec3::x()), config.cloud.c0, Aabb::unit());
            spec.r0 = config.cloud.r0;
            spec.attempt_budget = config.cloud.attempt_budget;
            CloudDocument {
                spec,
                shapes: Vec::new(),
            }
        }
    };
    if let Some(n) = a.n {
        doc.spec.n = n;
    }
    if let Some(c) = a.c0 {
        doc.spec.c0 = c;
    }
    if let Some(l) = a.box_side {
        doc.spec.domain = Aabb::cube(l);
    }
    let seed = a.seed.unwrap_or(0);
    match a.placement {
        Some(PlacementArg::Lattice) => {
            doc.spec.placement = Placement::Lattice;
            doc.spec.orientation = OrientationLaw::Identity;
        }
        Some(PlacementArg::Random) => {
            doc.spec.placement = Placement::Random { seed };
            doc.spec.orientation = OrientationLaw::Random { seed };
        }
        None if a.seed.is_some() => {
            if let Placement::Random { .. } = doc.spec.placement {
                doc.spec.placement = Placement::Random { seed };
            }
            if let OrientationLaw::Random { .. } = doc.spec.orientation {
                doc.spec.orientation = OrientationLaw::Random { seed };
            }
        }
        None => {}
    }
    if let Some(ell) = a.ell {
        doc.spec.velocity_law = VelocityLaw::translation(ell);
    }
    if let Some(m) = &a.mesh {
        doc.shapes = vec![ShapeSource::Off { path: m.clone() }];
    } else if a.radius.is_some() || doc.shapes.is_empty() {
        doc.shapes = vec![ShapeSource::Sphere {
            radius: a.radius.unwrap_or(0.5),
            refinement: 3,
        }];
    }
    if let Placement::Random { seed } = doc.spec.placement {
        manifest.seeds.push(seed);
    }
    if let OrientationLaw::Random { seed } = doc.spec.orientation {
        manifest.seeds.push(seed);
    }
    if let VelocityLaw::RandomUnit { seed } = doc.spec.velocity_law {
        manifest.seeds.push(seed);
    }
    let shapes: Vec<ParticleShape> = doc
        .shapes
        .iter()
        .map(|s| s.build(doc.spec.r0))
        .collect::<Result<_, _>>()?;
    let mut c = timed(manifest, "generate", || Ok(generate_cloud(&doc.spec, &shapes)?))?;
    c.shapes = doc.shapes;
    write_text(&a.out, &c.to_json(), manifest)
}

fn load_cloud(path: &Path) -> Result<(CloudConfiguration, Vec<ParticleShape>), HarnessError> {
    let cloud = CloudConfiguration::load(path)?;
    if cloud.shapes.is_empty() {
        return Err(HarnessError::Usage(format!(
            "{}: cloud lists no shapes",
            path.display()
        )));
    }
    let shapes = cloud.build_shapes()?;
    cloud.validate(&shapes)?;
    Ok((cloud, shapes))
}

fn write_field(field: &GridField, prefix: &Path, manifest: &mut RunManifest) -> Result<(), HarnessError> {
    let vtk = with_suffix(prefix, ".vtk");
    write_vtk(field, &vtk)?;
    manifest.outputs.push(vtk);
    for (name, data) in [("speed", field.speed()), ("pressure", field.p.clone())] {
        let path = with_suffix(prefix, &format!("_{name}.raw"));
        write_raw(&path, &RawHeader::for_cells(&field.grid, 1, name), &data)?;
        manifest.outputs.push(path);
    }
    Ok(())
}

fn nbody(a: &NbodyArgs, config: &Config, manifest: &mut RunManifest) -> Result<(), HarnessError> {
    let (cloud, shapes) = timed(manifest, "load", || load_cloud(&a.cloud))?;
    let grid = Grid::with_nx(cloud.domain, a.grid)?;
    let eta = a.eta.unwrap_or(config.eta_factor * grid.h * grid.h);
    let sol = timed(manifest, "solve", || {
        Ok(solve_nbody_with(&cloud, &shapes, &grid, eta, &config.stokes)?)
    })?;
    let particles: Vec<Value> = (0..cloud.particles.len())
        .map(|i| {
            let (f, t) = particle_force(&sol.field, &cloud, &sol.mask, i)?;
            Ok(json!({ "index": i, "force": f, "torque": t }))
        })
        .collect::<Result<_, HarnessError>>()?;
    let doc = json!({
        "grid": grid.n,
        "h": grid.h,
        "eta": eta,
        "stats": sol.stats,
        "max_violation": sol.max_violation,
        "violation_constant": sol.violation_constant,
        "energy": energy_norm(&sol.field),
        "particles": particles,
    });
    write_field(&sol.field, &a.out, manifest)?;
    write_text(&with_suffix(&a.out, "_forces.json"), &pretty(&doc), manifest)
}

fn brinkman(a: &BrinkmanArgs, config: &Config, manifest: &mut RunManifest) -> Result<(), HarnessError> {
    let text = read_text(&a.fields)?;
    let value: Value = parse_json(&a.fields, &text)?;
    let measure = if value.get("atoms").is_some() {
        parse_json::<EmpiricalMeasure>(&a.fields, &text)?
    } else if value.get("particles").is_some() {
        let (cloud, shapes) = load_cloud(&a.fields)?;
        let matrices = timed(manifest, "resistance", || {
            shapes
                .iter()
                .map(|s| Ok(ExteriorProblem::with_options(s, &config.exterior)?.resistance()?.matrix))
                .collect::<Result<Vec<_>, HarnessError>>()
        })?;
        empirical_measure(&cloud, &matrices)?
    } else {
        return Err(HarnessError::Usage(format!(
            "{}: expected a measure (`atoms`) or a cloud (`particles`)",
            a.fields.display()
        )));
    };
    let grid = Grid::with_nx(measure.domain, a.grid)?;
    let (fields, report) = timed(manifest, "assemble", || {
        Ok(assemble_brinkman_fields(&measure, &grid, &config.mollifier)?)
    })?;
    let (u, stats) = timed(manifest, "solve", || Ok(solve_brinkman_with(&fields, &config.stokes)?))?;
    let (lhs, rhs) = energy_identity(&u, &fields);
    let doc = json!({
        "grid": grid.n,
        "h": grid.h,
        "assembly": report,
        "stats": stats,
        "energy": energy_norm(&u),
        "energy_identity": { "dissipation": lhs, "work": rhs },
    });
    write_field(&u, &a.out, manifest)?;
    write_text(&with_suffix(&a.out, "_summary.json"), &pretty(&doc), manifest)
}

/// Study spec with solver sections it leaves unset taken from `config`.
fn study_spec(path: &Path, config: &Config) -> Result<StudySpec, HarnessError> {
    let mut v: Value = parse_json(path, &read_text(path)?)?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| HarnessError::Usage(format!("{}: study spec must be a JSON object", path.display())))?;
    let defaults = serde_json::to_value(config).expect("config serializes");
    for key in ["exterior", "stokes", "mollifier", "eta_factor"] {
        if !obj.contains_key(key) {
            obj.insert(key.to_string(), defaults[key].clone());
        }
    }
    serde_json::from_value(v).map_err(|e| HarnessError::Usage(format!("{}: {e}", path.display())))
}

fn converge(a: &ConvergeArgs, config: &Config, manifest: &mut RunManifest) -> Result<(), HarnessError> {
    let spec = study_spec(&a.spec, config)?;
    manifest.seeds = spec.seeds();
    let report = timed(manifest, "study", || {
        Ok(convergence_study(&spec, &mut |line| eprintln!("{line}"))?)
    })?;
    for p in report.write(&a.out).map_err(|e| HarnessError::io(&a.out, e))? {
        manifest.outputs.push(p);
    }
    let dat = with_suffix(&a.out, ".dat");
    emit_plot_data(&report, &dat)?;
    manifest.outputs.push(dat);
    match &report.failure {
        Some(f) => Err(HarnessError::Incomplete(format!("study incomplete: {f}"))),
        None => Ok(()),
    }
}

fn run_selftest(a: &SelftestArgs, manifest: &mut RunManifest) -> Result<(), HarnessError> {
    let checks = timed(manifest, "checks", || Ok(selftest()))?;
    for c in &checks {
        println!(
            "{} {} ({:.2} s){}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.seconds,
            if c.passed {
                String::new()
            } else {
                format!(": {}", c.detail)
            }
        );
    }
    let json = serde_json::to_string_pretty(&checks).expect("checks serialize");
    write_text(&with_suffix(&a.out, ".json"), &json, manifest)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Selftest(failed.join("; ")))
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json serializes")
}
