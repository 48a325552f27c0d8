use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::exterior::{ExteriorOptions, ExteriorProblem, ResistanceMatrix};
use crate::geometry::{
    generate_cloud, Aabb, CloudSpec, OrientationLaw, ParticleShape, Placement, ShapeSource, VelocityLaw, DEFAULT_C0,
    DEFAULT_R0,
};
use crate::grid::{
    energy_norm, relative_l2_distance, solve_brinkman_with, solve_nbody_with, Grid, GridError, StokesOptions,
};
use crate::Vec3;

use super::closure::drag_closure_check;
use super::{assemble_brinkman_fields, empirical_measure, HomogenizationError, Mollifier};

fn default_shapes() -> Vec<ShapeSource> {
    vec![ShapeSource::Sphere {
        radius: 0.5,
        refinement: 3,
    }]
}

fn default_velocity() -> VelocityLaw {
    VelocityLaw::translation(Vec3::x())
}

fn default_c0() -> f64 {
    DEFAULT_C0
}

fn default_domain() -> Aabb {
    Aabb::unit()
}

fn default_r0() -> f64 {
    DEFAULT_R0
}

fn default_eta_factor() -> f64 {
    0.1
}

/// Everything that defines a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub n_values: Vec<usize>,
    /// N-particle grid (cells along x) for each N.
    pub grids: Vec<usize>,
    /// Grid of the limit problem for each N; the N-particle grids when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub brinkman_grids: Vec<usize>,
    #[serde(default = "default_shapes")]
    pub shapes: Vec<ShapeSource>,
    #[serde(default = "default_velocity")]
    pub velocity_law: VelocityLaw,
    #[serde(default)]
    pub placement: Placement,
    #[serde(default)]
    pub orientation: OrientationLaw,
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default = "default_domain")]
    pub domain: Aabb,
    #[serde(default = "default_r0")]
    pub r0: f64,
    /// Penalization parameter in units of `h^2`.
    #[serde(default = "default_eta_factor")]
    pub eta_factor: f64,
    #[serde(default)]
    pub mollifier: Mollifier,
    /// Extra mollifier widths, as multiples of the default, whose effect on
    /// the L2 error is reported.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sigma_sweep: Vec<f64>,
    #[serde(default)]
    pub exterior: ExteriorOptions,
    #[serde(default)]
    pub stokes: StokesOptions,
}

impl StudySpec {
    pub fn new(n_values: Vec<usize>, grids: Vec<usize>) -> Self {
        StudySpec {
            n_values,
            grids,
            brinkman_grids: Vec::new(),
            shapes: default_shapes(),
            velocity_law: default_velocity(),
            placement: Placement::Lattice,
            orientation: OrientationLaw::Identity,
            c0: DEFAULT_C0,
            domain: Aabb::unit(),
            r0: DEFAULT_R0,
            eta_factor: default_eta_factor(),
            mollifier: Mollifier::default(),
            sigma_sweep: Vec::new(),
            exterior: ExteriorOptions::default(),
            stokes: StokesOptions::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("study spec serializes")
    }

    /// Seeds used by placement, orientation and velocity laws.
    pub fn seeds(&self) -> Vec<u64> {
        let mut s = Vec::new();
        if let Placement::Random { seed } = self.placement {
            s.push(seed);
        }
        if let OrientationLaw::Random { seed } = self.orientation {
            s.push(seed);
        }
        if let VelocityLaw::RandomUnit { seed } = self.velocity_law {
            s.push(seed);
        }
        s
    }

    fn brinkman_grid(&self, k: usize) -> usize {
        self.brinkman_grids.get(k).copied().unwrap_or(self.grids[k])
    }

    fn cloud_spec(&self, n: usize) -> CloudSpec {
        CloudSpec {
            n,
            placement: self.placement,
            velocity_law: self.velocity_law,
            orientation: self.orientation,
            c0: self.c0,
            domain: self.domain,
            attempt_budget: crate::geometry::DEFAULT_ATTEMPT_BUDGET,
            r0: self.r0,
        }
    }

    /// Static checks that need no solves.
    pub fn validate(&self) -> Result<(), HomogenizationError> {
        if self.n_values.is_empty() {
            return Err(HomogenizationError::EmptyStudy);
        }
        let bad = |m: String| Err(HomogenizationError::InvalidParameter(m));
        if self.grids.len() != self.n_values.len() {
            return bad(format!(
                "{} grids for {} N values",
                self.grids.len(),
                self.n_values.len()
            ));
        }
        if !self.brinkman_grids.is_empty() && self.brinkman_grids.len() != self.n_values.len() {
            return bad(format!(
                "{} Brinkman grids for {} N values",
                self.brinkman_grids.len(),
                self.n_values.len()
            ));
        }
        if self.shapes.is_empty() {
            return bad("no shapes".into());
        }
        if !(self.eta_factor > 0.0 && self.eta_factor <= 1.0) {
            return bad(format!("eta_factor must lie in (0, 1], got {}", self.eta_factor));
        }
        if self.sigma_sweep.iter().any(|s| !(*s > 0.0)) {
            return bad("sigma sweep factors must be positive".into());
        }
        for (k, &n) in self.n_values.iter().enumerate() {
            let g = Grid::with_nx(self.domain, self.grids[k])?;
            let max_h = self.r0 / n as f64 / 4.0;
            if g.h > max_h * (1.0 + 1e-12) {
                return Err(GridError::UnderResolved { h: g.h, max_h }.into());
            }
            let b = Grid::with_nx(self.domain, self.brinkman_grid(k))?;
            if g.n[0] % b.n[0] != 0 && b.n[0] % g.n[0] != 0 {
                return bad(format!("grids {} and {} are not nested", g.n[0], b.n[0]));
            }
        }
        Ok(())
    }
}

/// Results for one N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: usize,
    pub grid: usize,
    pub brinkman_grid: usize,
    pub eta: f64,
    pub sigma: f64,
    /// `|E u^N - u_bar| / |u_bar|` in L2.
    pub l2_error: f64,
    /// `|D(u^N)|^2`.
    pub energy: f64,
    pub brinkman_energy: f64,
    pub closure_median: f64,
    pub velocity_statistic: f64,
    pub matrix_bound: f64,
    pub force_gap: f64,
    pub max_violation: f64,
    pub nbody_iterations: usize,
    pub brinkman_iterations: usize,
    /// `(sigma, l2_error)` for the swept widths.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sigma_sensitivity: Vec<(f64, f64)>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<StudyRow>,
    /// Resistance matrix of each shape.
    pub matrices: Vec<ResistanceMatrix>,
    /// False when a step failed; `failure` then says why.
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl ConvergenceReport {
    pub fn empty() -> Self {
        ConvergenceReport {
            rows: Vec::new(),
            matrices: Vec::new(),
            complete: true,
            failure: None,
        }
    }

    pub fn n_values(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.n).collect()
    }

    pub fn l2_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.l2_error).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.energy).collect()
    }

    pub fn closure_medians(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.closure_median).collect()
    }

    /// Every reported number finite and nonnegative.
    pub fn is_valid(&self) -> bool {
        self.rows.iter().all(|r| {
            [r.l2_error, r.energy, r.closure_median]
                .iter()
                .all(|v| v.is_finite() && *v >= 0.0)
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,grid,l2_error,energy,closure_median\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{:e}",
                r.n, r.grid, r.l2_error, r.energy, r.closure_median
            );
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Write `PREFIX.csv` and `PREFIX.json`; returns the paths.
    pub fn write(&self, prefix: &Path) -> Result<Vec<PathBuf>, std::io::Error> {
        let csv = with_suffix(prefix, ".csv");
        let json = with_suffix(prefix, ".json");
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(&json, self.to_json())?;
        Ok(vec![csv, json])
    }
}

pub(crate) fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Run the study; `log` receives one line per step.
///
/// Invalid specs are errors. A failing solve ends the study early and is
/// reported through [`ConvergenceReport::complete`].
pub fn convergence_study(
    spec: &StudySpec,
    log: &mut dyn FnMut(&str),
) -> Result<ConvergenceReport, HomogenizationError> {
    spec.validate()?;
    let shapes: Vec<ParticleShape> = spec.shapes.iter().map(|s| s.build(spec.r0)).collect::<Result<_, _>>()?;
    let mut report = ConvergenceReport::empty();
    for (i, shape) in shapes.iter().enumerate() {
        let t = Instant::now();
        let m = ExteriorProblem::with_options(shape, &spec.exterior)?.resistance()?;
        log(&format!(
            "shape {i}: {} panels, resistance in {:.1} s",
            m.panel_count,
            t.elapsed().as_secs_f64()
        ));
        report.matrices.push(m.matrix);
    }
    for k in 0..spec.n_values.len() {
        match study_row(spec, k, &shapes, &report.matrices, log) {
            Ok(row) => {
                log(&format!(
                    "N = {}: l2 {:.4e}, energy {:.4e}, closure {:.3} ({:.1} s)",
                    row.n, row.l2_error, row.energy, row.closure_median, row.seconds
                ));
                report.rows.push(row);
            }
            Err(e) => {
                log(&format!("N = {} failed: {e}", spec.n_values[k]));
                report.complete = false;
                report.failure = Some(format!("N = {}: {e}", spec.n_values[k]));
                break;
            }
        }
    }
    Ok(report)
}

fn study_row(
    spec: &StudySpec,
    k: usize,
    shapes: &[ParticleShape],
    matrices: &[ResistanceMatrix],
    log: &mut dyn FnMut(&str),
) -> Result<StudyRow, HomogenizationError> {
    let t0 = Instant::now();
    let n = spec.n_values[k];
    let mut cloud = generate_cloud(&spec.cloud_spec(n), shapes)?;
    cloud.shapes = spec.shapes.clone();
    let measure = empirical_measure(&cloud, matrices)?;
    let grid = Grid::with_nx(spec.domain, spec.grids[k])?;
    let eta = spec.eta_factor * grid.h * grid.h;
    let nb = solve_nbody_with(&cloud, shapes, &grid, eta, &spec.stokes)?;
    log(&format!(
        "N = {n}: penalized solve on {:?} in {:.1} s ({} iterations)",
        grid.n, nb.stats.seconds, nb.stats.outer_iterations
    ));
    let bgrid = Grid::with_nx(spec.domain, spec.brinkman_grid(k))?;
    let (fields, assembly) = assemble_brinkman_fields(&measure, &bgrid, &spec.mollifier)?;
    let (ubar, bstats) = solve_brinkman_with(&fields, &spec.stokes)?;
    let l2_error = relative_l2_distance(&nb.field, &ubar)?;
    let mut sigma_sensitivity = Vec::new();
    for f in &spec.sigma_sweep {
        let m = Mollifier::with_sigma(assembly.sigma * f);
        let (fs, _) = assemble_brinkman_fields(&measure, &bgrid, &m)?;
        let (us, _) = solve_brinkman_with(&fs, &spec.stokes)?;
        sigma_sensitivity.push((assembly.sigma * f, relative_l2_distance(&nb.field, &us)?));
    }
    let closure = drag_closure_check(&nb.field, &cloud, shapes, &measure, &nb.mask)?;
    Ok(StudyRow {
        n,
        grid: grid.n[0],
        brinkman_grid: bgrid.n[0],
        eta,
        sigma: assembly.sigma,
        l2_error,
        energy: energy_norm(&nb.field),
        brinkman_energy: energy_norm(&ubar),
        closure_median: closure.median,
        velocity_statistic: measure.velocity_statistic(),
        matrix_bound: measure.matrix_bound(),
        force_gap: assembly.force_gap,
        max_violation: nb.max_violation,
        nbody_iterations: nb.stats.outer_iterations,
        brinkman_iterations: bstats.outer_iterations,
        sigma_sensitivity,
        seconds: t0.elapsed().as_secs_f64(),
    })
}
