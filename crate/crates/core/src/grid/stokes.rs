//! `A u - D^T p = f`, `D u = 0` with `A = -Lap_h + reaction`.
//!
//! The default method runs preconditioned CG directly on the discretely
//! divergence-free subspace, using the exact cosine-transform projection.
//! The Uzawa alternative finds the pressure by CG on the Schur complement
//! `S = D A^{-1} D^T`, preconditioned by `r + K^{1/2} L^{-1} K^{1/2} r` where
//! `L = D D^T` is inverted exactly by cosine transforms and `K` is the cell
//! reaction scale. Velocity solves use CG with one multigrid V-cycle per
//! component as preconditioner. A final exact projection removes the
//! remaining divergence.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::par;
use crate::Vec3;

use super::brinkman::SymMat3;
use super::field::GridField;
use super::multigrid::{Multigrid, ScalarOperator};
use super::ops::{add_div_transpose, cell_average, divergence, face_average_of_cells};
use super::poisson::NeumannPoisson;
use super::{unflatten, Grid, GridError};

/// Zeroth-order term of the momentum operator.
#[derive(Debug, Clone)]
pub enum Reaction {
    None,
    /// Diagonal coefficient per face, per component.
    Face([Vec<f64>; 3]),
    /// Symmetric tensor per cell acting as `I^T M I`, `I` averaging faces to
    /// cells.
    CellTensor(Vec<SymMat3>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StokesMethod {
    #[default]
    Projected,
    Uzawa,
}

/// Solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StokesOptions {
    pub method: StokesMethod,
    /// Projected: relative residual of the projected momentum equation.
    /// Uzawa: reduction of the divergence residual.
    pub outer_tol: f64,
    /// Relative residual of each Uzawa velocity solve.
    pub inner_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl Default for StokesOptions {
    fn default() -> Self {
        StokesOptions {
            method: StokesMethod::Projected,
            outer_tol: 1e-9,
            inner_tol: 1e-10,
            max_outer: 500,
            max_inner: 300,
        }
    }
}

/// Diagnostics of one Stokes solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Relative divergence residual reached by the pressure iteration.
    pub outer_residual: f64,
    /// Max-norm divergence of the returned velocity.
    pub max_divergence: f64,
    pub seconds: f64,
}

type Faces = [Vec<f64>; 3];

fn zeros(grid: &Grid) -> Faces {
    std::array::from_fn(|a| vec![0.0; grid.face_count(a)])
}

fn fdot(a: &Faces, b: &Faces) -> f64 {
    (0..3).map(|c| par::dot(&a[c], &b[c])).sum()
}

struct VelocityOperator<'a> {
    grid: Grid,
    tensor: Option<&'a [SymMat3]>,
    ops: [ScalarOperator; 3],
    mg: [Multigrid; 3],
}

impl<'a> VelocityOperator<'a> {
    fn new(grid: &Grid, reaction: &'a Reaction) -> Self {
        let coeff: [Option<Vec<f64>>; 3] = match reaction {
            Reaction::None => [None, None, None],
            Reaction::Face(c) => std::array::from_fn(|a| Some(c[a].clone())),
            Reaction::CellTensor(m) => std::array::from_fn(|a| {
                let diag: Vec<f64> = m.iter().map(|t| t.get(a, a)).collect();
                Some(face_average_of_cells(grid, a, &diag))
            }),
        };
        let tensor = match reaction {
            Reaction::CellTensor(m) => Some(m.as_slice()),
            _ => None,
        };
        // the scalar operators carry the exact face reaction; the tensor
        // case keeps them for the preconditioner only
        let mg_ops: [ScalarOperator; 3] =
            std::array::from_fn(|a| ScalarOperator::component(grid.n, a, grid.h, coeff[a].clone()));
        let ops = if tensor.is_some() {
            std::array::from_fn(|a| ScalarOperator::component(grid.n, a, grid.h, None))
        } else {
            mg_ops.clone()
        };
        VelocityOperator {
            grid: *grid,
            tensor,
            ops,
            mg: mg_ops.map(Multigrid::new),
        }
    }

    fn apply(&self, u: &Faces, out: &mut Faces) {
        for a in 0..3 {
            self.ops[a].apply(&u[a], &mut out[a]);
        }
        if let Some(m) = self.tensor {
            let c: [Vec<f64>; 3] = std::array::from_fn(|a| cell_average(&self.grid, a, &u[a]));
            let w = par::map_range(m.len(), |i| m[i].mul(&Vec3::new(c[0][i], c[1][i], c[2][i])));
            for (a, oa) in out.iter_mut().enumerate() {
                let wa: Vec<f64> = w.iter().map(|v| v[a]).collect();
                let f = face_average_of_cells(&self.grid, a, &wa);
                par::axpy(1.0, &f, oa);
            }
        }
    }

    fn precondition(&self, r: &Faces) -> Faces {
        std::array::from_fn(|a| self.mg[a].vcycle(&r[a]))
    }

    /// CG on `A x = b` from the initial guess in `x`; returns iterations.
    fn solve(&self, b: &Faces, x: &mut Faces, rel_tol: f64, max_iter: usize) -> Result<usize, GridError> {
        let bn = fdot(b, b).sqrt();
        if bn == 0.0 {
            x.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v = 0.0));
            return Ok(0);
        }
        let mut r = zeros(&self.grid);
        self.apply(x, &mut r);
        for a in 0..3 {
            for (ri, bi) in r[a].iter_mut().zip(&b[a]) {
                *ri = bi - *ri;
            }
        }
        let mut z = self.precondition(&r);
        let mut p = z.clone();
        let mut rz = fdot(&r, &z);
        let mut ap = zeros(&self.grid);
        for it in 1..=max_iter {
            self.apply(&p, &mut ap);
            let alpha = rz / fdot(&p, &ap);
            for a in 0..3 {
                par::axpy(alpha, &p[a], &mut x[a]);
                par::axpy(-alpha, &ap[a], &mut r[a]);
            }
            let rel = fdot(&r, &r).sqrt() / bn;
            if rel <= rel_tol {
                return Ok(it);
            }
            if !rel.is_finite() {
                break;
            }
            z = self.precondition(&r);
            let rz_new = fdot(&r, &z);
            for a in 0..3 {
                par::xpby(&z[a], rz_new / rz, &mut p[a]);
            }
            rz = rz_new;
        }
        Err(GridError::NotConverged {
            solver: "velocity CG",
            iterations: max_iter,
            residual: fdot(&r, &r).sqrt() / bn,
        })
    }
}

/// Cell reaction scale used by the pressure preconditioner.
fn cell_reaction(grid: &Grid, reaction: &Reaction) -> Option<Vec<f64>> {
    match reaction {
        Reaction::None => None,
        Reaction::Face(c) => {
            let s: [Vec<f64>; 3] = std::array::from_fn(|a| cell_average(grid, a, &c[a]));
            Some((0..grid.cells()).map(|i| (s[0][i] + s[1][i] + s[2][i]) / 3.0).collect())
        }
        Reaction::CellTensor(m) => Some(m.iter().map(|t| t.trace().max(0.0) / 3.0).collect()),
    }
}

fn zero_wall_faces(grid: &Grid, f: &mut Faces) {
    for (a, fa) in f.iter_mut().enumerate() {
        let d = grid.face_dims(a);
        for (idx, v) in fa.iter_mut().enumerate() {
            let ijk = unflatten(idx, d);
            if ijk[a] == 0 || ijk[a] == grid.n[a] {
                *v = 0.0;
            }
        }
    }
}

/// CG on the discretely divergence-free subspace: `P A P u = P f` with
/// preconditioner `P B P`, `B` the multigrid V-cycle and `P` the exact
/// projection. The pressure follows from `L p = D (A u - f)`.
fn solve_projected(
    grid: &Grid,
    reaction: &Reaction,
    forcing: &Faces,
    opts: &StokesOptions,
) -> Result<(GridField, SolveStats), GridError> {
    let t0 = Instant::now();
    let mut f = forcing.clone();
    zero_wall_faces(grid, &mut f);
    let mut stats = SolveStats::default();
    let mut field = GridField::zeros(*grid);
    let op = VelocityOperator::new(grid, reaction);
    let poisson = NeumannPoisson::new(grid);
    let project = |v: &mut Faces| {
        let phi = poisson.solve(&divergence(grid, v));
        add_div_transpose(grid, &phi, -1.0, v);
    };
    let mut r = f.clone();
    project(&mut r);
    let bn = fdot(&r, &r).sqrt();
    // a forcing that is a discrete gradient up to rounding moves no fluid
    let floor = 1e-13 * fdot(&f, &f).sqrt();
    let mut u = zeros(grid);
    if bn > floor {
        let mut z = op.precondition(&r);
        project(&mut z);
        let mut d = z.clone();
        let mut rz = fdot(&r, &z);
        let mut ad = zeros(grid);
        let mut rel = 1.0;
        let mut converged = false;
        for it in 1..=opts.max_outer {
            op.apply(&d, &mut ad);
            project(&mut ad);
            let alpha = rz / fdot(&d, &ad);
            for a in 0..3 {
                par::axpy(alpha, &d[a], &mut u[a]);
                par::axpy(-alpha, &ad[a], &mut r[a]);
            }
            let rn = fdot(&r, &r).sqrt();
            rel = rn / bn;
            stats.outer_iterations = it;
            if rel <= opts.outer_tol || rn <= floor {
                converged = true;
                break;
            }
            if !rel.is_finite() {
                break;
            }
            z = op.precondition(&r);
            project(&mut z);
            let rz_new = fdot(&r, &z);
            for a in 0..3 {
                par::xpby(&z[a], rz_new / rz, &mut d[a]);
            }
            rz = rz_new;
        }
        stats.outer_residual = rel;
        if !converged {
            return Err(GridError::NotConverged {
                solver: "projected CG",
                iterations: stats.outer_iterations,
                residual: rel,
            });
        }
        project(&mut u);
    }
    if fdot(&f, &f) > 0.0 {
        let mut au = zeros(grid);
        op.apply(&u, &mut au);
        for a in 0..3 {
            par::axpy(-1.0, &f[a], &mut au[a]);
        }
        field.p = poisson.solve(&divergence(grid, &au));
    }
    field.u = u;
    field.remove_pressure_mean();
    stats.max_divergence = field.max_divergence();
    stats.seconds = t0.elapsed().as_secs_f64();
    Ok((field, stats))
}

/// Solve the Stokes system with the given reaction and face forcing.
pub fn solve_stokes(
    grid: &Grid,
    reaction: &Reaction,
    forcing: &Faces,
    opts: &StokesOptions,
) -> Result<(GridField, SolveStats), GridError> {
    for a in 0..3 {
        if forcing[a].len() != grid.face_count(a) {
            return Err(GridError::InvalidInput(format!(
                "forcing component {a} has the wrong length"
            )));
        }
    }
    if forcing.iter().flatten().any(|v| !v.is_finite()) {
        return Err(GridError::InvalidInput("non-finite forcing".into()));
    }
    match opts.method {
        StokesMethod::Projected => solve_projected(grid, reaction, forcing, opts),
        StokesMethod::Uzawa => solve_uzawa(grid, reaction, forcing, opts),
    }
}

fn solve_uzawa(
    grid: &Grid,
    reaction: &Reaction,
    forcing: &Faces,
    opts: &StokesOptions,
) -> Result<(GridField, SolveStats), GridError> {
    let t0 = Instant::now();
    let mut f = forcing.clone();
    zero_wall_faces(grid, &mut f);
    let mut stats = SolveStats::default();
    let mut field = GridField::zeros(*grid);
    if fdot(&f, &f) == 0.0 {
        stats.seconds = t0.elapsed().as_secs_f64();
        return Ok((field, stats));
    }

    let op = VelocityOperator::new(grid, reaction);
    let poisson = NeumannPoisson::new(grid);
    let k_sqrt: Option<Vec<f64>> = cell_reaction(grid, reaction).map(|k| k.iter().map(|v| v.sqrt()).collect());
    let precond = |r: &[f64]| -> Vec<f64> {
        let mut z = r.to_vec();
        if let Some(ks) = &k_sqrt {
            let kr: Vec<f64> = r.iter().zip(ks).map(|(a, b)| a * b).collect();
            let s = poisson.solve(&kr);
            for ((zi, si), ki) in z.iter_mut().zip(&s).zip(ks) {
                *zi += ki * si;
            }
        }
        remove_mean(&mut z);
        z
    };

    let mut u = zeros(grid);
    stats.inner_iterations += op.solve(&f, &mut u, opts.inner_tol, opts.max_inner)?;
    let mut p = vec![0.0; grid.cells()];
    let mut r: Vec<f64> = divergence(grid, &u).iter().map(|v| -v).collect();
    remove_mean(&mut r);
    let r0 = par::dot(&r, &r).sqrt();
    let u_scale = fdot(&u, &u).sqrt();
    let mut rel = 0.0;
    if r0 > 1e-14 * u_scale / grid.h {
        let mut z = precond(&r);
        let mut d = z.clone();
        let mut rz = par::dot(&r, &z);
        let mut w = zeros(grid);
        let mut converged = false;
        for it in 1..=opts.max_outer {
            let mut b = zeros(grid);
            add_div_transpose(grid, &d, 1.0, &mut b);
            w.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v = 0.0));
            stats.inner_iterations += op.solve(&b, &mut w, opts.inner_tol, opts.max_inner)?;
            let sd = divergence(grid, &w);
            let alpha = rz / par::dot(&d, &sd);
            par::axpy(alpha, &d, &mut p);
            for a in 0..3 {
                par::axpy(alpha, &w[a], &mut u[a]);
            }
            par::axpy(-alpha, &sd, &mut r);
            remove_mean(&mut r);
            rel = par::dot(&r, &r).sqrt() / r0;
            stats.outer_iterations = it;
            if rel <= opts.outer_tol {
                converged = true;
                break;
            }
            if !rel.is_finite() {
                break;
            }
            z = precond(&r);
            let rz_new = par::dot(&r, &z);
            par::xpby(&z, rz_new / rz, &mut d);
            rz = rz_new;
        }
        if !converged {
            return Err(GridError::NotConverged {
                solver: "pressure CG",
                iterations: stats.outer_iterations,
                residual: rel,
            });
        }
    }
    stats.outer_residual = rel;

    // exact projection onto discretely divergence-free fields
    let phi = poisson.solve(&divergence(grid, &u));
    add_div_transpose(grid, &phi, -1.0, &mut u);

    field.u = u;
    field.p = p;
    field.remove_pressure_mean();
    stats.max_divergence = field.max_divergence();
    stats.seconds = t0.elapsed().as_secs_f64();
    Ok((field, stats))
}

fn remove_mean(v: &mut [f64]) {
    let m = par::sum_chunks(v.len(), |r| v[r].iter().sum()) / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}
