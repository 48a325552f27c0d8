use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::geometry::{ParticleShape, RigidMotion};
use crate::par::{self, SyncPtr};
use crate::{Mat3, Vec3};

use super::panels::{regularized_stokeslet, PanelDiscretization};
use super::ExteriorError;

/// Largest panel count solved with a dense Cholesky factorization.
pub const DENSE_PANEL_LIMIT: usize = 6000;
/// Relative residual required of every collocation solve.
pub const SOLVER_TOLERANCE: f64 = 1e-10;
const MAX_CG_ITERATIONS: usize = 5000;

/// Linear solver used for the collocation system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Dense up to [`DENSE_PANEL_LIMIT`] panels, iterative beyond.
    #[default]
    Auto,
    Dense,
    /// Matrix-free conjugate gradients preconditioned by the inverse
    /// diagonal 3x3 blocks.
    Iterative,
}

/// Discretization and solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExteriorOptions {
    /// `epsilon = epsilon_factor * mean panel diameter`, in `(0, 2]`.
    pub epsilon_factor: f64,
    /// Relative collocation residual required of every solve.
    pub tolerance: f64,
    pub dense_panel_limit: usize,
    pub max_iterations: usize,
    pub solver: SolverKind,
}

impl Default for ExteriorOptions {
    fn default() -> Self {
        ExteriorOptions {
            epsilon_factor: 1.0,
            tolerance: SOLVER_TOLERANCE,
            dense_panel_limit: DENSE_PANEL_LIMIT,
            max_iterations: MAX_CG_ITERATIONS,
            solver: SolverKind::Auto,
        }
    }
}

enum Factorization {
    Dense(faer::linalg::solvers::Llt<f64>),
    Iterative { block_inv: Vec<Mat3> },
}

/// Traction densities solving one exterior problem.
#[derive(Debug, Clone)]
pub struct TractionSolution {
    /// Per-panel traction (force per unit area).
    pub densities: Vec<Vec3>,
    pub boundary_motion: RigidMotion,
    /// Relative residual of the collocation system.
    pub residual: f64,
    panels: Arc<PanelDiscretization>,
}

impl TractionSolution {
    pub fn panels(&self) -> &PanelDiscretization {
        &self.panels
    }

    pub fn same_surface(&self, other: &TractionSolution) -> bool {
        Arc::ptr_eq(&self.panels, &other.panels)
            || (self.panels.centers == other.panels.centers && self.panels.epsilon == other.panels.epsilon)
    }

    /// Panel forces `f_j A_j`.
    pub fn panel_forces(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.densities.iter().zip(&self.panels.areas).map(|(f, a)| f * *a)
    }
}

/// A discretized surface with its factored collocation operator, reusable
/// for any number of boundary motions.
pub struct ExteriorProblem {
    panels: Arc<PanelDiscretization>,
    center: Vec3,
    factor: Factorization,
    tolerance: f64,
    max_iterations: usize,
}

impl std::fmt::Debug for ExteriorProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExteriorProblem")
            .field("panels", &self.panels.len())
            .field("epsilon", &self.panels.epsilon)
            .field("dense", &matches!(self.factor, Factorization::Dense(_)))
            .finish()
    }
}

impl ExteriorProblem {
    pub fn new(shape: &ParticleShape, epsilon_factor: f64) -> Result<Self, ExteriorError> {
        Self::with_solver(shape, epsilon_factor, SolverKind::Auto)
    }

    pub fn with_solver(shape: &ParticleShape, epsilon_factor: f64, kind: SolverKind) -> Result<Self, ExteriorError> {
        Self::with_options(
            shape,
            &ExteriorOptions {
                epsilon_factor,
                solver: kind,
                ..Default::default()
            },
        )
    }

    pub fn with_options(shape: &ParticleShape, opts: &ExteriorOptions) -> Result<Self, ExteriorError> {
        if !(opts.tolerance > 0.0 && opts.tolerance < 1.0) {
            return Err(ExteriorError::InvalidParameter(format!(
                "tolerance {} outside (0, 1)",
                opts.tolerance
            )));
        }
        let panels = Arc::new(PanelDiscretization::from_shape(shape, opts.epsilon_factor)?);
        let dense = match opts.solver {
            SolverKind::Auto => panels.len() <= opts.dense_panel_limit,
            SolverKind::Dense => true,
            SolverKind::Iterative => false,
        };
        let factor = if dense {
            let g = assemble(&panels);
            let llt = g
                .llt(Side::Lower)
                .map_err(|e| ExteriorError::Singular(format!("Cholesky failed: {e:?}")))?;
            Factorization::Dense(llt)
        } else {
            let block_inv = (0..panels.len())
                .map(|k| {
                    panels
                        .block(k, k)
                        .try_inverse()
                        .ok_or_else(|| ExteriorError::Singular(format!("diagonal block {k} is singular")))
                })
                .collect::<Result<_, _>>()?;
            Factorization::Iterative { block_inv }
        };
        Ok(ExteriorProblem {
            panels,
            center: shape.volume_centroid(),
            factor,
            tolerance: opts.tolerance,
            max_iterations: opts.max_iterations,
        })
    }

    pub fn panels(&self) -> &PanelDiscretization {
        &self.panels
    }

    /// Torque reference point (volume centroid of the shape).
    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn solve(&self, motion: &RigidMotion) -> Result<TractionSolution, ExteriorError> {
        Ok(self.solve_many(std::slice::from_ref(motion))?.remove(0))
    }

    /// Solve for several boundary motions at once.
    pub fn solve_many(&self, motions: &[RigidMotion]) -> Result<Vec<TractionSolution>, ExteriorError> {
        if let Some(m) = motions.iter().find(|m| !m.is_finite()) {
            return Err(ExteriorError::InvalidParameter(format!("non-finite motion {m:?}")));
        }
        let n = self.panels.len();
        let rhs: Vec<Vec<f64>> = motions
            .iter()
            .map(|m| {
                let mut b = vec![0.0; 3 * n];
                for (k, c) in self.panels.centers.iter().enumerate() {
                    b[3 * k..3 * k + 3].copy_from_slice(m.velocity_at(c).as_slice());
                }
                b
            })
            .collect();
        let solutions: Vec<Vec<f64>> = match &self.factor {
            Factorization::Dense(llt) => {
                let b = Mat::<f64>::from_fn(3 * n, motions.len(), |i, j| rhs[j][i]);
                let x = llt.solve(&b);
                (0..motions.len())
                    .map(|j| (0..3 * n).map(|i| x[(i, j)]).collect())
                    .collect()
            }
            Factorization::Iterative { block_inv } => {
                rhs.iter().map(|b| self.pcg(b, block_inv)).collect::<Result<_, _>>()?
            }
        };
        motions
            .iter()
            .zip(rhs.iter().zip(solutions))
            .map(|(m, (b, g))| {
                let bn = par::dot(b, b).sqrt();
                let residual = if bn == 0.0 {
                    par::max_abs(&g)
                } else {
                    let mut r = self.apply(&g);
                    for (ri, bi) in r.iter_mut().zip(b) {
                        *ri -= bi;
                    }
                    par::dot(&r, &r).sqrt() / bn
                };
                if !(residual <= self.tolerance) {
                    return Err(ExteriorError::NotConverged {
                        iterations: 0,
                        residual,
                    });
                }
                let densities = (0..n)
                    .map(|k| Vec3::new(g[3 * k], g[3 * k + 1], g[3 * k + 2]) / self.panels.areas[k])
                    .collect();
                Ok(TractionSolution {
                    densities,
                    boundary_motion: *m,
                    residual,
                    panels: Arc::clone(&self.panels),
                })
            })
            .collect()
    }

    /// Matrix-free product with the collocation operator.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        let p = &self.panels;
        let n = p.len();
        let rows = par::map_range(n, |k| {
            let mut acc = Vec3::zeros();
            for j in 0..n {
                acc += p.block(k, j) * Vec3::new(g[3 * j], g[3 * j + 1], g[3 * j + 2]);
            }
            acc
        });
        rows.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
    }

    fn pcg(&self, b: &[f64], block_inv: &[Mat3]) -> Result<Vec<f64>, ExteriorError> {
        let precond = |r: &[f64]| -> Vec<f64> {
            block_inv
                .iter()
                .enumerate()
                .flat_map(|(k, m)| {
                    let z = m * Vec3::new(r[3 * k], r[3 * k + 1], r[3 * k + 2]);
                    [z.x, z.y, z.z]
                })
                .collect()
        };
        let bn = par::dot(b, b).sqrt();
        let mut x = vec![0.0; b.len()];
        if bn == 0.0 {
            return Ok(x);
        }
        let mut r = b.to_vec();
        let mut z = precond(&r);
        let mut p = z.clone();
        let mut rz = par::dot(&r, &z);
        for it in 0..self.max_iterations {
            let ap = self.apply(&p);
            let alpha = rz / par::dot(&p, &ap);
            par::axpy(alpha, &p, &mut x);
            par::axpy(-alpha, &ap, &mut r);
            let rn = par::dot(&r, &r).sqrt() / bn;
            if rn <= self.tolerance * 0.1 {
                return Ok(x);
            }
            if !rn.is_finite() {
                return Err(ExteriorError::NotConverged {
                    iterations: it,
                    residual: rn,
                });
            }
            z = precond(&r);
            let rz_new = par::dot(&r, &z);
            par::xpby(&z, rz_new / rz, &mut p);
            rz = rz_new;
        }
        let mut res = self.apply(&x);
        for (ri, bi) in res.iter_mut().zip(b) {
            *ri -= bi;
        }
        Err(ExteriorError::NotConverged {
            iterations: self.max_iterations,
            residual: par::dot(&res, &res).sqrt() / bn,
        })
    }
}

fn assemble(p: &PanelDiscretization) -> Mat<f64> {
    let n = p.len();
    let mut g = Mat::<f64>::zeros(3 * n, 3 * n);
    let stride = g.col_stride();
    let ptr = SyncPtr::new(g.as_ptr_mut());
    // each task writes the three columns of panel j
    par::for_each_index(n, |j| {
        let base = ptr.get();
        for k in 0..n {
            let b = p.block(k, j);
            for c in 0..3 {
                for r in 0..3 {
                    let off = (3 * k + r) as isize + (3 * j + c) as isize * stride;
                    // SAFETY: (3k+r, 3j+c) is in bounds and column 3j+c is only
                    // written by task j.
                    unsafe { *base.offset(off) = b[(r, c)] };
                }
            }
        }
    });
    g
}

/// Solve one exterior problem from scratch.
pub fn solve_exterior(
    shape: &ParticleShape,
    motion: &RigidMotion,
    epsilon_factor: f64,
) -> Result<TractionSolution, ExteriorError> {
    ExteriorProblem::new(shape, epsilon_factor)?.solve(motion)
}

/// Force `sum f_j A_j` and torque `sum (x_j - center) x f_j A_j`.
pub fn force_torque(sol: &TractionSolution, center: &Vec3) -> (Vec3, Vec3) {
    let mut f = Vec3::zeros();
    let mut t = Vec3::zeros();
    for (x, g) in sol.panels.centers.iter().zip(sol.panel_forces()) {
        f += g;
        t += (x - center).cross(&g);
    }
    (f, t)
}

/// Velocity induced by the solved densities at arbitrary points.
pub fn evaluate_velocity(sol: &TractionSolution, points: &[Vec3]) -> Vec<Vec3> {
    let p = &sol.panels;
    let g: Vec<Vec3> = sol.panel_forces().collect();
    par::map_range(points.len(), |i| {
        let mut u = Vec3::zeros();
        for (c, gj) in p.centers.iter().zip(&g) {
            u += regularized_stokeslet(&(points[i] - c), p.epsilon) * gj;
        }
        u
    })
}

/// Work of the traction of `sol` against the rigid motion `motion`:
/// `ell . F + omega . T`, the torque taken about `motion.center`.
pub fn energy_pairing(sol: &TractionSolution, motion: &RigidMotion) -> f64 {
    let (f, t) = force_torque(sol, &motion.center);
    motion.ell.dot(&f) + motion.omega.dot(&t)
}

/// Relative asymmetry `|<A, mB> - <B, mA>| / max(|<A, mB>|, |<B, mA>|)`.
pub fn pairing_asymmetry(a: &TractionSolution, b: &TractionSolution) -> Result<f64, ExteriorError> {
    if !a.same_surface(b) {
        return Err(ExteriorError::ShapeMismatch);
    }
    let ab = energy_pairing(a, &b.boundary_motion);
    let ba = energy_pairing(b, &a.boundary_motion);
    let scale = ab.abs().max(ba.abs());
    Ok(if scale == 0.0 { 0.0 } else { (ab - ba).abs() / scale })
}

/// Boundary data `K_i`: `e_i` for `i < 3`, `e_{i-3} x (x - center)` otherwise.
pub fn rigid_basis_motion(i: usize, center: Vec3) -> RigidMotion {
    let mut v = nalgebra::Vector6::zeros();
    v[i] = 1.0;
    RigidMotion::from_generalized(&v, center)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_ellipsoid_mesh, make_sphere_mesh};
    use std::f64::consts::PI;

    #[test]
    fn zero_motion_gives_zero_densities() {
        let s = make_sphere_mesh(1.0, 2).unwrap();
        let sol = solve_exterior(&s, &RigidMotion::zero(), 1.0).unwrap();
        assert!(sol.densities.iter().all(|d| d.norm() == 0.0));
        let (f, t) = force_torque(&sol, &Vec3::zeros());
        assert_eq!((f.norm(), t.norm()), (0.0, 0.0));
        assert!(evaluate_velocity(&sol, &[Vec3::new(3.0, 0.0, 0.0)])[0].norm() == 0.0);
    }

    #[test]
    fn translating_sphere_drag() {
        let s = make_sphere_mesh(1.0, 3).unwrap();
        let sol = solve_exterior(&s, &RigidMotion::translation(Vec3::x()), 1.0).unwrap();
        let (f, t) = force_torque(&sol, &Vec3::zeros());
        assert!((f - 6.0 * PI * Vec3::x()).norm() <= 0.02 * 6.0 * PI, "{f}");
        assert!(t.norm() < 1e-2);
        assert!(sol.residual <= SOLVER_TOLERANCE);
        let e = energy_pairing(&sol, &RigidMotion::translation(Vec3::x()));
        assert!((e - 6.0 * PI).abs() < 0.02 * 6.0 * PI);
    }

    #[test]
    fn torque_center_shift_is_exact() {
        let s = make_ellipsoid_mesh([1.0, 0.6, 0.4], 2).unwrap();
        let sol = solve_exterior(
            &s,
            &RigidMotion::new(Vec3::new(0.3, -1.0, 0.2), Vec3::y(), Vec3::zeros()),
            1.0,
        )
        .unwrap();
        let d = Vec3::new(0.2, -0.7, 1.1);
        let (f, t0) = force_torque(&sol, &Vec3::zeros());
        let (_, t1) = force_torque(&sol, &d);
        assert!((t1 - (t0 - d.cross(&f))).norm() < 1e-12 * (1.0 + t0.norm()));
    }

    #[test]
    fn densities_are_linear_in_the_motion() {
        let s = make_ellipsoid_mesh([1.0, 0.5, 0.5], 2).unwrap();
        let prob = ExteriorProblem::new(&s, 1.0).unwrap();
        let m1 = RigidMotion::new(Vec3::new(1.0, 2.0, 0.0), Vec3::new(0.0, 0.5, 1.0), Vec3::zeros());
        let m2 = RigidMotion::new(Vec3::new(-0.5, 0.0, 3.0), Vec3::new(2.0, 0.0, 0.0), Vec3::zeros());
        let (a, b) = (2.5, -0.75);
        let combo = RigidMotion::new(m1.ell * a + m2.ell * b, m1.omega * a + m2.omega * b, Vec3::zeros());
        let s = prob.solve_many(&[m1, m2, combo]).unwrap();
        let scale = s[2].densities.iter().map(|d| d.norm()).fold(0.0, f64::max);
        for k in 0..s[0].densities.len() {
            let lin = s[0].densities[k] * a + s[1].densities[k] * b;
            assert!((lin - s[2].densities[k]).norm() <= 1e-9 * scale);
        }
    }

    #[test]
    fn iterative_and_dense_paths_agree() {
        let s = make_ellipsoid_mesh([1.0, 0.7, 0.5], 2).unwrap();
        let m = RigidMotion::new(Vec3::new(0.2, 1.0, -0.4), Vec3::new(0.3, 0.0, 1.0), Vec3::zeros());
        let d = ExteriorProblem::with_solver(&s, 1.0, SolverKind::Dense)
            .unwrap()
            .solve(&m)
            .unwrap();
        let i = ExteriorProblem::with_solver(&s, 1.0, SolverKind::Iterative)
            .unwrap()
            .solve(&m)
            .unwrap();
        let (fd, td) = force_torque(&d, &Vec3::zeros());
        let (fi, ti) = force_torque(&i, &Vec3::zeros());
        assert!((fd - fi).norm() < 1e-8 * fd.norm());
        assert!((td - ti).norm() < 1e-8 * fd.norm());
        assert!(i.residual <= SOLVER_TOLERANCE);
    }

    #[test]
    fn pairing_requires_same_surface() {
        let a = solve_exterior(
            &make_sphere_mesh(1.0, 1).unwrap(),
            &RigidMotion::translation(Vec3::x()),
            1.0,
        )
        .unwrap();
        let b = solve_exterior(
            &make_sphere_mesh(0.5, 1).unwrap(),
            &RigidMotion::translation(Vec3::y()),
            1.0,
        )
        .unwrap();
        assert!(matches!(pairing_asymmetry(&a, &b), Err(ExteriorError::ShapeMismatch)));
        assert_eq!(energy_pairing(&a, &RigidMotion::zero()), 0.0);
    }

    #[test]
    fn rigid_basis_fields() {
        let c = Vec3::new(0.1, 0.2, 0.3);
        let x = Vec3::new(1.0, -1.0, 2.0);
        for i in 0..3 {
            assert_eq!(rigid_basis_motion(i, c).velocity_at(&x), Vec3::ith(i, 1.0));
            let e = Vec3::ith(i, 1.0);
            assert!((rigid_basis_motion(i + 3, c).velocity_at(&x) - e.cross(&(x - c))).norm() < 1e-15);
        }
    }
}
