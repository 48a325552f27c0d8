//! Exact Neumann Poisson solves on cell-centred data by cosine transforms.

use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use crate::par::{self, SyncPtr};

use super::Grid;

/// Solver for `D D^T phi = rhs`, the cell Laplacian with homogeneous Neumann
/// walls (positive semidefinite, constants in the kernel).
pub struct NeumannPoisson {
    n: [usize; 3],
    plans: [Arc<dyn TransformType2And3<f64>>; 3],
    eig: [Vec<f64>; 3],
}

impl std::fmt::Debug for NeumannPoisson {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NeumannPoisson").field("n", &self.n).finish()
    }
}

impl NeumannPoisson {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = DctPlanner::new();
        let n = grid.n;
        let h2 = grid.h * grid.h;
        NeumannPoisson {
            n,
            plans: std::array::from_fn(|a| planner.plan_dct2(n[a])),
            eig: std::array::from_fn(|a| {
                (0..n[a])
                    .map(|k| (2.0 - 2.0 * (std::f64::consts::PI * k as f64 / n[a] as f64).cos()) / h2)
                    .collect()
            }),
        }
    }

    /// Mean-free solution; the mean of `rhs` is ignored.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        for a in 0..3 {
            self.transform(&mut x, a, false);
        }
        let n = self.n;
        par::for_each_chunk_mut(&mut x, n[0] * n[1], |k, plane| {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    let lam = self.eig[0][i] + self.eig[1][j] + self.eig[2][k];
                    let v = &mut plane[i + n[0] * j];
                    *v = if lam > 0.0 { *v / lam } else { 0.0 };
                }
            }
        });
        for a in 0..3 {
            self.transform(&mut x, a, true);
        }
        let scale = 8.0 / (n[0] * n[1] * n[2]) as f64;
        x.iter_mut().for_each(|v| *v *= scale);
        x
    }

    fn transform(&self, x: &mut [f64], axis: usize, inverse: bool) {
        let n = self.n;
        let (b, c) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let stride = [1, n[0], n[0] * n[1]];
        let plan = &self.plans[axis];
        let ptr = SyncPtr::new(x.as_mut_ptr());
        let len = x.len();
        par::for_each_index(n[c], |q| {
            // SAFETY: lines (p, q) are disjoint.
            let x = unsafe { std::slice::from_raw_parts_mut(ptr.get(), len) };
            let mut line = vec![0.0; n[axis]];
            let mut scratch = vec![0.0; plan.get_scratch_len()];
            for p in 0..n[b] {
                let base = p * stride[b] + q * stride[c];
                for (t, v) in line.iter_mut().enumerate() {
                    *v = x[base + t * stride[axis]];
                }
                if inverse {
                    plan.process_dct3_with_scratch(&mut line, &mut scratch);
                } else {
                    plan.process_dct2_with_scratch(&mut line, &mut scratch);
                }
                for (t, v) in line.iter().enumerate() {
                    x[base + t * stride[axis]] = *v;
                }
            }
        });
    }
}
