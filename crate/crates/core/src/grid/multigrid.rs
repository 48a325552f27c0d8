//! Geometric multigrid for scalar operators `-Lap + c(x)` on one staggered
//! component.

use crate::par::{self, SyncPtr};

use super::GridError;

/// Placement of unknowns along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    /// Nodes at cell faces `0..=n`; the two end nodes are Dirichlet zeros.
    Vertex,
    /// Nodes at cell centres `0..n`; walls are imposed through the ghost
    /// value `-u`.
    Cell,
}

/// `-Lap_h + c` on a node set described by per-axis kinds.
#[derive(Debug, Clone)]
pub struct ScalarOperator {
    /// Cells per axis.
    pub n: [usize; 3],
    pub kinds: [AxisKind; 3],
    pub h: f64,
    /// Reaction coefficient per node; `None` means zero.
    pub c: Option<Vec<f64>>,
}

#[inline(always)]
fn axis_sum(kind: AxisKind, i: usize, n: usize, uc: f64, u: &[f64], idx: usize, stride: usize) -> f64 {
    match kind {
        AxisKind::Vertex => 2.0 * uc - u[idx - stride] - u[idx + stride],
        AxisKind::Cell => {
            let lo = if i > 0 { uc - u[idx - stride] } else { 2.0 * uc };
            let hi = if i + 1 < n { uc - u[idx + stride] } else { 2.0 * uc };
            lo + hi
        }
    }
}

#[inline(always)]
fn axis_diag(kind: AxisKind, i: usize, n: usize) -> f64 {
    match kind {
        AxisKind::Vertex => 2.0,
        AxisKind::Cell => (if i > 0 { 1.0 } else { 2.0 }) + (if i + 1 < n { 1.0 } else { 2.0 }),
    }
}

impl ScalarOperator {
    pub fn new(n: [usize; 3], kinds: [AxisKind; 3], h: f64, c: Option<Vec<f64>>) -> Self {
        let op = ScalarOperator { n, kinds, h, c };
        if let Some(c) = &op.c {
            assert_eq!(c.len(), op.len(), "reaction coefficient has the wrong length");
        }
        op
    }

    /// Operator for velocity component `a`.
    pub fn component(n: [usize; 3], a: usize, h: f64, c: Option<Vec<f64>>) -> Self {
        let kinds = std::array::from_fn(|b| if b == a { AxisKind::Vertex } else { AxisKind::Cell });
        Self::new(n, kinds, h, c)
    }

    pub fn dims(&self) -> [usize; 3] {
        std::array::from_fn(|a| match self.kinds[a] {
            AxisKind::Vertex => self.n[a] + 1,
            AxisKind::Cell => self.n[a],
        })
    }

    pub fn len(&self) -> usize {
        let d = self.dims();
        d[0] * d[1] * d[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True for Dirichlet boundary nodes, which are not unknowns.
    #[inline]
    pub fn is_fixed(&self, ijk: [usize; 3]) -> bool {
        (0..3).any(|a| self.kinds[a] == AxisKind::Vertex && (ijk[a] == 0 || ijk[a] == self.n[a]))
    }

    /// `out = (-Lap + c) u`, zero at fixed nodes.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let d = self.dims();
        let inv_h2 = 1.0 / (self.h * self.h);
        let (ilo, ihi) = self.plain_range(0);
        let (s1, s2) = (d[0], d[0] * d[1]);
        par::for_each_chunk_mut(out, d[0] * d[1], |k, plane| {
            for j in 0..d[1] {
                let row = &mut plane[d[0] * j..d[0] * (j + 1)];
                if self.fixed_on_axis(1, j) || self.fixed_on_axis(2, k) {
                    row.iter_mut().for_each(|v| *v = 0.0);
                    continue;
                }
                let base = d[0] * (j + d[1] * k);
                let fast = self.is_plain(1, j) && self.is_plain(2, k);
                for (i, o) in row.iter_mut().enumerate() {
                    let idx = base + i;
                    if fast && i >= ilo && i < ihi {
                        let c = self.c.as_ref().map_or(0.0, |c| c[idx]);
                        let uc = u[idx];
                        *o = (6.0 * uc
                            - u[idx - 1]
                            - u[idx + 1]
                            - u[idx - s1]
                            - u[idx + s1]
                            - u[idx - s2]
                            - u[idx + s2])
                            * inv_h2
                            + c * uc;
                    } else if self.is_fixed([i, j, k]) {
                        *o = 0.0;
                    } else {
                        *o = self.node_value(u, [i, j, k], idx, inv_h2);
                    }
                }
            }
        });
    }

    /// Index range along `axis` whose nodes have two regular neighbours.
    #[inline]
    fn plain_range(&self, axis: usize) -> (usize, usize) {
        match self.kinds[axis] {
            AxisKind::Vertex => (1, self.n[axis]),
            AxisKind::Cell => (1, self.n[axis] - 1),
        }
    }

    #[inline]
    fn fixed_on_axis(&self, axis: usize, i: usize) -> bool {
        self.kinds[axis] == AxisKind::Vertex && (i == 0 || i == self.n[axis])
    }

    #[inline]
    fn is_plain(&self, axis: usize, i: usize) -> bool {
        let (lo, hi) = self.plain_range(axis);
        i >= lo && i < hi
    }

    #[inline(always)]
    fn node_value(&self, u: &[f64], ijk: [usize; 3], idx: usize, inv_h2: f64) -> f64 {
        let d = self.dims();
        let uc = u[idx];
        let s = axis_sum(self.kinds[0], ijk[0], self.n[0], uc, u, idx, 1)
            + axis_sum(self.kinds[1], ijk[1], self.n[1], uc, u, idx, d[0])
            + axis_sum(self.kinds[2], ijk[2], self.n[2], uc, u, idx, d[0] * d[1]);
        let c = self.c.as_ref().map_or(0.0, |c| c[idx]);
        s * inv_h2 + c * uc
    }

    #[inline(always)]
    fn diag(&self, ijk: [usize; 3], idx: usize, inv_h2: f64) -> f64 {
        let s: f64 = (0..3).map(|a| axis_diag(self.kinds[a], ijk[a], self.n[a])).sum();
        s * inv_h2 + self.c.as_ref().map_or(0.0, |c| c[idx])
    }

    /// One Gauss-Seidel half sweep over nodes with `(i + j + k) % 2 == color`.
    fn smooth_color(&self, x: &mut [f64], b: &[f64], color: usize) {
        let d = self.dims();
        let inv_h2 = 1.0 / (self.h * self.h);
        let (ilo, ihi) = self.plain_range(0);
        let (s1, s2) = (d[0], d[0] * d[1]);
        let ptr = SyncPtr::new(x.as_mut_ptr());
        let len = x.len();
        par::for_each_index(d[2], |k| {
            // SAFETY: nodes of one color only read nodes of the other color,
            // and each plane k writes only its own nodes.
            let x = unsafe { std::slice::from_raw_parts_mut(ptr.get(), len) };
            for j in 0..d[1] {
                let start = (color + j + k) % 2;
                let fast = self.is_plain(1, j) && self.is_plain(2, k);
                let base = d[0] * (j + d[1] * k);
                for i in (start..d[0]).step_by(2) {
                    let idx = base + i;
                    if fast && i >= ilo && i < ihi {
                        let c = self.c.as_ref().map_or(0.0, |c| c[idx]);
                        let uc = x[idx];
                        let av = (6.0 * uc
                            - x[idx - 1]
                            - x[idx + 1]
                            - x[idx - s1]
                            - x[idx + s1]
                            - x[idx - s2]
                            - x[idx + s2])
                            * inv_h2
                            + c * uc;
                        x[idx] += (b[idx] - av) / (6.0 * inv_h2 + c);
                        continue;
                    }
                    let ijk = [i, j, k];
                    if self.is_fixed(ijk) {
                        continue;
                    }
                    let r = b[idx] - self.node_value(x, ijk, idx, inv_h2);
                    x[idx] += r / self.diag(ijk, idx, inv_h2);
                }
            }
        });
    }

    fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; x.len()];
        self.apply(x, &mut r);
        par::for_each_chunk_mut(&mut r, par::REDUCE_CHUNK, |c, chunk| {
            let off = c * par::REDUCE_CHUNK;
            for (t, v) in chunk.iter_mut().enumerate() {
                *v = b[off + t] - *v;
            }
        });
        self.zero_fixed(&mut r);
        r
    }

    /// Set the Dirichlet nodes of `v` to zero.
    pub fn zero_fixed(&self, v: &mut [f64]) {
        let d = self.dims();
        for a in 0..3 {
            if self.kinds[a] != AxisKind::Vertex {
                continue;
            }
            for_each_on_plane(d, a, 0, |idx| v[idx] = 0.0);
            for_each_on_plane(d, a, self.n[a], |idx| v[idx] = 0.0);
        }
    }

    fn coarsen(&self) -> Option<ScalarOperator> {
        if self.n.iter().any(|&n| n % 2 != 0 || n < 4) {
            return None;
        }
        let c = self.c.as_ref().map(|c| {
            let mut v = c.clone();
            let mut d = self.dims();
            for a in 0..3 {
                let (nv, nd) = average_axis(&v, d, a, self.kinds[a], self.n[a]);
                v = nv;
                d = nd;
            }
            v
        });
        Some(ScalarOperator::new(
            std::array::from_fn(|a| self.n[a] / 2),
            self.kinds,
            2.0 * self.h,
            c,
        ))
    }
}

fn for_each_on_plane(d: [usize; 3], axis: usize, at: usize, mut f: impl FnMut(usize)) {
    let (b, c) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    for q in 0..d[c] {
        for p in 0..d[b] {
            let mut ijk = [0; 3];
            ijk[axis] = at;
            ijk[b] = p;
            ijk[c] = q;
            f(ijk[0] + d[0] * (ijk[1] + d[1] * ijk[2]));
        }
    }
}

/// Apply a 1D line map along `axis`, producing an array whose length along
/// that axis is `out_len`.
fn map_lines<F>(src: &[f64], d: [usize; 3], axis: usize, out_len: usize, f: F) -> (Vec<f64>, [usize; 3])
where
    F: Fn(&[f64], &mut [f64]) + Sync + Send,
{
    let mut od = d;
    od[axis] = out_len;
    let mut out = vec![0.0; od[0] * od[1] * od[2]];
    let (b, c) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let stride_in = [1, d[0], d[0] * d[1]];
    let stride_out = [1, od[0], od[0] * od[1]];
    let ptr = SyncPtr::new(out.as_mut_ptr());
    let out_total = out.len();
    par::for_each_index(d[c], |q| {
        // SAFETY: every line (p, q) writes a disjoint set of output entries.
        let out = unsafe { std::slice::from_raw_parts_mut(ptr.get(), out_total) };
        let mut line = vec![0.0; d[axis]];
        let mut res = vec![0.0; out_len];
        for p in 0..d[b] {
            let base_in = p * stride_in[b] + q * stride_in[c];
            let base_out = p * stride_out[b] + q * stride_out[c];
            for (t, v) in line.iter_mut().enumerate() {
                *v = src[base_in + t * stride_in[axis]];
            }
            f(&line, &mut res);
            for (t, v) in res.iter().enumerate() {
                out[base_out + t * stride_out[axis]] = *v;
            }
        }
    });
    (out, od)
}

fn restrict_axis(src: &[f64], d: [usize; 3], axis: usize, kind: AxisKind, n: usize) -> (Vec<f64>, [usize; 3]) {
    let nc = n / 2;
    match kind {
        AxisKind::Vertex => map_lines(src, d, axis, nc + 1, |f, c| {
            c[0] = 0.0;
            c[nc] = 0.0;
            for i in 1..nc {
                c[i] = 0.25 * f[2 * i - 1] + 0.5 * f[2 * i] + 0.25 * f[2 * i + 1];
            }
        }),
        AxisKind::Cell => map_lines(src, d, axis, nc, |f, c| {
            for i in 0..nc {
                let lo = if i > 0 { f[2 * i - 1] } else { -f[0] };
                let hi = if i + 1 < nc { f[2 * i + 2] } else { -f[n - 1] };
                c[i] = 0.5 * (0.25 * lo + 0.75 * f[2 * i] + 0.75 * f[2 * i + 1] + 0.25 * hi);
            }
        }),
    }
}

fn prolong_axis(src: &[f64], d: [usize; 3], axis: usize, kind: AxisKind, n_fine: usize) -> (Vec<f64>, [usize; 3]) {
    let nc = n_fine / 2;
    match kind {
        AxisKind::Vertex => map_lines(src, d, axis, n_fine + 1, |c, f| {
            for i in 0..nc {
                f[2 * i] = c[i];
                f[2 * i + 1] = 0.5 * (c[i] + c[i + 1]);
            }
            f[n_fine] = c[nc];
        }),
        AxisKind::Cell => map_lines(src, d, axis, n_fine, |c, f| {
            for i in 0..nc {
                let lo = if i > 0 { c[i - 1] } else { -c[0] };
                let hi = if i + 1 < nc { c[i + 1] } else { -c[nc - 1] };
                f[2 * i] = 0.75 * c[i] + 0.25 * lo;
                f[2 * i + 1] = 0.75 * c[i] + 0.25 * hi;
            }
        }),
    }
}

/// Normalized averaging used for coarse reaction coefficients.
fn average_axis(src: &[f64], d: [usize; 3], axis: usize, kind: AxisKind, n: usize) -> (Vec<f64>, [usize; 3]) {
    let nc = n / 2;
    match kind {
        AxisKind::Vertex => map_lines(src, d, axis, nc + 1, |f, c| {
            c[0] = f[0];
            c[nc] = f[n];
            for i in 1..nc {
                c[i] = 0.25 * f[2 * i - 1] + 0.5 * f[2 * i] + 0.25 * f[2 * i + 1];
            }
        }),
        AxisKind::Cell => map_lines(src, d, axis, nc, |f, c| {
            for i in 0..nc {
                c[i] = 0.5 * (f[2 * i] + f[2 * i + 1]);
            }
        }),
    }
}

/// V-cycle hierarchy for one scalar operator.
#[derive(Debug, Clone)]
pub struct Multigrid {
    levels: Vec<ScalarOperator>,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    pub coarse_sweeps: usize,
}

impl Multigrid {
    pub fn new(fine: ScalarOperator) -> Self {
        let mut levels = vec![fine];
        while let Some(c) = levels.last().unwrap().coarsen() {
            levels.push(c);
        }
        Multigrid {
            levels,
            pre_sweeps: 2,
            post_sweeps: 2,
            coarse_sweeps: 30,
        }
    }

    pub fn operator(&self) -> &ScalarOperator {
        &self.levels[0]
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// One V-cycle from a zero initial guess; a symmetric approximation of
    /// the inverse.
    pub fn vcycle(&self, b: &[f64]) -> Vec<f64> {
        self.cycle(0, b)
    }

    fn cycle(&self, l: usize, b: &[f64]) -> Vec<f64> {
        let op = &self.levels[l];
        let mut x = vec![0.0; b.len()];
        if l + 1 == self.levels.len() {
            for _ in 0..self.coarse_sweeps {
                op.smooth_color(&mut x, b, 0);
                op.smooth_color(&mut x, b, 1);
            }
            for _ in 0..self.coarse_sweeps {
                op.smooth_color(&mut x, b, 1);
                op.smooth_color(&mut x, b, 0);
            }
            return x;
        }
        for _ in 0..self.pre_sweeps {
            op.smooth_color(&mut x, b, 0);
            op.smooth_color(&mut x, b, 1);
        }
        let r = op.residual(&x, b);
        let (mut rc, mut d) = (r, op.dims());
        for a in 0..3 {
            let (v, nd) = restrict_axis(&rc, d, a, op.kinds[a], op.n[a]);
            rc = v;
            d = nd;
        }
        let xc = self.cycle(l + 1, &rc);
        let (mut e, mut d) = (xc, self.levels[l + 1].dims());
        for a in 0..3 {
            let (v, nd) = prolong_axis(&e, d, a, op.kinds[a], op.n[a]);
            e = v;
            d = nd;
        }
        op.zero_fixed(&mut e);
        par::axpy(1.0, &e, &mut x);
        for _ in 0..self.post_sweeps {
            op.smooth_color(&mut x, b, 1);
            op.smooth_color(&mut x, b, 0);
        }
        x
    }

    /// Conjugate gradients preconditioned by V-cycles. Returns the iteration count.
    pub fn solve(&self, b: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> Result<usize, GridError> {
        let op = self.operator();
        let mut bb = b.to_vec();
        op.zero_fixed(&mut bb);
        let bn = par::dot(&bb, &bb).sqrt();
        if bn == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(0);
        }
        let mut r = op.residual(x, &bb);
        let mut z = self.vcycle(&r);
        let mut p = z.clone();
        let mut rz = par::dot(&r, &z);
        let mut ap = vec![0.0; x.len()];
        for it in 1..=max_iter {
            op.apply(&p, &mut ap);
            let alpha = rz / par::dot(&p, &ap);
            par::axpy(alpha, &p, x);
            par::axpy(-alpha, &ap, &mut r);
            let rel = par::dot(&r, &r).sqrt() / bn;
            if rel <= rel_tol {
                return Ok(it);
            }
            z = self.vcycle(&r);
            let rz_new = par::dot(&r, &z);
            par::xpby(&z, rz_new / rz, &mut p);
            rz = rz_new;
        }
        Err(GridError::NotConverged {
            solver: "multigrid CG",
            iterations: max_iter,
            residual: par::dot(&r, &r).sqrt() / bn,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn operator_is_symmetric() {
        for a in 0..3 {
            let n = [8, 6, 10];
            let op = ScalarOperator::component(n, a, 0.1, None);
            let mut x = random_vec(op.len(), 1);
            let mut y = random_vec(op.len(), 2);
            op.zero_fixed(&mut x);
            op.zero_fixed(&mut y);
            let (mut ax, mut ay) = (vec![0.0; op.len()], vec![0.0; op.len()]);
            op.apply(&x, &mut ax);
            op.apply(&y, &mut ay);
            let (l, r) = (par::dot(&ax, &y), par::dot(&x, &ay));
            assert!((l - r).abs() < 1e-10 * l.abs());
            assert!(par::dot(&ax, &x) > 0.0);
        }
    }

    #[test]
    fn restriction_is_half_transpose_of_prolongation() {
        for kind in [AxisKind::Vertex, AxisKind::Cell] {
            let n = 8;
            let dlen = |m: usize| if kind == AxisKind::Vertex { m + 1 } else { m };
            let fine = random_vec(dlen(n), 3);
            let mut coarse = random_vec(dlen(n / 2), 4);
            if kind == AxisKind::Vertex {
                coarse[0] = 0.0;
                coarse[n / 2] = 0.0;
            }
            let (rf, _) = restrict_axis(&fine, [dlen(n), 1, 1], 0, kind, n);
            let (pc, _) = prolong_axis(&coarse, [dlen(n / 2), 1, 1], 0, kind, n);
            let lhs = par::dot(&rf, &coarse);
            let rhs = 0.5 * par::dot(&fine, &pc);
            assert!((lhs - rhs).abs() < 1e-12, "{kind:?}");
        }
    }

    #[test]
    fn multigrid_cg_converges_fast() {
        for a in 0..3 {
            let n = [32, 32, 32];
            let h = 1.0 / 32.0;
            let op = ScalarOperator::component(n, a, h, None);
            let mg = Multigrid::new(op.clone());
            assert_eq!(mg.depth(), 5);
            let b = random_vec(op.len(), 5);
            let mut x = vec![0.0; op.len()];
            let it = mg.solve(&b, &mut x, 1e-10, 50).unwrap();
            assert!(it <= 15, "component {a}: {it} iterations");
        }
    }

    #[test]
    fn multigrid_handles_large_reaction_jumps() {
        let n = [32, 32, 32];
        let h = 1.0 / 32.0;
        let proto = ScalarOperator::component(n, 0, h, None);
        let d = proto.dims();
        let c: Vec<f64> = (0..proto.len())
            .map(|idx| {
                let [i, j, k] = super::super::unflatten(idx, d);
                let r2 = (i as f64 - 16.0).powi(2) + (j as f64 - 16.0).powi(2) + (k as f64 - 16.0).powi(2);
                if r2 < 36.0 {
                    10.0 / (h * h)
                } else {
                    0.0
                }
            })
            .collect();
        let mg = Multigrid::new(ScalarOperator::component(n, 0, h, Some(c)));
        let b = random_vec(proto.len(), 6);
        let mut x = vec![0.0; proto.len()];
        let it = mg.solve(&b, &mut x, 1e-10, 60).unwrap();
        assert!(it <= 25, "{it}");
    }
}
