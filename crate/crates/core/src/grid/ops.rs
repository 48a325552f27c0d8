//! Discrete divergence, its transpose and face/cell averaging.

use crate::par;

use super::multigrid::ScalarOperator;
use super::Grid;

/// Cell divergence `D u`.
pub fn divergence(grid: &Grid, u: &[Vec<f64>; 3]) -> Vec<f64> {
    let n = grid.n;
    let inv_h = 1.0 / grid.h;
    let mut out = vec![0.0; grid.cells()];
    let d: [[usize; 3]; 3] = std::array::from_fn(|a| grid.face_dims(a));
    par::for_each_chunk_mut(&mut out, n[0] * n[1], |k, plane| {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let f0 = i + d[0][0] * (j + d[0][1] * k);
                let f1 = i + d[1][0] * (j + d[1][1] * k);
                let f2 = i + d[2][0] * (j + d[2][1] * k);
                plane[i + n[0] * j] =
                    (u[0][f0 + 1] - u[0][f0] + u[1][f1 + d[1][0]] - u[1][f1] + u[2][f2 + d[2][0] * d[2][1]] - u[2][f2])
                        * inv_h;
            }
        }
    });
    out
}

pub fn max_divergence(grid: &Grid, u: &[Vec<f64>; 3]) -> f64 {
    par::max_abs(&divergence(grid, u))
}

/// `out += scale * D^T p` on interior faces; `D^T p = (p_{i-1} - p_i) / h`.
pub fn add_div_transpose(grid: &Grid, p: &[f64], scale: f64, out: &mut [Vec<f64>; 3]) {
    let n = grid.n;
    let s = scale / grid.h;
    for (a, ua) in out.iter_mut().enumerate() {
        let d = grid.face_dims(a);
        let stride = [1, n[0], n[0] * n[1]][a];
        par::for_each_chunk_mut(ua, d[0] * d[1], |k, plane| {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    let ijk = [i, j, k];
                    if ijk[a] == 0 || ijk[a] == n[a] {
                        continue;
                    }
                    let c = grid.cell_index(i, j, k);
                    plane[i + d[0] * j] += s * (p[c - stride] - p[c]);
                }
            }
        });
    }
}

/// `out = -Lap_h u_a` for velocity component `a`.
pub fn laplacian_component(grid: &Grid, a: usize, u: &[f64], out: &mut [f64]) {
    ScalarOperator::component(grid.n, a, grid.h, None).apply(u, out);
}

/// Average of component `a` over the two faces of each cell.
pub fn cell_average(grid: &Grid, a: usize, u: &[f64]) -> Vec<f64> {
    let n = grid.n;
    let d = grid.face_dims(a);
    let stride = [1, d[0], d[0] * d[1]][a];
    let mut out = vec![0.0; grid.cells()];
    par::for_each_chunk_mut(&mut out, n[0] * n[1], |k, plane| {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let f = i + d[0] * (j + d[1] * k);
                plane[i + n[0] * j] = 0.5 * (u[f] + u[f + stride]);
            }
        }
    });
    out
}

/// Average of a cell field onto interior faces normal to `a` (zero on the
/// wall faces); the transpose of [`cell_average`] on the unknowns.
pub fn face_average_of_cells(grid: &Grid, a: usize, cell: &[f64]) -> Vec<f64> {
    let n = grid.n;
    let d = grid.face_dims(a);
    let stride = [1, n[0], n[0] * n[1]][a];
    let mut out = vec![0.0; grid.face_count(a)];
    par::for_each_chunk_mut(&mut out, d[0] * d[1], |k, plane| {
        for j in 0..d[1] {
            for i in 0..d[0] {
                let ijk = [i, j, k];
                if ijk[a] == 0 || ijk[a] == n[a] {
                    continue;
                }
                let c = grid.cell_index(i, j, k);
                plane[i + d[0] * j] = 0.5 * (cell[c - stride] + cell[c]);
            }
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        Grid::new(
            Aabb::new(crate::Vec3::zeros(), crate::Vec3::new(1.0, 1.25, 1.5)),
            [8, 10, 12],
        )
        .unwrap()
    }

    #[test]
    fn div_transpose_is_adjoint() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut u: [Vec<f64>; 3] =
            std::array::from_fn(|a| (0..g.face_count(a)).map(|_| rng.random_range(-1.0..1.0)).collect());
        // wall-normal faces are not unknowns
        for (a, ua) in u.iter_mut().enumerate() {
            let d = g.face_dims(a);
            for (idx, v) in ua.iter_mut().enumerate() {
                let ijk = crate::grid::unflatten(idx, d);
                if ijk[a] == 0 || ijk[a] == g.n[a] {
                    *v = 0.0;
                }
            }
        }
        let p: Vec<f64> = (0..g.cells()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let du = divergence(&g, &u);
        let mut dtp: [Vec<f64>; 3] = std::array::from_fn(|a| vec![0.0; g.face_count(a)]);
        add_div_transpose(&g, &p, 1.0, &mut dtp);
        let lhs = par::dot(&du, &p);
        let rhs: f64 = (0..3).map(|a| par::dot(&u[a], &dtp[a])).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));

        let c: Vec<f64> = (0..g.cells()).map(|_| rng.random_range(-1.0..1.0)).collect();
        for a in 0..3 {
            let l = par::dot(&cell_average(&g, a, &u[a]), &c);
            let r = par::dot(&u[a], &face_average_of_cells(&g, a, &c));
            assert!((l - r).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_field_has_constant_divergence() {
        let g = grid();
        let mut u: [Vec<f64>; 3] = std::array::from_fn(|a| vec![0.0; g.face_count(a)]);
        let d = g.face_dims(0);
        for (idx, v) in u[0].iter_mut().enumerate() {
            let [i, j, k] = crate::grid::unflatten(idx, d);
            *v = g.face_point(0, i, j, k).x;
        }
        let div = divergence(&g, &u);
        assert!(div.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }
}
