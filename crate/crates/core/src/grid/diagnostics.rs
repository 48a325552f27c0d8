use crate::geometry::{CloudConfiguration, ParticleShape};
use crate::par;
use crate::Vec3;

use super::field::GridField;
use super::{Grid, GridError};

/// `|D(u)|^2` over the whole box.
///
/// Diagonal strain is evaluated at cells, shear strain on cell edges with the
/// ghost-value wall derivative; edges lying on a wall carry weight 1/2. For
/// discretely divergence-free fields this equals `(1/2) u.(-Lap_h u) h^3`.
pub fn energy_norm(field: &GridField) -> f64 {
    energy_in_box(field, 0)
}

/// Energy density `|D(u)|^2 / volume` over the sub-box `margin` cells away
/// from the walls.
pub fn energy_norm_interior(field: &GridField, margin: usize) -> f64 {
    let g = &field.grid;
    let side: f64 = (0..3).map(|a| (g.n[a] - 2 * margin) as f64 * g.h).product();
    energy_in_box(field, margin) / side
}

fn energy_in_box(field: &GridField, m: usize) -> f64 {
    let g = &field.grid;
    let n = g.n;
    assert!(n.iter().all(|&c| c > 2 * m), "margin too large");
    let h = g.h;
    let h3 = g.cell_volume();
    let u = &field.u;
    let dims: [[usize; 3]; 3] = std::array::from_fn(|a| g.face_dims(a));
    let at = |a: usize, ijk: [usize; 3]| u[a][ijk[0] + dims[a][0] * (ijk[1] + dims[a][1] * ijk[2])];

    let diag = par::sum_chunks(n[2], |ks| {
        let mut s = 0.0;
        for k in ks.filter(|&k| k >= m && k < n[2] - m) {
            for j in m..n[1] - m {
                for i in m..n[0] - m {
                    for a in 0..3 {
                        let mut hi = [i, j, k];
                        hi[a] += 1;
                        let d = (at(a, hi) - at(a, [i, j, k])) / h;
                        s += d * d;
                    }
                }
            }
        }
        s
    });

    // derivative along b of component a at vertex index ib (cell axis b)
    let dcell = |a: usize, b: usize, mut ijk: [usize; 3]| -> f64 {
        let ib = ijk[b];
        if ib == 0 {
            2.0 * at(a, ijk) / h
        } else if ib == n[b] {
            ijk[b] -= 1;
            -2.0 * at(a, ijk) / h
        } else {
            let hi = at(a, ijk);
            ijk[b] -= 1;
            (hi - at(a, ijk)) / h
        }
    };
    let mut shear = 0.0;
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let c = 3 - a - b;
        shear += par::sum_chunks(n[c], |cs| {
            let mut s = 0.0;
            for ic in cs.filter(|&ic| ic >= m && ic < n[c] - m) {
                for ib in m..=n[b] - m {
                    for ia in m..=n[a] - m {
                        let mut w = 1.0;
                        if ia == m || ia == n[a] - m {
                            w *= 0.5;
                        }
                        if ib == m || ib == n[b] - m {
                            w *= 0.5;
                        }
                        let mut ijk = [0; 3];
                        ijk[a] = ia;
                        ijk[b] = ib;
                        ijk[c] = ic;
                        // u_a is cell-centred along b and vice versa; wall
                        // faces hold zero so the end vertices are safe
                        let dua = if ia == 0 || ia == n[a] { 0.0 } else { dcell(a, b, ijk) };
                        let dub = if ib == 0 || ib == n[b] { 0.0 } else { dcell(b, a, ijk) };
                        let e = dua + dub;
                        s += w * e * e;
                    }
                }
            }
            s
        });
    }
    (diag + 0.5 * shear) * h3
}

/// Mean velocity over `B(h_i, delta/2)` minus particle `i`, from cell values.
pub fn local_mean_velocity(
    field: &GridField,
    cloud: &CloudConfiguration,
    shapes: &[ParticleShape],
    i: usize,
) -> Result<Vec3, GridError> {
    let p = cloud.particles.get(i).ok_or(GridError::IndexOutOfRange(i))?;
    let g = &field.grid;
    let radius = cloud.delta() / 2.0;
    if cloud.domain.distance_to_boundary(&p.h) < radius {
        return Err(GridError::InvalidInput(format!(
            "averaging ball of particle {i} leaves the box"
        )));
    }
    let placed = cloud.placed_shape(i, shapes)?;
    let inside = placed.inside_tester();
    let lo = g.locate_cell(&(p.h - Vec3::repeat(radius)));
    let hi = g.locate_cell(&(p.h + Vec3::repeat(radius)));
    let mut sum = Vec3::zeros();
    let mut count = 0usize;
    for k in lo[2]..=hi[2] {
        for j in lo[1]..=hi[1] {
            for ii in lo[0]..=hi[0] {
                let x = g.cell_center(ii, j, k);
                if (x - p.h).norm() < radius && !inside.contains(&x) {
                    sum += field.cell_velocity(ii, j, k);
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        return Err(GridError::EmptyRegion(i));
    }
    Ok(sum / count as f64)
}

/// Restrict a field to a coarser grid over the same box. Coarse face values
/// are means of the fine face values covering them (flux conservative, so
/// divergence-free fields stay divergence free); pressure is cell averaged.
pub fn restrict_to(field: &GridField, coarse: &Grid) -> Result<GridField, GridError> {
    let fine = &field.grid;
    if fine.domain != coarse.domain {
        return Err(GridError::InvalidInput("grids cover different boxes".into()));
    }
    let r = fine.n[0] / coarse.n[0];
    if r == 0 || (0..3).any(|a| fine.n[a] != r * coarse.n[a]) {
        return Err(GridError::InvalidInput(format!(
            "fine grid {:?} is not an integer refinement of {:?}",
            fine.n, coarse.n
        )));
    }
    if r == 1 {
        return Ok(field.clone());
    }
    let mut out = GridField::zeros(*coarse);
    for a in 0..3 {
        let dc = coarse.face_dims(a);
        let df = fine.face_dims(a);
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        out.u[a] = par::map_range(coarse.face_count(a), |idx| {
            let ijk = super::unflatten(idx, dc);
            let mut s = 0.0;
            for q in 0..r {
                for p in 0..r {
                    let mut f = [0; 3];
                    f[a] = ijk[a] * r;
                    f[b] = ijk[b] * r + p;
                    f[c] = ijk[c] * r + q;
                    s += field.u[a][f[0] + df[0] * (f[1] + df[1] * f[2])];
                }
            }
            s / (r * r) as f64
        });
    }
    out.p = par::map_range(coarse.cells(), |idx| {
        let ijk = super::unflatten(idx, coarse.n);
        let mut s = 0.0;
        for q in 0..r {
            for p in 0..r {
                for o in 0..r {
                    s += field.p[fine.cell_index(ijk[0] * r + o, ijk[1] * r + p, ijk[2] * r + q)];
                }
            }
        }
        s / (r * r * r) as f64
    });
    Ok(out)
}

/// L2 norm of the velocity difference, both fields restricted to the coarser
/// grid when resolutions differ.
pub fn l2_distance(a: &GridField, b: &GridField) -> Result<f64, GridError> {
    let (a, b) = common_grid(a, b)?;
    let h3 = a.grid.cell_volume();
    let s: f64 = (0..3)
        .map(|c| par::sum_chunks(a.u[c].len(), |r| r.map(|i| (a.u[c][i] - b.u[c][i]).powi(2)).sum()))
        .sum();
    Ok((s * h3).sqrt())
}

/// `|a - reference| / |reference|` in L2.
pub fn relative_l2_distance(a: &GridField, reference: &GridField) -> Result<f64, GridError> {
    let zero = GridField::zeros(reference.grid);
    let norm = l2_distance(reference, &zero)?;
    if norm == 0.0 {
        return Err(GridError::InvalidInput("reference field is zero".into()));
    }
    Ok(l2_distance(a, reference)? / norm)
}

fn common_grid(a: &GridField, b: &GridField) -> Result<(GridField, GridField), GridError> {
    if a.grid == b.grid {
        return Ok((a.clone(), b.clone()));
    }
    if a.grid.n[0] >= b.grid.n[0] {
        Ok((restrict_to(a, &b.grid)?, b.clone()))
    } else {
        Ok((a.clone(), restrict_to(b, &a.grid)?))
    }
}
