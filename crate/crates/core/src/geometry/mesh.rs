use std::collections::HashMap;
use std::f64::consts::PI;

use super::rigid::is_rotation;
use super::GeometryError;
use crate::{Mat3, Vec3};

/// Default containment radius of reference shapes.
pub const DEFAULT_R0: f64 = 1.0;

/// Closed, consistently oriented triangulated surface.
///
/// Reference shapes live at unit scale and are contained in `B(0, R0)`; the
/// scaled copies produced by [`place_particle`] sit at their physical position.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleShape {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    centroid_offset: Vec3,
}

impl ParticleShape {
    /// Build a shape from raw data, checking that the surface is closed and
    /// orientable. Inward-oriented surfaces are flipped so that the signed
    /// volume is positive.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        if triangles.len() < 4 {
            return Err(GeometryError::Degenerate(format!(
                "{} triangles cannot enclose a volume",
                triangles.len()
            )));
        }
        for t in &triangles {
            if t.iter().any(|&i| i >= vertices.len()) {
                return Err(GeometryError::Degenerate(format!(
                    "triangle {t:?} references a missing vertex"
                )));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(GeometryError::Degenerate(format!("triangle {t:?} repeats a vertex")));
            }
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::Degenerate("non-finite vertex".into()));
        }
        check_closed_orientable(&triangles)?;
        let mut shape = ParticleShape {
            vertices,
            triangles,
            centroid_offset: Vec3::zeros(),
        };
        let vol = shape.signed_volume();
        if vol.abs() < 1e-300 {
            return Err(GeometryError::Degenerate("zero enclosed volume".into()));
        }
        if vol < 0.0 {
            for t in &mut shape.triangles {
                t.swap(1, 2);
            }
        }
        Ok(shape)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Translation that was removed when the shape was recentred.
    pub fn centroid_offset(&self) -> Vec3 {
        self.centroid_offset
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Enclosed volume from the divergence theorem.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| self.vertices[a].dot(&self.vertices[b].cross(&self.vertices[c])) / 6.0)
            .sum()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .sum()
    }

    /// Volume centroid of the enclosed solid.
    pub fn volume_centroid(&self) -> Vec3 {
        let mut m = Vec3::zeros();
        let mut vol = 0.0;
        for &[a, b, c] in &self.triangles {
            let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
            let v = pa.dot(&pb.cross(&pc)) / 6.0;
            vol += v;
            m += v * (pa + pb + pc) / 4.0;
        }
        m / vol
    }

    /// Largest vertex distance from `center`.
    pub fn radius_about(&self, center: &Vec3) -> f64 {
        self.vertices.iter().map(|v| (v - center).norm()).fold(0.0, f64::max)
    }

    /// Largest vertex distance from the origin.
    pub fn bounding_radius(&self) -> f64 {
        self.radius_about(&Vec3::zeros())
    }

    /// Fails if some vertex lies outside `B(0, r0)`.
    pub fn check_containment(&self, r0: f64) -> Result<(), GeometryError> {
        let dist = self.bounding_radius();
        if dist > r0 * (1.0 + 1e-12) {
            return Err(GeometryError::Containment { dist, r0 });
        }
        Ok(())
    }

    /// Translate so that the volume centroid sits at the origin.
    pub fn recentered(mut self) -> Self {
        let c = self.volume_centroid();
        for v in &mut self.vertices {
            *v -= c;
        }
        self.centroid_offset += c;
        self
    }

    /// Apply `x -> center + scale * rotation * x` to every vertex.
    pub fn transformed(&self, scale: f64, rotation: &Mat3, center: &Vec3) -> Self {
        ParticleShape {
            vertices: self.vertices.iter().map(|v| center + scale * (rotation * v)).collect(),
            triangles: self.triangles.clone(),
            centroid_offset: *center,
        }
    }

    pub fn rotated(&self, rotation: &Mat3) -> Self {
        self.transformed(1.0, rotation, &Vec3::zeros())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.transformed(factor, &Mat3::identity(), &Vec3::zeros())
    }

    /// Distance from `p` to the closest point of the surface.
    pub fn distance_to_surface(&self, p: &Vec3) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                point_triangle_distance(p, &a, &b, &c)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Generalised winding number of the surface around `p` (1 inside, 0 outside).
    pub fn winding_number(&self, p: &Vec3) -> f64 {
        let mut total = 0.0;
        for &[ia, ib, ic] in &self.triangles {
            let a = self.vertices[ia] - p;
            let b = self.vertices[ib] - p;
            let c = self.vertices[ic] - p;
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * PI)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.winding_number(p) > 0.5
    }

    /// Precomputed radii that make repeated inside tests cheap.
    pub fn inside_tester(&self) -> InsideTester<'_> {
        let origin = self.volume_centroid();
        let inner = if self.contains(&origin) {
            self.distance_to_surface(&origin)
        } else {
            0.0
        };
        InsideTester {
            shape: self,
            origin,
            inner2: inner * inner,
            outer2: self.radius_about(&origin).powi(2),
        }
    }
}

/// Inside test with early accept/reject from an inscribed and a bounding ball.
pub struct InsideTester<'a> {
    shape: &'a ParticleShape,
    origin: Vec3,
    inner2: f64,
    outer2: f64,
}

impl InsideTester<'_> {
    pub fn contains(&self, p: &Vec3) -> bool {
        let r2 = (p - self.origin).norm_squared();
        if r2 > self.outer2 {
            return false;
        }
        if r2 < self.inner2 {
            return true;
        }
        self.shape.contains(p)
    }
}

fn check_closed_orientable(triangles: &[[usize; 3]]) -> Result<(), GeometryError> {
    // directed edge -> count; an orientable closed surface uses each directed
    // edge exactly once and each undirected edge exactly twice
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
        }
    }
    let mut keys: Vec<_> = directed.keys().copied().collect();
    keys.sort_unstable();
    for (a, b) in keys {
        let fwd = directed[&(a, b)];
        let back = directed.get(&(b, a)).copied().unwrap_or(0);
        if fwd + back != 2 {
            let (lo, hi) = (a.min(b), a.max(b));
            return Err(GeometryError::OpenSurface(lo, hi, fwd + back));
        }
        if fwd != 1 {
            return Err(GeometryError::NonOrientable(a, b));
        }
    }
    Ok(())
}

fn point_triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    // closest point on triangle (Ericson, Real-Time Collision Detection 5.1.5)
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + v * ab)).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + w * ac)).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + w * (c - b))).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + ab * v + ac * w)).norm()
}

/// Icosahedral sphere with `20 * 4^refinement` triangles, vertices on the sphere.
pub fn make_sphere_mesh(radius: f64, refinement: u32) -> Result<ParticleShape, GeometryError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(GeometryError::InvalidParameter(format!(
            "sphere radius must be positive, got {radius}"
        )));
    }
    let (unit, tris) = unit_icosphere(refinement);
    let vertices = unit.into_iter().map(|v| v * radius).collect();
    ParticleShape::new(vertices, tris)
}

/// Ellipsoid obtained by stretching the unit icosphere along the axes.
pub fn make_ellipsoid_mesh(semiaxes: [f64; 3], refinement: u32) -> Result<ParticleShape, GeometryError> {
    if semiaxes.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(GeometryError::InvalidParameter(format!(
            "degenerate semiaxis in {semiaxes:?}"
        )));
    }
    let (unit, tris) = unit_icosphere(refinement);
    let vertices = unit
        .into_iter()
        .map(|v| Vec3::new(v.x * semiaxes[0], v.y * semiaxes[1], v.z * semiaxes[2]))
        .collect();
    ParticleShape::new(vertices, tris)
}

fn unit_icosphere(refinement: u32) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let base = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ];
    let mut verts: Vec<Vec3> = base.iter().map(|&(x, y, z)| Vec3::new(x, y, z).normalize()).collect();
    let mut tris: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..refinement {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                verts.push((verts[a] + verts[b]).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(tris.len() * 4);
        for &[a, b, c] in &tris {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        tris = next;
    }
    (verts, tris)
}

/// Physical particle `center + (1/n) * rotation * shape`.
pub fn place_particle(
    shape: &ParticleShape,
    n: usize,
    center: &Vec3,
    rotation: &Mat3,
) -> Result<ParticleShape, GeometryError> {
    if n == 0 {
        return Err(GeometryError::InvalidParameter("particle count must be >= 1".into()));
    }
    if let Err(defect) = is_rotation(rotation, 1e-12) {
        return Err(GeometryError::NotRotation(defect));
    }
    Ok(shape.transformed(1.0 / n as f64, rotation, center))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rigid::rotation_about_axis;

    #[test]
    fn sphere_refinement_three_has_1280_unit_vertices() {
        let s = make_sphere_mesh(1.0, 3).unwrap();
        assert_eq!(s.triangles().len(), 1280);
        for v in s.vertices() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn icosahedron_scaled_to_circumradius() {
        let s = make_sphere_mesh(0.5, 0).unwrap();
        assert_eq!(s.triangles().len(), 20);
        assert_eq!(s.vertices().len(), 12);
        for v in s.vertices() {
            assert!((v.norm() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_volume_close_to_analytic() {
        // quadrature oracle: signed volume of the polyhedron vs 4pi/3
        let s = make_sphere_mesh(1.0, 4).unwrap();
        let rel = (s.signed_volume() - 4.0 * PI / 3.0).abs() / (4.0 * PI / 3.0);
        assert!(rel < 0.01, "rel {rel}");
    }

    #[test]
    fn unit_ellipsoid_is_the_sphere() {
        let e = make_ellipsoid_mesh([1.0, 1.0, 1.0], 3).unwrap();
        let s = make_sphere_mesh(1.0, 3).unwrap();
        assert_eq!(e, s);
    }

    #[test]
    fn ellipsoid_volume_and_equation() {
        let e = make_ellipsoid_mesh([2.0, 1.0, 1.0], 3).unwrap();
        let exact = 8.0 * PI / 3.0;
        assert!((e.signed_volume() - exact).abs() / exact < 0.02);
        for v in e.vertices() {
            let q = (v.x / 2.0).powi(2) + v.y.powi(2) + v.z.powi(2);
            assert!((q - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_ellipsoid_rejected() {
        assert!(matches!(
            make_ellipsoid_mesh([1.0, 1.0, 0.0], 2),
            Err(GeometryError::InvalidParameter(_))
        ));
    }

    #[test]
    fn placement_scales_and_translates() {
        let s = make_sphere_mesh(1.0, 2).unwrap();
        let same = place_particle(&s, 1, &Vec3::zeros(), &Mat3::identity()).unwrap();
        assert_eq!(same.vertices(), s.vertices());
        let c = Vec3::new(0.5, 0.5, 0.5);
        let small = place_particle(&s, 10, &c, &Mat3::identity()).unwrap();
        for v in small.vertices() {
            assert!(((v - c).norm() - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn placement_stays_within_scaled_containment_ball() {
        let e = make_ellipsoid_mesh([1.0, 0.5, 0.25], 2).unwrap();
        let q = rotation_about_axis(&Vec3::new(1.0, 2.0, 3.0), 0.7);
        let h = Vec3::new(0.3, 0.2, 0.1);
        let p = place_particle(&e, 4, &h, &q).unwrap();
        for v in p.vertices() {
            assert!((v - h).norm() <= DEFAULT_R0 / 4.0 + 1e-12);
        }
    }

    #[test]
    fn placement_rejects_reflection() {
        let s = make_sphere_mesh(1.0, 0).unwrap();
        let mut m = Mat3::identity();
        m[(0, 0)] = -1.0;
        assert!(matches!(
            place_particle(&s, 1, &Vec3::zeros(), &m),
            Err(GeometryError::NotRotation(_))
        ));
    }

    #[test]
    fn inverted_surface_is_flipped() {
        let s = make_sphere_mesh(1.0, 1).unwrap();
        let flipped: Vec<[usize; 3]> = s.triangles().iter().map(|t| [t[0], t[2], t[1]]).collect();
        let f = ParticleShape::new(s.vertices().to_vec(), flipped).unwrap();
        assert!(f.signed_volume() > 0.0);
    }

    #[test]
    fn inside_tests_agree_with_analytic_ball() {
        let s = make_sphere_mesh(1.0, 3).unwrap();
        let tester = s.inside_tester();
        for &(p, inside) in &[
            (Vec3::new(0.0, 0.0, 0.0), true),
            (Vec3::new(0.9, 0.1, 0.0), true),
            (Vec3::new(0.0, 0.0, 1.1), false),
            (Vec3::new(3.0, 0.0, 0.0), false),
        ] {
            assert_eq!(tester.contains(&p), inside, "{p:?}");
            assert_eq!(s.contains(&p), inside, "{p:?}");
        }
        let d = s.distance_to_surface(&Vec3::zeros());
        assert!(d > 0.98 && d <= 1.0);
    }
}
