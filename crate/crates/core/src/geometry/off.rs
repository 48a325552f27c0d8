//! ASCII OFF triangle meshes.

use std::fmt::Write as _;
use std::path::Path;

use super::mesh::{ParticleShape, DEFAULT_R0};
use super::GeometryError;
use crate::Vec3;

/// Parse an OFF document into vertices and triangles (no validation).
pub fn parse_off(text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>), GeometryError> {
    // data lines with comments and blanks removed, keeping 1-based line numbers
    let mut lines = text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    });
    let perr = |line: usize, msg: &str| GeometryError::Parse {
        line,
        msg: msg.to_string(),
    };

    let (line, header) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
    // "OFF" may share its line with the counts
    let rest = header
        .strip_prefix("OFF")
        .ok_or_else(|| perr(line, "missing OFF header"))?
        .trim();
    let (count_line, counts) = if rest.is_empty() {
        lines.next().ok_or_else(|| perr(line, "missing counts line"))?
    } else {
        (line, rest)
    };
    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| perr(count_line, "counts must be non-negative integers"))?;
    if counts.len() < 2 {
        return Err(perr(count_line, "expected vertex and face counts"));
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, l) = lines
            .next()
            .ok_or_else(|| perr(count_line, "unexpected end of file in vertex list"))?;
        let xyz: Vec<f64> = l
            .split_whitespace()
            .take(3)
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| perr(line, "invalid vertex coordinate"))?;
        if xyz.len() != 3 {
            return Err(perr(line, "vertex needs three coordinates"));
        }
        vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, l) = lines
            .next()
            .ok_or_else(|| perr(count_line, "unexpected end of file in face list"))?;
        let idx: Vec<usize> = l
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| perr(line, "invalid face index"))?;
        if idx.first() != Some(&3) || idx.len() < 4 {
            return Err(perr(line, "only triangular faces \"3 i j k\" are supported"));
        }
        let t = [idx[1], idx[2], idx[3]];
        if t.iter().any(|&i| i >= nv) {
            return Err(perr(line, "face index out of range"));
        }
        triangles.push(t);
    }
    Ok((vertices, triangles))
}

/// Load, validate and recentre an OFF mesh; fails unless it fits in `B(0, R0)`
/// with the default `R0`.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<ParticleShape, GeometryError> {
    load_mesh_with_radius(path, DEFAULT_R0)
}

/// As [`load_mesh`] with an explicit containment radius.
pub fn load_mesh_with_radius(path: impl AsRef<Path>, r0: f64) -> Result<ParticleShape, GeometryError> {
    let text = std::fs::read_to_string(path)?;
    let (v, t) = parse_off(&text)?;
    let shape = ParticleShape::new(v, t)?.recentered();
    shape.check_containment(r0)?;
    Ok(shape)
}

/// Serialise a shape as ASCII OFF.
pub fn write_off(shape: &ParticleShape, path: impl AsRef<Path>) -> Result<(), GeometryError> {
    let mut s = String::new();
    let _ = writeln!(s, "OFF");
    let _ = writeln!(s, "{} {} 0", shape.vertices().len(), shape.triangles().len());
    for v in shape.vertices() {
        let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
    }
    for t in shape.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const CUBE: &str = "OFF
# unit cube
8 12 0
-0.5 -0.5 -0.5
0.5 -0.5 -0.5
0.5 0.5 -0.5
-0.5 0.5 -0.5
-0.5 -0.5 0.5
0.5 -0.5 0.5
0.5 0.5 0.5
-0.5 0.5 0.5
3 0 2 1
3 0 3 2
3 4 5 6
3 4 6 7
3 0 1 5
3 0 5 4
3 1 2 6
3 1 6 5
3 2 3 7
3 2 7 6
3 3 0 4
3 3 4 7
";

    fn write_tmp(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn cube_loads_with_twelve_triangles() {
        let f = write_tmp(CUBE);
        let s = load_mesh(f.path()).unwrap();
        assert_eq!(s.triangles().len(), 12);
        assert!((s.signed_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn open_surface_rejected() {
        let open: String = CUBE.replace("8 12 0", "8 11 0").replace("3 3 4 7\n", "");
        let f = write_tmp(&open);
        assert!(matches!(load_mesh(f.path()), Err(GeometryError::OpenSurface(..))));
    }

    #[test]
    fn far_vertex_fails_containment() {
        // cube stretched so a corner sits at distance 2 R0 from the centroid
        let s = 2.0 / 3f64.sqrt();
        let big = CUBE.replace("0.5", &format!("{s}"));
        let f = write_tmp(&big);
        assert!(matches!(load_mesh(f.path()), Err(GeometryError::Containment { .. })));
    }

    #[test]
    fn shifted_mesh_is_recentered() {
        let shifted: String = CUBE
            .lines()
            .map(|l| {
                let p: Vec<&str> = l.split_whitespace().collect();
                if p.len() == 3 && p[0].contains('.') {
                    let x: f64 = p[0].parse().unwrap();
                    format!("{} {} {}\n", x + 0.25, p[1], p[2])
                } else {
                    format!("{l}\n")
                }
            })
            .collect();
        let f = write_tmp(&shifted);
        let s = load_mesh(f.path()).unwrap();
        assert!((s.centroid_offset().x - 0.25).abs() < 1e-12);
        assert!(s.volume_centroid().norm() < 1e-12);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 x 0\n3 0 1 2\n";
        match parse_off(bad) {
            Err(GeometryError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_off("PLY\n").is_err());
        assert!(parse_off("OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n4 0 1 2 3\n").is_err());
    }

    #[test]
    fn write_then_load_roundtrip() {
        let s = crate::geometry::make_sphere_mesh(0.8, 2).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_off(&s, f.path()).unwrap();
        let back = load_mesh(f.path()).unwrap();
        assert_eq!(back.triangles(), s.triangles());
        for (a, b) in back.vertices().iter().zip(s.vertices()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
