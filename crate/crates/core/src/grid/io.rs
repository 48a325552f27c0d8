//! VTK legacy and raw binary field dumps.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::field::GridField;
use super::{Grid, GridError};

/// Write cell velocity magnitude and pressure as ASCII STRUCTURED_POINTS.
pub fn write_vtk(field: &GridField, path: impl AsRef<Path>) -> Result<(), GridError> {
    let g = &field.grid;
    let origin = g.cell_center(0, 0, 0);
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "velocity magnitude and pressure");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {} {} {}", g.n[0], g.n[1], g.n[2]);
    let _ = writeln!(s, "ORIGIN {} {} {}", origin.x, origin.y, origin.z);
    let _ = writeln!(s, "SPACING {} {} {}", g.h, g.h, g.h);
    let _ = writeln!(s, "POINT_DATA {}", g.cells());
    for (name, data) in [("velocity_magnitude", field.speed()), ("pressure", field.p.clone())] {
        let _ = writeln!(s, "SCALARS {name} double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for v in data {
            let _ = writeln!(s, "{v:e}");
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// One-line header of a raw dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawHeader {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub origin: [f64; 3],
    pub components: usize,
    pub name: String,
}

impl RawHeader {
    pub fn for_cells(grid: &Grid, components: usize, name: &str) -> Self {
        let o = grid.cell_center(0, 0, 0);
        RawHeader {
            dims: grid.n,
            spacing: grid.h,
            origin: [o.x, o.y, o.z],
            components,
            name: name.to_string(),
        }
    }

    fn line(&self) -> String {
        format!(
            "dims {} {} {} spacing {} origin {} {} {} components {} name {} f64le\n",
            self.dims[0],
            self.dims[1],
            self.dims[2],
            self.spacing,
            self.origin[0],
            self.origin[1],
            self.origin[2],
            self.components,
            self.name
        )
    }

    fn parse(line: &str) -> Result<Self, GridError> {
        let bad = || GridError::InvalidInput(format!("malformed raw header: {}", line.trim()));
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 15
            || t[0] != "dims"
            || t[4] != "spacing"
            || t[6] != "origin"
            || t[10] != "components"
            || t[12] != "name"
        {
            return Err(bad());
        }
        let us = |s: &str| s.parse::<usize>().map_err(|_| bad());
        let fs = |s: &str| s.parse::<f64>().map_err(|_| bad());
        Ok(RawHeader {
            dims: [us(t[1])?, us(t[2])?, us(t[3])?],
            spacing: fs(t[5])?,
            origin: [fs(t[7])?, fs(t[8])?, fs(t[9])?],
            components: us(t[11])?,
            name: t[13].to_string(),
        })
    }
}

/// Text header line followed by little-endian `f64` values.
pub fn write_raw(path: impl AsRef<Path>, header: &RawHeader, data: &[f64]) -> Result<(), GridError> {
    let expect = header.dims.iter().product::<usize>() * header.components;
    if data.len() != expect {
        return Err(GridError::InvalidInput(format!(
            "{} values for a header expecting {expect}",
            data.len()
        )));
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(header.line().as_bytes())?;
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<(RawHeader, Vec<f64>), GridError> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header = RawHeader::parse(&line)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let expect = header.dims.iter().product::<usize>() * header.components;
    if bytes.len() != 8 * expect {
        return Err(GridError::InvalidInput(format!(
            "raw payload has {} bytes, expected {}",
            bytes.len(),
            8 * expect
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, data))
}
