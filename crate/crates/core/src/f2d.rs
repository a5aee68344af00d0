//! The "F2D" on-disk field format.
//!
//! One UTF-8 JSON header line terminated by `\n`, then `nx*ny` little-endian
//! IEEE-754 doubles in row-major order. A vector field is two consecutive
//! records in one file. The header has no topology flag: a record reads back
//! as a window grid iff its origin is nonzero, else as a torus.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::field::{ScalarField2D, VectorField2D};
use crate::grid::GridSpec;
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Header {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    ox: f64,
    oy: f64,
    dtype: String,
    layout: String,
}

impl Header {
    fn of(grid: &GridSpec) -> Self {
        Header {
            nx: grid.nx,
            ny: grid.ny,
            lx: grid.lx,
            ly: grid.ly,
            ox: grid.origin[0],
            oy: grid.origin[1],
            dtype: "f64".into(),
            layout: "row-major".into(),
        }
    }

    fn into_grid(self) -> Result<GridSpec> {
        if self.dtype != "f64" || self.layout != "row-major" {
            return Err(Error::BadHeader {
                reason: format!("unsupported dtype/layout {}/{}", self.dtype, self.layout),
            });
        }
        if self.ox == 0.0 && self.oy == 0.0 {
            GridSpec::torus(self.nx, self.ny, self.lx, self.ly)
        } else {
            GridSpec::window(self.nx, self.ny, self.lx, self.ly, [self.ox, self.oy])
        }
    }
}

pub fn write_scalar<W: Write>(w: &mut W, field: &ScalarField2D) -> Result<()> {
    let header = serde_json::to_string(&Header::of(&field.grid))
        .map_err(|e| Error::BadHeader { reason: e.to_string() })?;
    w.write_all(header.as_bytes())?;
    w.write_all(b"\n")?;
    for &v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_scalar<R: Read>(r: &mut R) -> Result<ScalarField2D> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)?;
        if byte[0] == b'\n' {
            break;
        }
        line.push(byte[0]);
        if line.len() > 4096 {
            return Err(Error::BadHeader { reason: "header line exceeds 4096 bytes".into() });
        }
    }
    let text = std::str::from_utf8(&line)
        .map_err(|_| Error::BadHeader { reason: "header is not UTF-8".into() })?;
    let header: Header =
        serde_json::from_str(text).map_err(|e| Error::BadHeader { reason: e.to_string() })?;
    let grid = header.into_grid()?;
    let mut bytes = vec![0u8; grid.len() * 8];
    r.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ScalarField2D::from_values(grid, values)
}

pub fn write_vector<W: Write>(w: &mut W, field: &VectorField2D) -> Result<()> {
    write_scalar(w, &field.component(0))?;
    write_scalar(w, &field.component(1))
}

pub fn read_vector<R: Read>(r: &mut R) -> Result<VectorField2D> {
    let a = read_scalar(r)?;
    let b = read_scalar(r)?;
    if a.grid != b.grid {
        return Err(Error::BadHeader { reason: "vector record components disagree on grid".into() });
    }
    VectorField2D::from_components(a.grid, a.values().to_vec(), b.values().to_vec())
}

pub fn save_scalar(path: impl AsRef<Path>, field: &ScalarField2D) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_scalar(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_scalar(path: impl AsRef<Path>) -> Result<ScalarField2D> {
    read_scalar(&mut BufReader::new(File::open(path)?))
}

pub fn save_vector(path: impl AsRef<Path>, field: &VectorField2D) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_vector(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_vector(path: impl AsRef<Path>) -> Result<VectorField2D> {
    read_vector(&mut BufReader::new(File::open(path)?))
}
