//! `AC1` snapshot files.
//!
//! One ASCII header line `AC1 <axis-spec>`, where the axis spec is a
//! `;`-separated list of `name,n,dx,periodic-flag`, then the samples as
//! little-endian `f64` in row-major order. Evolution axes are never written.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{Axis, AxisKind, Grid};

const MAGIC: &str = "AC1";

pub fn write_field<W: Write>(mut w: W, f: &Field) -> Result<()> {
    writeln!(w, "{MAGIC} {}", f.grid().axis_spec())?;
    let mut bytes = Vec::with_capacity(8 * f.len());
    for v in f.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_field<R: Read>(r: R) -> Result<Field> {
    let mut r = BufReader::new(r);
    let mut header = String::new();
    r.read_line(&mut header)?;
    let header = header.strip_suffix('\n').ok_or_else(|| Error::Format("unterminated header".into()))?;
    let spec = header
        .strip_prefix(MAGIC)
        .and_then(|s| s.strip_prefix(' '))
        .ok_or_else(|| Error::Format(format!("bad magic in header `{header}`")))?;
    let grid = parse_axis_spec(spec)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::Format(format!(
            "payload has {} bytes, grid needs {}",
            bytes.len(),
            8 * grid.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Field::new(grid, values)
}

pub fn parse_axis_spec(spec: &str) -> Result<Arc<Grid>> {
    let mut axes = Vec::new();
    for entry in spec.split(';') {
        let parts: Vec<&str> = entry.split(',').collect();
        let [name, n, dx, flag] = parts[..] else {
            return Err(Error::Format(format!("axis entry `{entry}` needs name,n,dx,flag")));
        };
        let n: usize = n.parse().map_err(|_| Error::Format(format!("bad size `{n}`")))?;
        let spacing: f64 = dx.parse().map_err(|_| Error::Format(format!("bad spacing `{dx}`")))?;
        let kind = match flag {
            "1" => AxisKind::Periodic,
            "0" => AxisKind::Bounded,
            _ => return Err(Error::Format(format!("bad periodic flag `{flag}`"))),
        };
        axes.push(Axis { name: name.to_string(), n, spacing, kind });
    }
    Grid::new(axes)
}

pub fn save(path: impl AsRef<Path>, f: &Field) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Field> {
    read_field(File::open(path)?)
}
