//! ASCII snapshot files.
//!
//! ```text
//! helimag snapshot v1
//! DIMENSIONS nx ny nz
//! EXTENTS ex ey ez
//! SPACING hx hy hz
//! POINT_DATA n
//! x y z          (one line per cell, x fastest)
//! ```
//!
//! Numbers are written in the shortest form that parses back to the same
//! `f64`, so a write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, MagnetizationField, VectorField};
use crate::vec3::Vec3;

pub const SNAPSHOT_HEADER: &str = "helimag snapshot v1";

pub fn format_snapshot(m: &VectorField<f64>) -> String {
    let g = m.grid();
    let [nx, ny, nz] = g.cells();
    let [ex, ey, ez] = g.extents();
    let [hx, hy, hz] = g.spacing();
    let mut s = String::with_capacity(64 + 40 * m.len());
    let _ = writeln!(s, "{SNAPSHOT_HEADER}");
    let _ = writeln!(s, "DIMENSIONS {nx} {ny} {nz}");
    let _ = writeln!(s, "EXTENTS {ex} {ey} {ez}");
    let _ = writeln!(s, "SPACING {hx} {hy} {hz}");
    let _ = writeln!(s, "POINT_DATA {}", m.len());
    for v in m.values() {
        let _ = writeln!(s, "{} {} {}", v.x(), v.y(), v.z());
    }
    s
}

pub fn write_snapshot(m: &MagnetizationField<f64>, path: &Path) -> Result<()> {
    fs::write(path, format_snapshot(m.field()))?;
    Ok(())
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn keyed<'a>(lines: &[&'a str], idx: usize, key: &str) -> Result<Vec<&'a str>> {
    let line = lines.get(idx).ok_or_else(|| bad(idx + 1, format!("missing {key} line")))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(bad(idx + 1, format!("expected {key}")));
    }
    Ok(parts.collect())
}

fn triple<T: std::str::FromStr>(parts: &[&str], line: usize) -> Result<[T; 3]> {
    if parts.len() != 3 {
        return Err(bad(line, "expected three values"));
    }
    let p = |s: &str| s.parse::<T>().map_err(|_| bad(line, format!("bad number '{s}'")));
    Ok([p(parts[0])?, p(parts[1])?, p(parts[2])?])
}

/// Parses snapshot text into a grid and raw cell values.
pub fn parse_snapshot(text: &str) -> Result<VectorField<f64>> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.first().map(|l| l.trim()) != Some(SNAPSHOT_HEADER) {
        return Err(bad(1, format!("malformed header (expected '{SNAPSHOT_HEADER}')")));
    }
    let cells: [usize; 3] = triple(&keyed(&lines, 1, "DIMENSIONS")?, 2)?;
    let extents: [f64; 3] = triple(&keyed(&lines, 2, "EXTENTS")?, 3)?;
    let _spacing: [f64; 3] = triple(&keyed(&lines, 3, "SPACING")?, 4)?;
    let count = keyed(&lines, 4, "POINT_DATA")?;
    let count: usize = match count.as_slice() {
        [c] => c.parse().map_err(|_| bad(5, "bad point count"))?,
        _ => return Err(bad(5, "expected one point count")),
    };
    let grid = Grid::new(extents, cells)?;
    if count != grid.len() {
        return Err(Error::Format(format!(
            "dimension mismatch: POINT_DATA {count} but grid has {} cells",
            grid.len()
        )));
    }
    let data: Vec<&str> = lines[5..].iter().copied().filter(|l| !l.trim().is_empty()).collect();
    if data.len() != count {
        return Err(Error::Format(format!(
            "dimension mismatch: expected {count} data lines, found {}",
            data.len()
        )));
    }
    let values = data
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let parts: Vec<&str> = l.split_whitespace().collect();
            triple::<f64>(&parts, k + 6).map(Vec3)
        })
        .collect::<Result<Vec<_>>>()?;
    VectorField::from_values(grid, values)
}

pub fn read_snapshot(path: &Path) -> Result<MagnetizationField<f64>> {
    let text = fs::read_to_string(path)?;
    let field = parse_snapshot(&text).map_err(|e| match e {
        Error::Parse { line, msg } => Error::Format(format!("{}:{line}: {msg}", path.display())),
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    MagnetizationField::new(field)
}
