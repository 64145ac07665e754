//! Cell-averaged stray-field kernel (Newell formulas) and direct convolution.
//!
//! The kernel is stored as `K = -N` where `N` is the usual positive demag
//! tensor, so that `h_s[c] = Σ_c' K(c - c') m[c']`. The entries are always
//! computed in `f64` and converted to the working precision afterwards.

use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, VectorField};
use crate::scalar::Real;
use crate::vec3::Vec3;

const MAGIC: &[u8; 4] = b"HMDT";
const CACHE_VERSION: u32 = 1;

/// Offset-indexed symmetric 3×3 kernel, components ordered
/// `xx, yy, zz, xy, xz, yz`.
#[derive(Clone, Debug, PartialEq)]
pub struct DemagTensor<T> {
    grid: Grid<T>,
    entries: Vec<[T; 6]>,
}

impl<T: Real> DemagTensor<T> {
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    fn dims(&self) -> [usize; 3] {
        let n = self.grid.cells();
        [2 * n[0] - 1, 2 * n[1] - 1, 2 * n[2] - 1]
    }

    fn slot(&self, off: [isize; 3]) -> usize {
        let n = self.grid.cells();
        let d = self.dims();
        let ix = (off[0] + n[0] as isize - 1) as usize;
        let iy = (off[1] + n[1] as isize - 1) as usize;
        let iz = (off[2] + n[2] as isize - 1) as usize;
        ix + d[0] * (iy + d[1] * iz)
    }

    /// Kernel block for the cell offset `target - source`.
    pub fn kernel(&self, off: [isize; 3]) -> [[T; 3]; 3] {
        let e = self.entries[self.slot(off)];
        [[e[0], e[3], e[4]], [e[3], e[1], e[5]], [e[4], e[5], e[2]]]
    }

    /// Raw component array for the cell offset.
    pub fn components(&self, off: [isize; 3]) -> [T; 6] {
        self.entries[self.slot(off)]
    }
}

/// Newell's `f`, the fourfold antiderivative behind the diagonal entries.
fn newell_f(x: f64, y: f64, z: f64) -> f64 {
    let (x, y, z) = (x.abs(), y.abs(), z.abs());
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    if r == 0.0 {
        return 0.0;
    }
    let mut piece = (2.0 * x2 - y2 - z2) * r / 6.0;
    if y > 0.0 && x2 + z2 > 0.0 {
        piece += 0.5 * y * (z2 - x2) * (y / (x2 + z2).sqrt()).asinh();
    }
    if z > 0.0 && x2 + y2 > 0.0 {
        piece += 0.5 * z * (y2 - x2) * (z / (x2 + y2).sqrt()).asinh();
    }
    if x > 0.0 && y > 0.0 && z > 0.0 {
        piece -= x * y * z * (y * z / (x * r)).atan();
    }
    piece
}

/// Newell's `g`, odd in `x` and `y`, for the off-diagonal entries.
fn newell_g(x: f64, y: f64, z: f64) -> f64 {
    let sign = if (x < 0.0) != (y < 0.0) { -1.0 } else { 1.0 };
    let (x, y, z) = (x.abs(), y.abs(), z.abs());
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    if r == 0.0 {
        return 0.0;
    }
    let mut piece = -x * y * r / 3.0;
    if z > 0.0 {
        piece -= z * z2 / 6.0 * (x * y / (z * r)).atan();
        if y > 0.0 {
            piece -= 0.5 * z * y2 * (x * z / (y * r)).atan();
        }
        if x > 0.0 {
            piece -= 0.5 * z * x2 * (y * z / (x * r)).atan();
        }
    }
    if x2 + y2 > 0.0 {
        piece += x * y * z * (z / (x2 + y2).sqrt()).asinh();
    }
    if y2 + z2 > 0.0 {
        piece += y / 6.0 * (3.0 * z2 - y2) * (x / (y2 + z2).sqrt()).asinh();
    }
    if x2 + z2 > 0.0 {
        piece += x / 6.0 * (3.0 * z2 - x2) * (y / (x2 + z2).sqrt()).asinh();
    }
    sign * piece
}

const W: [f64; 3] = [-1.0, 2.0, -1.0];

fn second_difference(
    func: fn(f64, f64, f64) -> f64,
    off: [f64; 3],
    h: [f64; 3],
) -> f64 {
    let mut acc = 0.0;
    for (a, wa) in W.iter().enumerate() {
        for (b, wb) in W.iter().enumerate() {
            for (c, wc) in W.iter().enumerate() {
                let x = off[0] + (a as f64 - 1.0) * h[0];
                let y = off[1] + (b as f64 - 1.0) * h[1];
                let z = off[2] + (c as f64 - 1.0) * h[2];
                acc += wa * wb * wc * func(x, y, z);
            }
        }
    }
    acc / (4.0 * PI * h[0] * h[1] * h[2])
}

/// Positive demag factor `N_xx` between two cells separated by `off`.
pub fn newell_nxx(off: [f64; 3], h: [f64; 3]) -> f64 {
    second_difference(newell_f, off, h)
}

/// Positive demag factor `N_xy` between two cells separated by `off`.
pub fn newell_nxy(off: [f64; 3], h: [f64; 3]) -> f64 {
    if off[0] == 0.0 || off[1] == 0.0 {
        return 0.0;
    }
    let s = off[0].signum() * off[1].signum();
    s * second_difference(newell_g, [off[0].abs(), off[1].abs(), off[2].abs()], h)
}

/// Full positive tensor `[xx, yy, zz, xy, xz, yz]` for one offset.
pub fn newell_tensor(off: [f64; 3], h: [f64; 3]) -> [f64; 6] {
    let [x, y, z] = [off[0].abs(), off[1].abs(), off[2].abs()];
    let [dx, dy, dz] = h;
    let xx = newell_nxx([x, y, z], [dx, dy, dz]);
    let yy = newell_nxx([y, x, z], [dy, dx, dz]);
    let zz = newell_nxx([z, y, x], [dz, dy, dx]);
    let xy = newell_nxy([off[0], off[1], z], [dx, dy, dz]);
    let xz = newell_nxy([off[0], off[2], y], [dx, dz, dy]);
    let yz = newell_nxy([off[1], off[2], x], [dy, dz, dx]);
    [xx, yy, zz, xy, xz, yz]
}

/// Builds the kernel for every offset realisable on `grid`.
pub fn build_demag_tensor<T: Real>(grid: &Grid<T>) -> DemagTensor<T> {
    let n = grid.cells();
    let h = grid.spacing().map(|s| s.to_f64_lossy());
    let dims = [2 * n[0] - 1, 2 * n[1] - 1, 2 * n[2] - 1];
    let total = dims[0] * dims[1] * dims[2];
    let entries = (0..total)
        .into_par_iter()
        .map(|s| {
            let ix = s % dims[0];
            let iy = (s / dims[0]) % dims[1];
            let iz = s / (dims[0] * dims[1]);
            let off = [
                (ix as isize - (n[0] as isize - 1)) as f64 * h[0],
                (iy as isize - (n[1] as isize - 1)) as f64 * h[1],
                (iz as isize - (n[2] as isize - 1)) as f64 * h[2],
            ];
            newell_tensor(off, h).map(|v| T::lit(-v))
        })
        .collect();
    DemagTensor {
        grid: *grid,
        entries,
    }
}

/// Direct `O(N²)` convolution `h_s = K * m`.
pub fn stray_field<T: Real>(m: &VectorField<T>, tensor: &DemagTensor<T>) -> Result<VectorField<T>> {
    if m.grid() != tensor.grid() {
        return Err(Error::TensorMismatch);
    }
    let grid = *m.grid();
    let vals = m.values();
    let n = grid.cells();
    let d = tensor.dims();
    let entries = &tensor.entries;
    let out: Vec<Vec3<T>> = (0..grid.len())
        .into_par_iter()
        .map(|c| {
            let t = grid.coords(c);
            let mut acc = Vec3::zero();
            let mut s = 0;
            for sk in 0..n[2] {
                for sj in 0..n[1] {
                    // Slot of offset (t - (0, sj, sk)); moving the source
                    // one cell along x lowers the offset by one.
                    let base = (t[0] + n[0] - 1) + d[0] * ((t[1] + n[1] - 1 - sj) + d[1] * (t[2] + n[2] - 1 - sk));
                    for si in 0..n[0] {
                        let e = entries[base - si];
                        let v = vals[s];
                        s += 1;
                        acc += Vec3::new(
                            e[0] * v.x() + e[3] * v.y() + e[4] * v.z(),
                            e[3] * v.x() + e[1] * v.y() + e[5] * v.z(),
                            e[4] * v.x() + e[5] * v.y() + e[2] * v.z(),
                        );
                    }
                }
            }
            acc
        })
        .collect();
    VectorField::from_values(grid, out)
}

/// Writes the kernel as `HMDT`, version, grid signature, then
/// little-endian `f64` entries.
pub fn write_demag_cache<T: Real>(tensor: &DemagTensor<T>, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(48 + tensor.entries.len() * 48);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    for e in tensor.grid.extents() {
        buf.extend_from_slice(&e.to_f64_lossy().to_le_bytes());
    }
    for n in tensor.grid.cells() {
        buf.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for entry in &tensor.entries {
        for v in entry {
            buf.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

/// Reads a cached kernel. Returns `Ok(None)` when the signature belongs to a
/// different grid.
pub fn read_demag_cache<T: Real>(path: &Path, grid: &Grid<T>) -> Result<Option<DemagTensor<T>>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let bad = |m: &str| Error::Format(format!("demag cache {}: {m}", path.display()));
    if buf.len() < 40 || &buf[..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    if u32_at(4) != CACHE_VERSION {
        return Err(bad("unsupported version"));
    }
    let extents = [f64_at(8), f64_at(16), f64_at(24)];
    let cells = [u32_at(32) as usize, u32_at(36) as usize, u32_at(40) as usize];
    let want_ext = grid.extents().map(|e| e.to_f64_lossy());
    if extents != want_ext || cells != grid.cells() {
        return Ok(None);
    }
    let dims = [2 * cells[0] - 1, 2 * cells[1] - 1, 2 * cells[2] - 1];
    let count = dims[0] * dims[1] * dims[2];
    let body = &buf[44..];
    if body.len() != count * 48 {
        return Err(bad("truncated kernel data"));
    }
    let entries = body
        .chunks_exact(48)
        .map(|ch| {
            let mut e = [T::zero(); 6];
            for (k, slot) in e.iter_mut().enumerate() {
                *slot = T::lit(f64::from_le_bytes(ch[8 * k..8 * k + 8].try_into().unwrap()));
            }
            e
        })
        .collect();
    Ok(Some(DemagTensor {
        grid: *grid,
        entries,
    }))
}
