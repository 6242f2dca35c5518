//! Binary snapshot of a vector field.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! magic  b"NLCF"
//! u32    format version (1)
//! u32    spatial dims (2 or 3)
//! u32    boundary mode (0 periodic, 1 dirichlet)
//! u64    points per axis   (dims entries)
//! f64    extent per axis   (dims entries)
//! u32    components per node (3)
//! f64    node data, row-major with the last axis fastest, 3 per node
//! ```
//!
//! Data is always stored as `f64`, independent of the in-memory scalar.

use std::io::{Read, Write};

use super::{BoundaryMode, Field, FieldError, Grid, VectorField};
use crate::scalar::Real;
use crate::tensor::Vec3;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"NLCF";
const VERSION: u32 = 1;

fn io(e: std::io::Error) -> FieldError {
    FieldError::Io(e.to_string())
}

pub fn write_snapshot<T: Real, W: Write>(mut w: W, f: &VectorField<T>) -> Result<(), FieldError> {
    let g = f.grid();
    let mut buf = Vec::with_capacity(64 + 24 * g.len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(g.dims() as u32).to_le_bytes());
    let mode: u32 = match g.mode() {
        BoundaryMode::Periodic => 0,
        BoundaryMode::Dirichlet => 1,
    };
    buf.extend_from_slice(&mode.to_le_bytes());
    for &n in g.points() {
        buf.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for &l in g.extents() {
        buf.extend_from_slice(&l.to_f64_lossy().to_le_bytes());
    }
    buf.extend_from_slice(&3u32.to_le_bytes());
    for v in f.data() {
        for c in v.0 {
            buf.extend_from_slice(&c.to_f64_lossy().to_le_bytes());
        }
    }
    w.write_all(&buf).map_err(io)
}

struct Cursor<R> {
    r: R,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], FieldError> {
        let mut b = [0u8; N];
        self.r.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => FieldError::Format("truncated snapshot".into()),
            _ => io(e),
        })?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32, FieldError> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64, FieldError> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64, FieldError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

/// Reads a snapshot onto a freshly built grid. Compare grids with `==` (or
/// [`super::check_same_grid`]) before mixing the result with other fields.
pub fn read_snapshot<T: Real, R: Read>(r: R) -> Result<VectorField<T>, FieldError> {
    let mut c = Cursor { r };
    if &c.bytes::<4>()? != SNAPSHOT_MAGIC {
        return Err(FieldError::Format("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(FieldError::Format(format!("unsupported version {version}")));
    }
    let dims = c.u32()? as usize;
    if !(dims == 2 || dims == 3) {
        return Err(FieldError::Format(format!("bad dimension {dims}")));
    }
    let mode = match c.u32()? {
        0 => BoundaryMode::Periodic,
        1 => BoundaryMode::Dirichlet,
        m => return Err(FieldError::Format(format!("bad boundary mode {m}"))),
    };
    let mut points = Vec::with_capacity(dims);
    for _ in 0..dims {
        let n = c.u64()?;
        if n > (1 << 24) {
            return Err(FieldError::Format(format!("implausible axis length {n}")));
        }
        points.push(n as usize);
    }
    let mut extents = Vec::with_capacity(dims);
    for _ in 0..dims {
        extents.push(T::lit(c.f64()?));
    }
    let comps = c.u32()?;
    if comps != 3 {
        return Err(FieldError::Format(format!("expected 3 components, found {comps}")));
    }
    let grid = Grid::new(&points, &extents, mode).map_err(|e| FieldError::Format(e.to_string()))?;
    let mut data = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        data.push(Vec3([T::lit(c.f64()?), T::lit(c.f64()?), T::lit(c.f64()?)]));
    }
    Field::new(grid, data)
}

#[cfg(test)]
mod tests {
    use super::super::random_smooth_field;
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let g = Grid::<f64>::dirichlet(&[5, 6, 4], &[1.0, 2.0, 0.5]).unwrap();
        let f = random_smooth_field(&g, 2, 1.0, 1);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &f).unwrap();
        assert_eq!(&buf[..4], SNAPSHOT_MAGIC);
        let back: VectorField<f64> = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_snapshot::<f64, _>(&b"XXXX"[..]).is_err());
        let g = Grid::<f64>::periodic(&[4, 4], &[1.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &VectorField::zeros(&g)).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_snapshot::<f64, _>(buf.as_slice()), Err(FieldError::Format(_))));
    }
}
