//! NSF1 binary field format.
//!
//! ```text
//! magic  b"NSF1"
//! u32    version (1)
//! u32    dimension n
//! u64    points per axis N
//! f64    half width L
//! u32    component count
//! f64[]  components, each N^n values in row-major order
//! ```
//! All integers and floats are little-endian.

use std::io::{Read, Write};

use super::{GridSpec, ScalarField, TensorField, VectorField};
use crate::error::{Error, Result};

pub const NSF1_MAGIC: &[u8; 4] = b"NSF1";
pub const NSF1_VERSION: u32 = 1;

/// Grid plus an arbitrary number of scalar components.
#[derive(Debug, Clone, PartialEq)]
pub struct RawField {
    pub grid: GridSpec,
    pub components: Vec<Vec<f64>>,
}

impl From<&ScalarField> for RawField {
    fn from(s: &ScalarField) -> Self {
        Self {
            grid: s.grid,
            components: vec![s.data.clone()],
        }
    }
}

impl From<&VectorField> for RawField {
    fn from(v: &VectorField) -> Self {
        Self {
            grid: v.grid,
            components: v.components.clone(),
        }
    }
}

impl From<&TensorField> for RawField {
    fn from(t: &TensorField) -> Self {
        Self {
            grid: t.grid,
            components: t.entries.clone(),
        }
    }
}

impl RawField {
    pub fn into_scalar(mut self) -> Result<ScalarField> {
        if self.components.len() != 1 {
            return Err(Error::Format(format!(
                "expected 1 component, found {}",
                self.components.len()
            )));
        }
        ScalarField::from_data(self.grid, self.components.pop().unwrap_or_default())
    }

    pub fn into_vector(self) -> Result<VectorField> {
        if self.components.len() != self.grid.dim() {
            return Err(Error::Format(format!(
                "expected {} components, found {}",
                self.grid.dim(),
                self.components.len()
            )));
        }
        VectorField::from_components(self.grid, self.components)
    }
}

pub fn write_nsf1<W: Write>(mut w: W, field: &RawField) -> Result<()> {
    let g = field.grid;
    w.write_all(NSF1_MAGIC)?;
    w.write_all(&NSF1_VERSION.to_le_bytes())?;
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&(g.points() as u64).to_le_bytes())?;
    w.write_all(&g.half_width().to_le_bytes())?;
    w.write_all(&(field.components.len() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(g.len() * 8);
    for c in &field.components {
        if c.len() != g.len() {
            return Err(Error::Format(format!(
                "component has {} values, grid has {}",
                c.len(),
                g.len()
            )));
        }
        buf.clear();
        for v in c {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn read_array<const K: usize, R: Read>(r: &mut R, what: &str) -> Result<[u8; K]> {
    let mut b = [0u8; K];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated header reading {what}: {e}")))?;
    Ok(b)
}

pub fn read_nsf1<R: Read>(mut r: R) -> Result<RawField> {
    let magic: [u8; 4] = read_array(&mut r, "magic")?;
    if &magic != NSF1_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = u32::from_le_bytes(read_array(&mut r, "version")?);
    if version != NSF1_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = u32::from_le_bytes(read_array(&mut r, "dimension")?) as usize;
    let points = u64::from_le_bytes(read_array(&mut r, "points")?);
    let half_width = f64::from_le_bytes(read_array(&mut r, "half width")?);
    let count = u32::from_le_bytes(read_array(&mut r, "component count")?) as usize;
    let points =
        usize::try_from(points).map_err(|_| Error::Format("point count overflows".into()))?;
    let grid = GridSpec::new(dim, points, half_width)
        .map_err(|e| Error::Format(format!("invalid grid in header: {e}")))?;
    let mut components = Vec::with_capacity(count);
    let mut buf = vec![0u8; grid.len() * 8];
    for c in 0..count {
        r.read_exact(&mut buf)
            .map_err(|e| Error::Format(format!("truncated data in component {c}: {e}")))?;
        components.push(
            buf.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        );
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after last component".into()));
    }
    Ok(RawField { grid, components })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let g = GridSpec::new(3, 2, 1.5).unwrap();
        let s = ScalarField::from_fn(g, |x| x[0]);
        let mut bytes = Vec::new();
        write_nsf1(&mut bytes, &RawField::from(&s)).unwrap();
        assert_eq!(&bytes[..4], b"NSF1");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &3u32.to_le_bytes());
        assert_eq!(&bytes[12..20], &2u64.to_le_bytes());
        assert_eq!(&bytes[20..28], &1.5f64.to_le_bytes());
        assert_eq!(&bytes[28..32], &1u32.to_le_bytes());
        assert_eq!(bytes.len(), 32 + 8 * 8);
        assert_eq!(&bytes[32..40], &(-0.75f64).to_le_bytes());
    }

    #[test]
    fn rejects_corruption() {
        let g = GridSpec::new(3, 2, 1.0).unwrap();
        let mut bytes = Vec::new();
        write_nsf1(&mut bytes, &RawField::from(&VectorField::zeros(g))).unwrap();
        assert!(read_nsf1(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_nsf1(&bad[..]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_nsf1(&extra[..]).is_err());
        let v = read_nsf1(&bytes[..]).unwrap();
        assert!(v.clone().into_scalar().is_err());
        assert!(v.into_vector().is_ok());
    }
}
