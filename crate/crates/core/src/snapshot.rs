//! The AFLD binary field format.
//!
//! Layout, little-endian: magic `AFLD`, `u32` version, `u32 nx`, `u32 ny`,
//! `f64` origin x, origin y, spacing x, spacing y, `u8` boundary tag, then
//! `nx·ny` complex values as interleaved `f64` pairs in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{AfError, Result};
use crate::field::ComplexField;
use crate::grid::{BoundaryCondition, Grid2D};

pub const MAGIC: [u8; 4] = *b"AFLD";
pub const VERSION: u32 = 1;
/// Bytes before the field values.
pub const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 4 * 8 + 1;

pub fn write_snapshot<W: Write>(u: &ComplexField, mut w: W) -> Result<()> {
    let g = u.grid();
    let [nx, ny] = g.size();
    let dims =
        |n: usize| u32::try_from(n).map_err(|_| AfError::Format(format!("grid dimension {n} does not fit in u32")));
    let mut head = Vec::with_capacity(HEADER_LEN);
    head.extend_from_slice(&MAGIC);
    head.extend_from_slice(&VERSION.to_le_bytes());
    head.extend_from_slice(&dims(nx)?.to_le_bytes());
    head.extend_from_slice(&dims(ny)?.to_le_bytes());
    for v in [g.origin()[0], g.origin()[1], g.spacing()[0], g.spacing()[1]] {
        head.extend_from_slice(&v.to_le_bytes());
    }
    head.push(g.bc().tag());
    w.write_all(&head)?;
    let mut body = Vec::with_capacity(16 * u.values().len());
    for z in u.values() {
        body.extend_from_slice(&z.re.to_le_bytes());
        body.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<ComplexField> {
    let mut head = [0u8; HEADER_LEN];
    r.read_exact(&mut head)
        .map_err(|e| AfError::Format(format!("truncated AFLD header: {e}")))?;
    if head[..4] != MAGIC {
        return Err(AfError::Format(format!(
            "bad magic {:?}, expected \"AFLD\"",
            &head[..4]
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().expect("4 bytes"));
    let f64_at = |o: usize| f64::from_le_bytes(head[o..o + 8].try_into().expect("8 bytes"));
    let version = u32_at(4);
    if version != VERSION {
        return Err(AfError::Format(format!("unsupported AFLD version {version}")));
    }
    let (nx, ny) = (u32_at(8) as usize, u32_at(12) as usize);
    let origin = [f64_at(16), f64_at(24)];
    let spacing = [f64_at(32), f64_at(40)];
    let bc = BoundaryCondition::from_tag(head[48])
        .ok_or_else(|| AfError::Format(format!("unknown boundary tag {}", head[48])))?;
    let grid =
        Grid2D::new(origin, spacing, [nx, ny], bc).map_err(|e| AfError::Format(format!("invalid AFLD grid: {e}")))?;
    let count = nx
        .checked_mul(ny)
        .and_then(|n| n.checked_mul(16))
        .ok_or_else(|| AfError::Format("AFLD grid is too large".into()))?;
    let mut body = Vec::new();
    r.take(count as u64 + 1).read_to_end(&mut body)?;
    if body.len() != count {
        return Err(AfError::Format(format!(
            "AFLD body holds {} bytes, expected {count}",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
            )
        })
        .collect();
    ComplexField::from_values(grid, values)
}

pub fn save_snapshot(u: &ComplexField, path: &Path) -> Result<()> {
    let file = File::create(path)
        .map_err(|e| AfError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    write_snapshot(u, BufWriter::new(file))
}

pub fn load_snapshot(path: &Path) -> Result<ComplexField> {
    let file =
        File::open(path).map_err(|e| AfError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    read_snapshot(BufReader::new(file))
}
