//! `FLD1` snapshots: magic `FLD1\0\0\0\0`, `u32 d`, `u32 N`, `f64 M`, then `N^d` little-endian `f64`
//! values in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, TorusGrid};

pub const FLD1_MAGIC: [u8; 8] = *b"FLD1\0\0\0\0";
pub const FLD1_HEADER_LEN: usize = 24;

pub fn encode_fld1(f: &Field) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(FLD1_HEADER_LEN + 8 * g.len());
    out.extend_from_slice(&FLD1_MAGIC);
    out.extend_from_slice(&(g.d() as u32).to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    out.extend_from_slice(&g.m().to_le_bytes());
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn decode_fld1(bytes: &[u8]) -> Result<Field> {
    if bytes.len() < FLD1_HEADER_LEN {
        return Err(fmt_err(format!("FLD1 header needs {FLD1_HEADER_LEN} bytes, got {}", bytes.len())));
    }
    if bytes[..8] != FLD1_MAGIC {
        return Err(fmt_err("bad FLD1 magic"));
    }
    let d = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let n = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let m = f64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let payload = &bytes[FLD1_HEADER_LEN..];
    // The payload length is checked before the grid (and its FFT plans) is built.
    let expected = u32::try_from(d)
        .ok()
        .and_then(|d| n.checked_pow(d))
        .and_then(|len| len.checked_mul(8))
        .ok_or_else(|| fmt_err(format!("N^d = {n}^{d} overflows")))?;
    if payload.len() != expected {
        return Err(fmt_err(format!("FLD1 payload has {} bytes, header implies {expected}", payload.len())));
    }
    let grid = TorusGrid::new(d, m, n)?;
    let values: Vec<f64> =
        payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(fmt_err(format!("non-finite value at index {i}")));
    }
    Field::from_vec(&grid, values)
}

pub fn write_fld1(path: impl AsRef<Path>, f: &Field) -> Result<()> {
    fs::write(path, encode_fld1(f))?;
    Ok(())
}

pub fn read_fld1(path: impl AsRef<Path>) -> Result<Field> {
    decode_fld1(&fs::read(path)?)
}
