//! `DGL1` binary container for dense matrices.
//!
//! Layout, all little-endian: the magic bytes `DGL1`, a `u32` dtype code
//! (1 = f64), a `u32` dimension count (always 2), `u64` rows, `u64` cols,
//! then `rows·cols` values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::DenseMatrix;

pub const MAGIC: &[u8; 4] = b"DGL1";
pub const DTYPE_F64: u32 = 1;

pub fn write_dense<W: Write>(mut w: W, m: &DenseMatrix) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&DTYPE_F64.to_le_bytes())?;
    w.write_all(&2u32.to_le_bytes())?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            w.write_all(&m[(r, c)].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Parse { file: "<DGL1>".into(), line: 0, msg: msg.into() }
}

pub fn read_dense<R: Read>(mut r: R) -> Result<DenseMatrix> {
    let mut head = [0u8; 28];
    r.read_exact(&mut head).map_err(|_| bad("truncated header"))?;
    if &head[..4] != MAGIC {
        return Err(bad("missing DGL1 magic"));
    }
    let dtype = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes"));
    let ndim = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes"));
    if dtype != DTYPE_F64 || ndim != 2 {
        return Err(bad(format!("unsupported dtype {dtype} / ndim {ndim}")));
    }
    let rows = u64::from_le_bytes(head[12..20].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(head[20..28].try_into().expect("8 bytes")) as usize;
    let len = rows.checked_mul(cols).ok_or_else(|| bad("dimensions overflow"))?;
    let mut data = vec![0u8; len.checked_mul(8).ok_or_else(|| bad("dimensions overflow"))?];
    r.read_exact(&mut data).map_err(|_| bad("truncated payload"))?;
    let values: Vec<f64> = data.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(bad("trailing bytes"));
    }
    Ok(DenseMatrix::from_row_slice(rows, cols, &values))
}

pub fn save_dense(path: &Path, m: &DenseMatrix) -> Result<()> {
    write_dense(BufWriter::new(File::create(path)?), m)
}

pub fn load_dense(path: &Path) -> Result<DenseMatrix> {
    read_dense(BufReader::new(File::open(path)?))
}
