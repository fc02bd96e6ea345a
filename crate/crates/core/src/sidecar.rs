//! Flat little-endian binary sidecar for float frames and complex modes.
//!
//! Layout: 8-byte magic, `nx: u32`, `ny: u32`, `k: u32`, `dt: f64`, then `k`
//! blocks of `nx * ny` values in row-major pixel order. Real files store one
//! `f64` per pixel; complex files store `(re, im)` pairs.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};

pub const REAL_MAGIC: &[u8; 8] = b"HODMDF64";
pub const COMPLEX_MAGIC: &[u8; 8] = b"HODMDC64";
const HEADER_LEN: usize = 8 + 4 * 3 + 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidecarHeader {
    pub nx: u32,
    pub ny: u32,
    pub k: u32,
    pub dt: f64,
}

impl SidecarHeader {
    fn pixels(&self) -> usize {
        self.nx as usize * self.ny as usize
    }
}

fn encode_header(magic: &[u8; 8], h: &SidecarHeader, out: &mut Vec<u8>) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&h.nx.to_le_bytes());
    out.extend_from_slice(&h.ny.to_le_bytes());
    out.extend_from_slice(&h.k.to_le_bytes());
    out.extend_from_slice(&h.dt.to_le_bytes());
}

fn decode_header(bytes: &[u8], magic: &[u8; 8], path: &Path) -> Result<SidecarHeader> {
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..8] != magic {
        return Err(bad(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..8]),
            String::from_utf8_lossy(magic)
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let header = SidecarHeader {
        nx: u32_at(8),
        ny: u32_at(12),
        k: u32_at(16),
        dt: f64::from_le_bytes(bytes[20..28].try_into().expect("8 bytes")),
    };
    Ok(header)
}

fn f64_payload(bytes: &[u8], expected: usize, path: &Path) -> Result<Vec<f64>> {
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected * 8 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("payload has {} bytes, header implies {}", body.len(), expected * 8),
        });
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

/// Encodes a `J x K` real matrix (one block per column).
pub fn encode_real<T: Real>(data: &DMatrix<T>, nx: usize, ny: usize, dt: f64) -> Vec<u8> {
    let h = SidecarHeader {
        nx: nx as u32,
        ny: ny as u32,
        k: data.ncols() as u32,
        dt,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + data.len() * 8);
    encode_header(REAL_MAGIC, &h, &mut out);
    // nalgebra storage is column-major, i.e. one snapshot after another.
    for v in data.iter() {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out
}

pub fn decode_real(bytes: &[u8], path: &Path) -> Result<(SidecarHeader, DMatrix<f64>)> {
    let h = decode_header(bytes, REAL_MAGIC, path)?;
    let values = f64_payload(bytes, h.pixels() * h.k as usize, path)?;
    Ok((h, DMatrix::from_vec(h.pixels(), h.k as usize, values)))
}

/// Encodes a `J x M` complex matrix (one block per mode).
pub fn encode_complex<T: Real>(data: &DMatrix<Cplx<T>>, nx: usize, ny: usize, dt: f64) -> Vec<u8> {
    let h = SidecarHeader {
        nx: nx as u32,
        ny: ny as u32,
        k: data.ncols() as u32,
        dt,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + data.len() * 16);
    encode_header(COMPLEX_MAGIC, &h, &mut out);
    for z in data.iter() {
        out.extend_from_slice(&z.re.as_f64().to_le_bytes());
        out.extend_from_slice(&z.im.as_f64().to_le_bytes());
    }
    out
}

pub fn decode_complex(bytes: &[u8], path: &Path) -> Result<(SidecarHeader, DMatrix<Cplx<f64>>)> {
    let h = decode_header(bytes, COMPLEX_MAGIC, path)?;
    let values = f64_payload(bytes, 2 * h.pixels() * h.k as usize, path)?;
    let data = values.chunks_exact(2).map(|c| Cplx::new(c[0], c[1])).collect();
    Ok((h, DMatrix::from_vec(h.pixels(), h.k as usize, data)))
}

pub fn write_real<T: Real>(path: &Path, data: &DMatrix<T>, nx: usize, ny: usize, dt: f64) -> Result<()> {
    fs::write(path, encode_real(data, nx, ny, dt)).map_err(|e| Error::io(path, e))
}

pub fn read_real(path: &Path) -> Result<(SidecarHeader, DMatrix<f64>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_real(&bytes, path)
}

pub fn write_complex<T: Real>(path: &Path, data: &DMatrix<Cplx<T>>, nx: usize, ny: usize, dt: f64) -> Result<()> {
    fs::write(path, encode_complex(data, nx, ny, dt)).map_err(|e| Error::io(path, e))
}

pub fn read_complex(path: &Path) -> Result<(SidecarHeader, DMatrix<Cplx<f64>>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_complex(&bytes, path)
}
