//! Binary field checkpoints.
//!
//! Layout: `b"HLAB"`, then little-endian `u32` version, `d`, `n`, component
//! count, then every coefficient as a pair of little-endian `f64` (re, im),
//! component-major, row-major in FFT index order within a component.

use std::fs;
use std::path::Path;

use hlab_core::{Complex64, GridSpec, SpectralField};

use crate::error::{io_err, LabError, Result};

pub const MAGIC: &[u8; 4] = b"HLAB";
pub const VERSION: u32 = 1;
const HEADER: usize = 20;

pub fn encode(f: &SpectralField) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(HEADER + 16 * f.coeffs().len());
    out.extend_from_slice(MAGIC);
    for v in [VERSION, g.d() as u32, g.n() as u32, f.components() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for c in f.coeffs() {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<SpectralField, String> {
    if bytes.len() < HEADER || &bytes[..4] != MAGIC {
        return Err("not an HLAB checkpoint".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let (version, d, n, comps) = (word(0), word(1) as usize, word(2) as usize, word(3) as usize);
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let grid = GridSpec::new(d, n).map_err(|e| e.to_string())?;
    let count = grid.len() * comps;
    if comps == 0 || bytes.len() != HEADER + 16 * count {
        return Err(format!("expected {} bytes for {comps} components on {d}D n = {n}, found {}", HEADER + 16 * count, bytes.len()));
    }
    let coeffs = bytes[HEADER..]
        .chunks_exact(16)
        .map(|c| Complex64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
        .collect();
    SpectralField::from_coeffs(grid, comps, coeffs).map_err(|e| e.to_string())
}

pub fn write(path: &Path, f: &SpectralField) -> Result<()> {
    fs::write(path, encode(f)).map_err(io_err(path))
}

pub fn read(path: &Path) -> Result<SpectralField> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode(&bytes).map_err(|r| LabError::format(path, r))
}
