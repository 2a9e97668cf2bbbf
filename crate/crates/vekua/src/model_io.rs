//! Model serialization: a small versioned binary format.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic  b"VEKC"
//! u32    format version (currently 1)
//! u64    in_dim
//! u64    number of blocks
//! per block:
//!   u64  K (bank size)
//!   f64  lambda
//!   f64[in_dim*32]  warp input weights (row-major)
//!   f64[32]         warp hidden bias
//!   f64[32*2]       warp output weights (row-major)
//!   f64[K]          omega_re
//!   f64[K]          omega_im
//!   f64[4K]         solved coefficients
//! ```
//!
//! Floats are stored as raw IEEE-754 bits, so a load reproduces predictions
//! bit-exactly.

use std::fs;
use std::path::Path;

use crate::basis::FrequencyBank;
use crate::cascade::{Block, CascadeModel};
use crate::error::{Result, VekuaError};
use crate::mat::Mat;
use crate::warp::{WarpParams, HIDDEN};

const MAGIC: &[u8; 4] = b"VEKC";
const VERSION: u32 = 1;

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Encode a model to bytes.
pub fn serialize_model(model: &CascadeModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u64(&mut out, model.in_dim as u64);
    put_u64(&mut out, model.blocks.len() as u64);
    for b in &model.blocks {
        put_u64(&mut out, b.bank.k() as u64);
        out.extend_from_slice(&b.lambda.to_le_bytes());
        put_f64s(&mut out, b.warp.w.as_slice());
        put_f64s(&mut out, &b.warp.b);
        put_f64s(&mut out, b.warp.w_out.as_slice());
        put_f64s(&mut out, &b.bank.omega_re);
        put_f64s(&mut out, &b.bank.omega_im);
        put_f64s(&mut out, &b.w);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(VekuaError::ModelFormat(
                "unexpected end of model data".into(),
            ));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(8 * n)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Decode a model from bytes.
pub fn deserialize_model(bytes: &[u8]) -> Result<CascadeModel> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(VekuaError::ModelFormat(
            "bad magic (not a cascade model file)".into(),
        ));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(VekuaError::ModelFormat(format!(
            "unsupported model format version {version} (expected {VERSION})"
        )));
    }
    let in_dim = r.u64()? as usize;
    if in_dim == 0 {
        return Err(VekuaError::ModelFormat("in_dim must be positive".into()));
    }
    let n_blocks = r.u64()? as usize;
    let mut blocks = Vec::with_capacity(n_blocks.min(64));
    for _ in 0..n_blocks {
        let k = r.u64()? as usize;
        if k == 0 {
            return Err(VekuaError::ModelFormat(
                "block bank size must be positive".into(),
            ));
        }
        let lambda = r.f64()?;
        let w_in = r.f64s(in_dim * HIDDEN)?;
        let b = r.f64s(HIDDEN)?;
        let w_out = r.f64s(HIDDEN * 2)?;
        let omega_re = r.f64s(k)?;
        let omega_im = r.f64s(k)?;
        let w = r.f64s(4 * k)?;
        blocks.push(Block {
            warp: WarpParams {
                w: Mat::from_vec(in_dim, HIDDEN, w_in)?,
                b,
                w_out: Mat::from_vec(HIDDEN, 2, w_out)?,
                in_dim,
            },
            bank: FrequencyBank { omega_re, omega_im },
            w,
            lambda,
        });
    }
    if r.at != bytes.len() {
        return Err(VekuaError::ModelFormat(format!(
            "{} trailing bytes after model data",
            bytes.len() - r.at
        )));
    }
    Ok(CascadeModel { blocks, in_dim })
}

/// Write a model to disk.
pub fn save_model(path: &Path, model: &CascadeModel) -> Result<()> {
    fs::write(path, serialize_model(model))?;
    Ok(())
}

/// Read a model from disk.
pub fn load_model(path: &Path) -> Result<CascadeModel> {
    deserialize_model(&fs::read(path)?)
}
