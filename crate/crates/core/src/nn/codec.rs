//! Flat binary model format.
//!
//! ```text
//! "ULAB0001"                      8-byte magic
//! u32 LE                          layer count
//! per layer:
//!   u32 LE rows, u32 LE cols
//!   rows*cols f64 LE              weights, row-major
//!   rows f64 LE                   biases
//! ```
//!
//! The file carries parameters only. Decoded models use ReLU hidden layers
//! and seed 0 unless the caller supplies otherwise.

use std::fs;
use std::path::Path;

use super::model::{Activation, ClassifierModel, Dense};
use crate::matrix::Matrix;
use crate::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"ULAB0001";

pub fn encode_model(model: &ClassifierModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + model.num_params() * 8 + model.layers().len() * 8);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(model.layers().len() as u32).to_le_bytes());
    for layer in model.layers() {
        out.extend_from_slice(&(layer.outputs() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.inputs() as u32).to_le_bytes());
        for v in layer.weights.as_slice().iter().chain(&layer.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.pos,
                format!("truncated: need {n} bytes, {} left", self.bytes.len() - self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(n.checked_mul(8).ok_or_else(|| Error::format(self.pos, "size overflow"))?)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn decode_model(bytes: &[u8], activation: Activation, seed: u64) -> Result<ClassifierModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MODEL_MAGIC {
        return Err(Error::format(0, "bad magic, expected ULAB0001"));
    }
    let count = r.u32()?;
    if count == 0 {
        return Err(Error::format(8, "zero layers"));
    }
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let at = r.pos;
        let rows = r.u32()?;
        let cols = r.u32()?;
        if rows == 0 || cols == 0 {
            return Err(Error::format(at, "zero-sized layer"));
        }
        let weights = r.f64s(rows * cols)?;
        let bias = r.f64s(rows)?;
        layers.push(Dense::new(Matrix::from_vec(rows, cols, weights)?, bias)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::format(r.pos, "trailing bytes"));
    }
    ClassifierModel::from_layers(layers, activation, seed).map_err(|e| match e {
        Error::Shape { .. } => Error::format(12, format!("layer dimensions do not chain: {e}")),
        other => other,
    })
}

pub fn write_model(path: &Path, model: &ClassifierModel) -> Result<()> {
    crate::io::write_atomic(path, &encode_model(model))
}

pub fn read_model(path: &Path, activation: Activation, seed: u64) -> Result<ClassifierModel> {
    decode_model(&fs::read(path)?, activation, seed)
}
