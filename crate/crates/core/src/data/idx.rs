//! IDX reader/writer (the MNIST container format).
//!
//! Images: BE u32 magic `0x00000803`, BE u32 count, rows, cols, then
//! `count*rows*cols` raw u8 pixels. Labels: BE u32 magic `0x00000801`, BE u32
//! count, then `count` raw u8 labels. Files whose name ends in `.gz` are
//! gunzipped first.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::LabeledDataset;
use crate::matrix::Matrix;
use crate::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

const NUM_DIGITS: usize = 10;

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::format(0, format!("gzip: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::format(offset, "truncated header"))
}

fn check_payload(bytes: &[u8], header: usize, expected: Option<usize>) -> Result<()> {
    let expected = expected.ok_or_else(|| Error::format(header, "payload size overflows"))?;
    let actual = bytes.len() - header;
    if actual < expected {
        return Err(Error::format(
            bytes.len(),
            format!("truncated payload: expected {expected} bytes, found {actual}"),
        ));
    }
    if actual > expected {
        return Err(Error::format(
            header + expected,
            format!("{} trailing bytes after payload", actual - expected),
        ));
    }
    Ok(())
}

/// Parses raw (uncompressed) IDX image and label buffers. Pixels are scaled
/// to `[0, 1]`.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<LabeledDataset> {
    let magic = be_u32(images, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(0, format!("image magic {magic:#010x}, expected 0x00000803")));
    }
    let count = be_u32(images, 4)? as usize;
    let rows = be_u32(images, 8)? as usize;
    let cols = be_u32(images, 12)? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::format(8, "zero image dimension"));
    }
    let d = rows * cols;
    check_payload(images, 16, count.checked_mul(d))?;

    let lmagic = be_u32(labels, 0)?;
    if lmagic != IDX_LABELS_MAGIC {
        return Err(Error::format(0, format!("label magic {lmagic:#010x}, expected 0x00000801")));
    }
    let lcount = be_u32(labels, 4)? as usize;
    if lcount != count {
        return Err(Error::format(4, format!("label count {lcount} != image count {count}")));
    }
    check_payload(labels, 8, Some(lcount))?;
    if count == 0 {
        return Err(Error::format(4, "empty IDX file"));
    }

    let label_vec: Vec<usize> = labels[8..].iter().map(|&b| b as usize).collect();
    if let Some(pos) = label_vec.iter().position(|&l| l >= NUM_DIGITS) {
        return Err(Error::format(8 + pos, format!("label {} outside [0, 10)", label_vec[pos])));
    }
    let pixels = images[16..].iter().map(|&b| b as f64 / 255.0).collect();
    LabeledDataset::new(
        Matrix::from_vec(count, d, pixels)?,
        label_vec,
        LabeledDataset::numeric_classes(NUM_DIGITS),
        "idx",
    )
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let images = read_maybe_gz(images_path)?;
    let labels = read_maybe_gz(labels_path)?;
    let mut ds = parse_idx(&images, &labels)?;
    ds.name = images_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    Ok(ds)
}

pub fn encode_idx_images(count: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), count * rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
