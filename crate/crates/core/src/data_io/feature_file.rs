//! Feature file layout (all integers and floats little-endian):
//!
//! | offset | size | field                               |
//! |--------|------|-------------------------------------|
//! | 0      | 4    | magic `LGF1`                        |
//! | 4      | 2    | version, u16 = 1                    |
//! | 6      | 4    | num_slices, u32 = 64                |
//! | 10     | 4    | feat_dim, u32 = 1152                |
//! | 14     | 4·n·d| f32 payload, row-major, slice 0 first|

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{FEATURE_DIM, NUM_SLICES};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

pub const FEATURE_MAGIC: [u8; 4] = *b"LGF1";
pub const FEATURE_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 14;

fn format_err(path: &Path, offset: usize, detail: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        detail: detail.into(),
    }
}

/// Serializes a 64 x 1152 feature stack. Values are narrowed to `f32`.
pub fn encode_features<T: Scalar>(features: &Matrix<T>) -> Result<Vec<u8>> {
    if features.shape() != (NUM_SLICES, FEATURE_DIM) {
        return Err(Error::Data(format!(
            "feature stack is {:?}, expected ({NUM_SLICES}, {FEATURE_DIM})",
            features.shape()
        )));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + features.len() * 4);
    out.extend_from_slice(&FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(NUM_SLICES as u32).to_le_bytes());
    out.extend_from_slice(&(FEATURE_DIM as u32).to_le_bytes());
    for (i, v) in features.as_slice().iter().enumerate() {
        let v = v.to_f32().filter(|v| v.is_finite()).ok_or_else(|| {
            Error::NonFinite(format!(
                "feature ({}, {}) is not a finite f32",
                i / FEATURE_DIM,
                i % FEATURE_DIM
            ))
        })?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses a feature file image; `path` only labels diagnostics.
pub fn decode_features<T: Scalar>(bytes: &[u8], path: &Path) -> Result<Matrix<T>> {
    if bytes.len() < HEADER_LEN {
        return Err(format_err(path, bytes.len(), format!("truncated header ({} bytes)", bytes.len())));
    }
    if bytes[0..4] != FEATURE_MAGIC {
        return Err(format_err(path, 0, format!("bad magic {:?}", &bytes[0..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FEATURE_VERSION {
        return Err(format_err(path, 4, format!("unsupported version {version}")));
    }
    let slices = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    if slices != NUM_SLICES {
        return Err(format_err(path, 6, format!("{slices} slices, expected {NUM_SLICES}")));
    }
    let dim = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    if dim != FEATURE_DIM {
        return Err(format_err(path, 10, format!("feature width {dim}, expected {FEATURE_DIM}")));
    }
    let expected = HEADER_LEN + slices * dim * 4;
    if bytes.len() != expected {
        return Err(format_err(
            path,
            bytes.len().min(expected),
            format!("payload size mismatch: file has {} bytes, header implies {expected}", bytes.len()),
        ));
    }
    let mut data = Vec::with_capacity(slices * dim);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(format_err(path, HEADER_LEN + 4 * i, "non-finite value"));
        }
        data.push(T::from_f32(v).unwrap());
    }
    Matrix::from_vec(slices, dim, data)
}

pub fn write_feature_file<T: Scalar>(path: impl AsRef<Path>, features: &Matrix<T>) -> Result<()> {
    let bytes = encode_features(features)?;
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_feature_file<T: Scalar>(path: impl AsRef<Path>) -> Result<Matrix<T>> {
    let path = path.as_ref();
    decode_features(&fs::read(path)?, path)
}
