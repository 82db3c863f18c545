//! Byte codec for the `EMBD` matrix file.
//!
//! Layout, little-endian, 24-byte header:
//!
//! | offset | size | field                               |
//! |--------|------|-------------------------------------|
//! | 0      | 4    | magic `"EMBD"`                      |
//! | 4      | 4    | version `u32` = 1                   |
//! | 8      | 8    | row count `u64`                     |
//! | 16     | 4    | dim `u32`                           |
//! | 20     | 1    | dtype `u8`: 0 = float32, 1 = float64 |
//! | 21     | 3    | reserved, zero                      |
//!
//! followed by `count × dim` values, row-major. Embedding files always use
//! float32; probe checkpoints store their projections as float64 so that a
//! save/load cycle is bit-exact.

use alloc::vec::Vec;

use thiserror::Error;

use crate::embedding::EmbeddingMatrix;
use crate::linalg::Matrix;

pub const MAGIC: [u8; 4] = *b"EMBD";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 0,
    F64 = 1,
}

impl DType {
    pub fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DType::F32),
            1 => Some(DType::F64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("bad magic bytes {0:02x?} (expected \"EMBD\")")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("unsupported dtype code {0}")]
    UnsupportedDType(u8),
    #[error("expected dtype {expected:?}, file has {found:?}")]
    WrongDType { expected: DType, found: DType },
    #[error("nonzero reserved header bytes")]
    Reserved,
    #[error("truncated header: {actual} of {HEADER_LEN} bytes")]
    TruncatedHeader { actual: usize },
    #[error("truncated payload: expected {expected} bytes, got {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("{extra} trailing bytes after payload")]
    TrailingBytes { extra: u64 },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: u64, col: u32 },
    #[error("dimension {0} does not fit the header")]
    TooLarge(usize),
    #[error("dimension must be at least 1")]
    ZeroDim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub count: u64,
    pub dim: u32,
    pub dtype: DType,
}

impl Header {
    pub fn payload_len(&self) -> u64 {
        self.count * u64::from(self.dim) * self.dtype.width() as u64
    }

    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut h = [0u8; HEADER_LEN];
        h[0..4].copy_from_slice(&MAGIC);
        h[4..8].copy_from_slice(&VERSION.to_le_bytes());
        h[8..16].copy_from_slice(&self.count.to_le_bytes());
        h[16..20].copy_from_slice(&self.dim.to_le_bytes());
        h[20] = self.dtype as u8;
        h
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FormatError> {
        if bytes.len() < HEADER_LEN {
            // A short file that does not even start with the magic is not ours.
            if bytes.len() >= 4 && bytes[0..4] != MAGIC {
                return Err(FormatError::BadMagic(bytes[0..4].try_into().unwrap()));
            }
            return Err(FormatError::TruncatedHeader {
                actual: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(FormatError::BadMagic(magic));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
        let dtype = DType::from_code(bytes[20]).ok_or(FormatError::UnsupportedDType(bytes[20]))?;
        if bytes[21..24] != [0, 0, 0] {
            return Err(FormatError::Reserved);
        }
        if dim == 0 {
            return Err(FormatError::ZeroDim);
        }
        Ok(Self { count, dim, dtype })
    }

    fn check_payload(&self, actual: usize) -> Result<(), FormatError> {
        let expected = self.payload_len();
        let actual = actual as u64;
        if actual < expected {
            Err(FormatError::Truncated { expected, actual })
        } else if actual > expected {
            Err(FormatError::TrailingBytes {
                extra: actual - expected,
            })
        } else {
            Ok(())
        }
    }
}

fn dim_u32(dim: usize) -> Result<u32, FormatError> {
    u32::try_from(dim).map_err(|_| FormatError::TooLarge(dim))
}

/// Encodes a float32 embedding matrix into header + payload bytes.
pub fn encode_embedding(matrix: &EmbeddingMatrix) -> Result<Vec<u8>, FormatError> {
    let header = Header {
        count: matrix.count() as u64,
        dim: dim_u32(matrix.dim())?,
        dtype: DType::F32,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + matrix.values().len() * 4);
    out.extend_from_slice(&header.encode());
    for v in matrix.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Decodes a float32 payload that follows `header`. Rejects NaN and infinity.
pub fn decode_embedding_payload(
    header: &Header,
    payload: &[u8],
) -> Result<EmbeddingMatrix, FormatError> {
    if header.dtype != DType::F32 {
        return Err(FormatError::WrongDType {
            expected: DType::F32,
            found: header.dtype,
        });
    }
    header.check_payload(payload.len())?;
    let dim = header.dim as usize;
    let mut values = Vec::with_capacity(payload.len() / 4);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(non_finite(i, dim));
        }
        values.push(v);
    }
    Ok(EmbeddingMatrix::new(header.count as usize, dim, values)
        .expect("payload length checked against header"))
}

pub fn decode_embedding(bytes: &[u8]) -> Result<EmbeddingMatrix, FormatError> {
    let header = Header::decode(bytes)?;
    decode_embedding_payload(&header, &bytes[HEADER_LEN..])
}

/// Encodes an `f64` matrix with dtype float64.
pub fn encode_f64(matrix: &Matrix) -> Result<Vec<u8>, FormatError> {
    if matrix.cols() == 0 {
        return Err(FormatError::ZeroDim);
    }
    let header = Header {
        count: matrix.rows() as u64,
        dim: dim_u32(matrix.cols())?,
        dtype: DType::F64,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + matrix.as_slice().len() * 8);
    out.extend_from_slice(&header.encode());
    for v in matrix.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_f64(bytes: &[u8]) -> Result<Matrix, FormatError> {
    let header = Header::decode(bytes)?;
    if header.dtype != DType::F64 {
        return Err(FormatError::WrongDType {
            expected: DType::F64,
            found: header.dtype,
        });
    }
    let payload = &bytes[HEADER_LEN..];
    header.check_payload(payload.len())?;
    let dim = header.dim as usize;
    let mut values = Vec::with_capacity(payload.len() / 8);
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(non_finite(i, dim));
        }
        values.push(v);
    }
    Ok(Matrix::from_vec(header.count as usize, dim, values).expect("payload length checked"))
}

fn non_finite(flat: usize, dim: usize) -> FormatError {
    FormatError::NonFinite {
        row: (flat / dim) as u64,
        col: (flat % dim) as u32,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn empty_matrix_is_header_only() {
        let m = EmbeddingMatrix::new(0, 8, vec![]).unwrap();
        let bytes = encode_embedding(&m).unwrap();
        assert_eq!(bytes.len(), 24);
        assert_eq!(&bytes[0..4], b"EMBD");
        assert_eq!(decode_embedding(&bytes).unwrap(), m);
    }

    #[test]
    fn two_by_three_is_48_bytes() {
        let m = EmbeddingMatrix::new(2, 3, vec![1.0, -2.5, 3.0, 0.0, -0.0, 1e-30]).unwrap();
        let bytes = encode_embedding(&m).unwrap();
        assert_eq!(bytes.len(), 48);
        let back = decode_embedding(&bytes).unwrap();
        let bits = |m: &EmbeddingMatrix| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn header_fields_are_little_endian() {
        let m = EmbeddingMatrix::new(2, 3, vec![0.0; 6]).unwrap();
        let b = encode_embedding(&m).unwrap();
        assert_eq!(&b[4..8], &[1, 0, 0, 0]);
        assert_eq!(&b[8..16], &[2, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&b[16..20], &[3, 0, 0, 0]);
        assert_eq!(&b[20..24], &[0, 0, 0, 0]);
    }

    #[test]
    fn rejects_version_99() {
        let m = EmbeddingMatrix::new(1, 1, vec![1.0]).unwrap();
        let mut b = encode_embedding(&m).unwrap();
        b[4..8].copy_from_slice(&99u32.to_le_bytes());
        assert_eq!(
            decode_embedding(&b),
            Err(FormatError::UnsupportedVersion(99))
        );
    }

    #[test]
    fn rejects_bad_magic() {
        let mut b = encode_embedding(&EmbeddingMatrix::new(0, 2, vec![]).unwrap()).unwrap();
        b[0] = b'X';
        assert!(matches!(
            decode_embedding(&b),
            Err(FormatError::BadMagic(_))
        ));
    }

    #[test]
    fn truncation_names_lengths() {
        let m = EmbeddingMatrix::new(2, 3, vec![0.5; 6]).unwrap();
        let b = encode_embedding(&m).unwrap();
        assert_eq!(
            decode_embedding(&b[..40]),
            Err(FormatError::Truncated {
                expected: 24,
                actual: 16
            })
        );
    }

    #[test]
    fn rejects_nan() {
        let m = EmbeddingMatrix::new(2, 2, vec![0.5; 4]).unwrap();
        let mut b = encode_embedding(&m).unwrap();
        b[HEADER_LEN + 12..HEADER_LEN + 16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(
            decode_embedding(&b),
            Err(FormatError::NonFinite { row: 1, col: 1 })
        );
    }

    #[test]
    fn f64_round_trip_and_dtype_guard() {
        let m = Matrix::from_vec(2, 2, vec![0.1, -0.2, 1e-300, 3.0]).unwrap();
        let b = encode_f64(&m).unwrap();
        assert_eq!(b.len(), 24 + 32);
        assert_eq!(decode_f64(&b).unwrap(), m);
        assert!(matches!(
            decode_embedding(&b),
            Err(FormatError::WrongDType { .. })
        ));
    }
}
