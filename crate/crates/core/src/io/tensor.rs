//! Binary tensor file format.
//!
//! Layout, all little-endian:
//! - magic `STST` (4 bytes)
//! - version u16, currently 1
//! - rank u8 (1..=8)
//! - rank x u32 dimensions
//! - row-major f32 payload, exactly the product of the dimensions
//!
//! Parse errors report the byte offset of the first offending byte.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"STST";
pub const VERSION: u16 = 1;
pub const MAX_RANK: u8 = 8;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic at byte {offset}, expected 'STST'")]
    BadMagic { offset: usize },
    #[error("unsupported version {got} at byte {offset}")]
    BadVersion { got: u16, offset: usize },
    #[error("rank {got} out of range 1..={MAX_RANK} at byte {offset}")]
    BadRank { got: u8, offset: usize },
    #[error("file ends at byte {offset}, needed {needed} more")]
    Truncated { offset: usize, needed: usize },
    #[error("{extra} trailing bytes starting at byte {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("non-finite value at byte {offset}")]
    NonFinite { offset: usize },
    #[error("dimension product overflows at byte {offset}")]
    Overflow { offset: usize },
    #[error("data length {got} does not match dims product {want}")]
    ShapeMismatch { got: usize, want: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<u32>, data: Vec<f32>) -> Result<Self, TensorError> {
        let want = dims.iter().map(|&d| d as usize).product::<usize>();
        if data.len() != want {
            return Err(TensorError::ShapeMismatch {
                got: data.len(),
                want,
            });
        }
        Ok(Self { dims, data })
    }
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<(), TensorError> {
    let mut buf = Vec::with_capacity(11 + 4 * tensor.dims.len() + 4 * tensor.data.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(tensor.dims.len() as u8);
    for &d in &tensor.dims {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for &v in &tensor.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

fn take<'a>(bytes: &'a [u8], offset: &mut usize, n: usize) -> Result<&'a [u8], TensorError> {
    if bytes.len() < *offset + n {
        return Err(TensorError::Truncated {
            offset: bytes.len(),
            needed: *offset + n - bytes.len(),
        });
    }
    let slice = &bytes[*offset..*offset + n];
    *offset += n;
    Ok(slice)
}

pub fn parse_tensor(bytes: &[u8]) -> Result<Tensor, TensorError> {
    let mut offset = 0usize;
    let magic = take(bytes, &mut offset, 4)?;
    if magic != MAGIC {
        return Err(TensorError::BadMagic { offset: 0 });
    }
    let version_at = offset;
    let version = u16::from_le_bytes(take(bytes, &mut offset, 2)?.try_into().unwrap());
    if version != VERSION {
        return Err(TensorError::BadVersion {
            got: version,
            offset: version_at,
        });
    }
    let rank_at = offset;
    let rank = take(bytes, &mut offset, 1)?[0];
    if rank == 0 || rank > MAX_RANK {
        return Err(TensorError::BadRank {
            got: rank,
            offset: rank_at,
        });
    }
    let dims_at = offset;
    let mut dims = Vec::with_capacity(rank as usize);
    let mut count = 1usize;
    for i in 0..rank as usize {
        let d = u32::from_le_bytes(take(bytes, &mut offset, 4)?.try_into().unwrap());
        count = count
            .checked_mul(d as usize)
            .ok_or(TensorError::Overflow {
                offset: dims_at + 4 * i,
            })?;
        dims.push(d);
    }
    let payload_at = offset;
    let payload = take(bytes, &mut offset, count * 4)?;
    if offset != bytes.len() {
        return Err(TensorError::TrailingBytes {
            offset,
            extra: bytes.len() - offset,
        });
    }
    let mut data = Vec::with_capacity(count);
    for i in 0..count {
        let v = f32::from_le_bytes(payload[4 * i..4 * i + 4].try_into().unwrap());
        if !v.is_finite() {
            return Err(TensorError::NonFinite {
                offset: payload_at + 4 * i,
            });
        }
        data.push(v);
    }
    Ok(Tensor { dims, data })
}

pub fn read_tensor(path: &Path) -> Result<Tensor, TensorError> {
    parse_tensor(&fs::read(path)?)
}
