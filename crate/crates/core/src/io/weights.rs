//! Binary serialization of cost-regularizer head weights.
//!
//! Layout, all little-endian:
//!
//! ```text
//! u32           layer count
//! per layer:
//!   u32         inputs
//!   u32         outputs
//!   f32 * outputs*inputs   weight matrix, row-major (one row per output)
//!   f32 * outputs          biases
//! ```

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::costvol::HeadLayer;

/// Keeps a corrupt header from asking for gigabytes of layer data.
const MAX_DIM: u32 = 1 << 20;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("truncated at byte {offset}: need {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("implausible dimension {got} at byte {offset}")]
    BadDim { offset: usize, got: u32 },
    #[error("non-finite value at byte {offset}")]
    NonFinite { offset: usize },
    #[error("{extra} trailing bytes at byte {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("layer {index} expects {got} inputs but the previous layer produces {want}")]
    ChainBreak { index: usize, got: u32, want: u32 },
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WeightsError> {
        let rest = &self.bytes[self.offset..];
        if rest.len() < n {
            return Err(WeightsError::Truncated {
                offset: self.offset,
                needed: n - rest.len(),
            });
        }
        self.offset += n;
        Ok(&rest[..n])
    }

    fn u32(&mut self) -> Result<u32, WeightsError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32_vec(&mut self, count: usize) -> Result<Vec<f64>, WeightsError> {
        let start = self.offset;
        let raw = self.take(count * 4)?;
        let mut out = Vec::with_capacity(count);
        for (i, chunk) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(WeightsError::NonFinite {
                    offset: start + i * 4,
                });
            }
            out.push(v as f64);
        }
        Ok(out)
    }
}

pub fn parse_weights(bytes: &[u8]) -> Result<Vec<HeadLayer>, WeightsError> {
    let mut cur = Cursor { bytes, offset: 0 };
    let count = cur.u32()?;
    if count > MAX_DIM {
        return Err(WeightsError::BadDim {
            offset: 0,
            got: count,
        });
    }
    let mut layers = Vec::with_capacity(count as usize);
    let mut prev_out: Option<u32> = None;
    for index in 0..count as usize {
        let at = cur.offset;
        let inputs = cur.u32()?;
        let outputs = cur.u32()?;
        if inputs == 0 || inputs > MAX_DIM {
            return Err(WeightsError::BadDim {
                offset: at,
                got: inputs,
            });
        }
        if outputs == 0 || outputs > MAX_DIM {
            return Err(WeightsError::BadDim {
                offset: at + 4,
                got: outputs,
            });
        }
        if let Some(want) = prev_out {
            if inputs != want {
                return Err(WeightsError::ChainBreak {
                    index,
                    got: inputs,
                    want,
                });
            }
        }
        prev_out = Some(outputs);
        let weights = cur.f32_vec(outputs as usize * inputs as usize)?;
        let bias = cur.f32_vec(outputs as usize)?;
        layers.push(HeadLayer {
            inputs: inputs as usize,
            outputs: outputs as usize,
            weights,
            bias,
        });
    }
    if cur.offset != bytes.len() {
        return Err(WeightsError::TrailingBytes {
            offset: cur.offset,
            extra: bytes.len() - cur.offset,
        });
    }
    Ok(layers)
}

pub fn read_weights(path: &Path) -> Result<Vec<HeadLayer>, WeightsError> {
    parse_weights(&fs::read(path)?)
}

pub fn write_weights(path: &Path, layers: &[HeadLayer]) -> Result<(), WeightsError> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for layer in layers {
        bytes.extend_from_slice(&(layer.inputs as u32).to_le_bytes());
        bytes.extend_from_slice(&(layer.outputs as u32).to_le_bytes());
        for v in layer.weights.iter().chain(layer.bias.iter()) {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}
