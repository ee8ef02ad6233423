//! Binary Q-network checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "QNET1"                      magic
//! u8  64                       float width in bits
//! u8  0                        byte order (0 = little-endian)
//! u32 L                        number of layer sizes
//! u32 × L                      sizes, input first
//! per layer:
//!   f64 × (out × in)           weights, row-major, one row per output unit
//!   f64 × out                  biases
//! [u8; 32]                     SHA-256 of everything above
//! ```

use std::path::Path;

use activetrack_core::nn::{Dense, Mlp};
use sha2::{Digest, Sha256};

pub const MAGIC: &[u8; 5] = b"QNET1";
const FLOAT_BITS: u8 = 64;
const LITTLE_ENDIAN: u8 = 0;
const DIGEST_LEN: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported float width {bits} or byte order {order}")]
    Unsupported { bits: u8, order: u8 },
    #[error("file is truncated")]
    Truncated,
    #[error("checksum mismatch: file is corrupted")]
    ChecksumMismatch,
    #[error("{0} trailing bytes after the parameters")]
    TrailingBytes(usize),
    #[error("layer sizes do not describe a network")]
    InvalidLayers,
}

pub fn encode(net: &Mlp) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * net.num_params());
    out.extend_from_slice(MAGIC);
    out.push(FLOAT_BITS);
    out.push(LITTLE_ENDIAN);
    let sizes = net.sizes();
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for s in &sizes {
        out.extend_from_slice(&(*s as u32).to_le_bytes());
    }
    for layer in net.layers() {
        for j in 0..layer.outputs {
            for k in 0..layer.inputs {
                out.extend_from_slice(&layer.weight(k, j).to_le_bytes());
            }
        }
        for b in &layer.bias {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Mlp, CheckpointError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + DIGEST_LEN {
        return Err(CheckpointError::Truncated);
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(CheckpointError::ChecksumMismatch);
    }

    let mut r = Reader { bytes: body, pos: MAGIC.len() };
    let (bits, order) = (r.u8()?, r.u8()?);
    if bits != FLOAT_BITS || order != LITTLE_ENDIAN {
        return Err(CheckpointError::Unsupported { bits, order });
    }
    let n = r.u32()? as usize;
    if n < 2 || n > (body.len() / 4) {
        return Err(CheckpointError::InvalidLayers);
    }
    let sizes = (0..n).map(|_| r.u32().map(|s| s as usize)).collect::<Result<Vec<_>, _>>()?;
    let mut layers = Vec::with_capacity(n - 1);
    for w in sizes.windows(2) {
        let (inputs, outputs) = (w[0], w[1]);
        if inputs == 0 || outputs == 0 {
            return Err(CheckpointError::InvalidLayers);
        }
        let needed = inputs
            .checked_mul(outputs)
            .and_then(|p| p.checked_add(outputs))
            .and_then(|p| p.checked_mul(8))
            .ok_or(CheckpointError::InvalidLayers)?;
        if needed > body.len() - r.pos {
            return Err(CheckpointError::Truncated);
        }
        let mut layer = Dense::zeros(inputs, outputs);
        for j in 0..outputs {
            for k in 0..inputs {
                layer.weights[k * outputs + j] = r.f64()?;
            }
        }
        for b in layer.bias.iter_mut() {
            *b = r.f64()?;
        }
        layers.push(layer);
    }
    if r.pos != body.len() {
        return Err(CheckpointError::TrailingBytes(body.len() - r.pos));
    }
    Mlp::from_layers(layers).map_err(|_| CheckpointError::InvalidLayers)
}

pub fn save(net: &Mlp, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, encode(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Mlp, CheckpointError> {
    decode(&std::fs::read(path)?)
}
