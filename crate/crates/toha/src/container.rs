//! The ATTG v1 attention container.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                     |
//! |--------|------|---------------------------|
//! | 0      | 4    | magic `b"ATTG"`           |
//! | 4      | 2    | version, `1`              |
//! | 6      | 2    | flags, `0`                |
//! | 8      | 4    | `n_layers`                |
//! | 12     | 4    | `n_heads`                 |
//! | 16     | 4    | `n_tokens`                |
//! | 20     | 4    | `prompt_len`              |
//! | 24     | ...  | f32 payload               |
//!
//! The payload holds one packed lower-triangular map per (layer, head),
//! layer-major and head-minor. Row `i` of a map contributes the `i + 1`
//! weights `w[i][0..=i]`.

use std::io::{Read, Write};
use std::path::Path;

use toha_core::{packed_len, DistanceGraph};

use crate::error::{ContainerError, Error, IoContext, Result};

pub const MAGIC: [u8; 4] = *b"ATTG";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;
/// Weights this far outside `[0, 1]` are clamped on read; further is an error.
pub const CLAMP_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContainerHeader {
    pub n_layers: u32,
    pub n_heads: u32,
    pub n_tokens: u32,
    pub prompt_len: u32,
}

impl ContainerHeader {
    /// Checks the header alone; O(1).
    pub fn parse(bytes: &[u8; HEADER_LEN]) -> Result<Self, ContainerError> {
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(ContainerError::BadMagic(magic));
        }
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u16_at(4);
        if version != VERSION {
            return Err(ContainerError::UnsupportedVersion(version));
        }
        let flags = u16_at(6);
        if flags != 0 {
            return Err(ContainerError::UnsupportedFlags(flags));
        }
        let header = Self {
            n_layers: u32_at(8),
            n_heads: u32_at(12),
            n_tokens: u32_at(16),
            prompt_len: u32_at(20),
        };
        header.validate()?;
        Ok(header)
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&MAGIC);
        out[4..6].copy_from_slice(&VERSION.to_le_bytes());
        out[6..8].copy_from_slice(&0u16.to_le_bytes());
        out[8..12].copy_from_slice(&self.n_layers.to_le_bytes());
        out[12..16].copy_from_slice(&self.n_heads.to_le_bytes());
        out[16..20].copy_from_slice(&self.n_tokens.to_le_bytes());
        out[20..24].copy_from_slice(&self.prompt_len.to_le_bytes());
        out
    }

    fn validate(&self) -> Result<(), ContainerError> {
        if self.prompt_len == 0 || self.prompt_len >= self.n_tokens {
            return Err(ContainerError::Invariant(format!(
                "need 0 < prompt_len < n_tokens, got prompt_len = {} and n_tokens = {}",
                self.prompt_len, self.n_tokens
            )));
        }
        if self.n_layers == 0 || self.n_heads == 0 {
            return Err(ContainerError::Invariant(format!(
                "empty head grid {} x {}",
                self.n_layers, self.n_heads
            )));
        }
        Ok(())
    }

    pub fn map_len(&self) -> usize {
        packed_len(self.n_tokens as usize)
    }

    /// Number of f32 values in the payload.
    pub fn payload_len(&self) -> usize {
        self.n_layers as usize * self.n_heads as usize * self.map_len()
    }
}

/// Attention maps of every (layer, head) for one prompt + response pair.
/// Immutable once built; every weight is finite and in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionContainer {
    header: ContainerHeader,
    weights: Vec<f32>,
}

impl AttentionContainer {
    /// Validates the invariants; weights must already be in `[0, 1]`.
    pub fn new(
        n_layers: u32,
        n_heads: u32,
        n_tokens: u32,
        prompt_len: u32,
        weights: Vec<f32>,
    ) -> Result<Self, ContainerError> {
        let header = ContainerHeader {
            n_layers,
            n_heads,
            n_tokens,
            prompt_len,
        };
        header.validate()?;
        if weights.len() != header.payload_len() {
            return Err(ContainerError::Invariant(format!(
                "payload holds {} weights, expected {}",
                weights.len(),
                header.payload_len()
            )));
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() {
                return Err(ContainerError::NonFiniteWeight { index });
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(ContainerError::WeightOutOfRange { index, value });
            }
        }
        Ok(Self { header, weights })
    }

    pub fn header(&self) -> ContainerHeader {
        self.header
    }

    pub fn n_layers(&self) -> u32 {
        self.header.n_layers
    }

    pub fn n_heads(&self) -> u32 {
        self.header.n_heads
    }

    pub fn n_tokens(&self) -> u32 {
        self.header.n_tokens
    }

    pub fn prompt_len(&self) -> u32 {
        self.header.prompt_len
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    /// Packed lower-triangular map of one head.
    pub fn map(&self, layer: u32, head: u32) -> &[f32] {
        assert!(layer < self.header.n_layers && head < self.header.n_heads);
        let len = self.header.map_len();
        let start = (layer as usize * self.header.n_heads as usize + head as usize) * len;
        &self.weights[start..start + len]
    }

    pub fn graph(&self, layer: u32, head: u32) -> Result<DistanceGraph> {
        Ok(DistanceGraph::from_attention(
            self.map(layer, head),
            self.header.n_tokens as usize,
            self.header.prompt_len as usize,
        )?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.weights.len());
        out.extend_from_slice(&self.header.to_bytes());
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    /// Parses a whole container. Weights within [`CLAMP_TOLERANCE`] of
    /// `[0, 1]` are clamped.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ContainerError> {
        if bytes.len() < HEADER_LEN {
            return Err(ContainerError::Truncated {
                expected: HEADER_LEN as u64,
                actual: bytes.len() as u64,
            });
        }
        let header = ContainerHeader::parse(bytes[..HEADER_LEN].try_into().unwrap())?;
        let expected = HEADER_LEN as u64 + 4 * header.payload_len() as u64;
        let actual = bytes.len() as u64;
        if actual < expected {
            return Err(ContainerError::Truncated { expected, actual });
        }
        if actual > expected {
            return Err(ContainerError::TrailingBytes(actual - expected));
        }
        let weights = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .enumerate()
            .map(|(index, chunk)| {
                clamp_weight(index, f32::from_le_bytes(chunk.try_into().unwrap()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { header, weights })
    }
}

fn clamp_weight(index: usize, value: f32) -> Result<f32, ContainerError> {
    if !value.is_finite() {
        return Err(ContainerError::NonFiniteWeight { index });
    }
    let v = f64::from(value);
    if !(-CLAMP_TOLERANCE..=1.0 + CLAMP_TOLERANCE).contains(&v) {
        return Err(ContainerError::WeightOutOfRange { index, value });
    }
    Ok(value.clamp(0.0, 1.0))
}

pub fn write_container<W: Write>(c: &AttentionContainer, mut out: W) -> std::io::Result<()> {
    out.write_all(&c.to_bytes())?;
    out.flush()
}

pub fn read_container<R: Read>(mut source: R) -> Result<AttentionContainer> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    Ok(AttentionContainer::from_bytes(&bytes)?)
}

/// Writes atomically: a temp file in the same directory, then a rename.
pub fn write_container_file(c: &AttentionContainer, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, &c.to_bytes())
}

pub fn read_container_file(path: &Path) -> Result<AttentionContainer> {
    let bytes = std::fs::read(path).at(path)?;
    AttentionContainer::from_bytes(&bytes).map_err(|source| Error::ContainerFile {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads only the 24-byte header.
pub fn read_header_file(path: &Path) -> Result<ContainerHeader> {
    let mut file = std::fs::File::open(path).at(path)?;
    let mut buf = [0u8; HEADER_LEN];
    file.read_exact(&mut buf).at(path)?;
    ContainerHeader::parse(&buf).map_err(|source| Error::ContainerFile {
        path: path.to_path_buf(),
        source,
    })
}
