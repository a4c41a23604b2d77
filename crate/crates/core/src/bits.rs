//! Fixed-length bit strings.
//!
//! Keys, nonces, challenges, and responses are all [`BitString`]s. Bits are
//! indexed `0..len`; the packed byte form is MSB-first (bit 0 is the most
//! significant bit of byte 0), with unused trailing bits zero.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An immutable-length sequence of bits with packed-byte and hex codecs.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    /// Wrap an explicit bit vector.
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// `n` zero bits.
    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    /// `n` independent fair bits from `rng`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Self {
        Self { bits: (0..n).map(|_| rng.gen_bool(0.5)).collect() }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Bit at `index`; panics if out of range (indexing is caller logic).
    pub fn get(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.bits[index] = value;
    }

    pub fn push(&mut self, value: bool) {
        self.bits.push(value);
    }

    pub fn as_bools(&self) -> &[bool] {
        &self.bits
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    /// Bitwise XOR; errors unless lengths match.
    pub fn xor(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch { expected: self.len(), actual: other.len() });
        }
        Ok(Self { bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a ^ b).collect() })
    }

    /// Bitwise complement.
    pub fn complement(&self) -> Self {
        Self { bits: self.bits.iter().map(|b| !b).collect() }
    }

    /// Number of positions where the strings differ; errors unless lengths match.
    pub fn hamming(&self, other: &Self) -> Result<usize> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch { expected: self.len(), actual: other.len() });
        }
        Ok(self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count())
    }

    /// Pack MSB-first into `ceil(len/8)` bytes, trailing bits zero.
    pub fn to_packed_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &bit) in self.bits.iter().enumerate() {
            if bit {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }

    /// Unpack `n_bits` from MSB-first bytes. Errors if `bytes` is not exactly
    /// `ceil(n_bits/8)` long or any unused trailing bit is set.
    pub fn from_packed_bytes(bytes: &[u8], n_bits: usize) -> Result<Self> {
        let expected = n_bits.div_ceil(8);
        if bytes.len() != expected {
            return Err(Error::LengthMismatch { expected, actual: bytes.len() });
        }
        let bits: Vec<bool> =
            (0..n_bits).map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0).collect();
        if n_bits % 8 != 0 {
            let last = *bytes.last().unwrap_or(&0);
            let mask = 0xFFu8 >> (n_bits % 8);
            if last & mask != 0 {
                return Err(Error::WireFormat("nonzero padding bits in packed bit string".into()));
            }
        }
        Ok(Self { bits })
    }

    /// Lowercase hex of the packed bytes.
    pub fn to_hex(&self) -> String {
        hex::encode(self.to_packed_bytes())
    }

    /// Parse hex back into `n_bits` (inverse of [`BitString::to_hex`]).
    pub fn from_hex(s: &str, n_bits: usize) -> Result<Self> {
        let bytes = hex::decode(s)
            .map_err(|e| Error::WireFormat(format!("bad hex bit string: {e}")))?;
        Self::from_packed_bytes(&bytes, n_bits)
    }
}

impl std::fmt::Debug for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitString({} bits: {})", self.len(), self.to_hex())
    }
}
