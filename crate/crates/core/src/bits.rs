//! Bit sequences in on-air transmission order.

use std::fmt;
use std::ops::{BitXor, Index};

/// Ordered bit sequence. Index 0 is the first bit on air.
///
/// Multi-bit fields are pushed LSB first, matching the link-layer
/// convention; the CRC is the one field sent MSB first (see
/// [`BitVector::push_word_msb_first`]).
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitVector(Vec<bool>);

impl BitVector {
    pub fn new() -> Self {
        BitVector(Vec::new())
    }

    pub fn with_capacity(n: usize) -> Self {
        BitVector(Vec::with_capacity(n))
    }

    pub fn zeros(n: usize) -> Self {
        BitVector(vec![false; n])
    }

    /// `width` low bits of `word`, least significant bit first.
    pub fn from_word_lsb_first(word: u64, width: usize) -> Self {
        let mut v = Self::with_capacity(width);
        v.push_word_lsb_first(word, width);
        v
    }

    /// Bytes in order, each byte LSB first.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut v = Self::with_capacity(bytes.len() * 8);
        for &b in bytes {
            v.push_word_lsb_first(u64::from(b), 8);
        }
        v
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn push_word_lsb_first(&mut self, word: u64, width: usize) {
        self.0.extend((0..width).map(|i| (word >> i) & 1 == 1));
    }

    pub fn push_word_msb_first(&mut self, word: u64, width: usize) {
        self.0
            .extend((0..width).rev().map(|i| (word >> i) & 1 == 1));
    }

    pub fn extend_from(&mut self, other: &BitVector) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn slice(&self, start: usize, end: usize) -> BitVector {
        BitVector(self.0[start..end].to_vec())
    }

    /// Reads `width` bits starting at `start` as an LSB-first word.
    pub fn word_lsb_first(&self, start: usize, width: usize) -> u64 {
        self.0[start..start + width]
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i))
    }

    pub fn word_msb_first(&self, start: usize, width: usize) -> u64 {
        self.0[start..start + width]
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    /// Packs bits into bytes, bit `i` landing in bit `i % 8` of byte `i / 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0
            .chunks(8)
            .map(|c| {
                c.iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << i))
            })
            .collect()
    }

    /// Hex dump for fixtures: bytes in transmission order, each printed MSB-left.
    pub fn to_hex(&self) -> String {
        self.to_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Inverse of [`to_hex`](Self::to_hex) for a given bit length.
    pub fn from_hex(hex: &str, nbits: usize) -> Option<Self> {
        if hex.len() % 2 != 0 || hex.len() * 4 < nbits {
            return None;
        }
        let bytes = (0..hex.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&hex[i..i + 2], 16).ok())
            .collect::<Option<Vec<u8>>>()?;
        let mut v = Self::from_bytes(&bytes);
        v.0.truncate(nbits);
        Some(v)
    }

    /// Antipodal symbols: 0 -> -1.0, 1 -> +1.0.
    pub fn to_nrz(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn hamming_distance(&self, other: &BitVector) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
            + self.len().abs_diff(other.len())
    }
}

impl From<Vec<bool>> for BitVector {
    fn from(v: Vec<bool>) -> Self {
        BitVector(v)
    }
}

impl FromIterator<bool> for BitVector {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        BitVector(iter.into_iter().collect())
    }
}

impl Index<usize> for BitVector {
    type Output = bool;
    fn index(&self, i: usize) -> &bool {
        &self.0[i]
    }
}

impl BitXor for &BitVector {
    type Output = BitVector;

    /// Element-wise XOR; panics on length mismatch.
    fn bitxor(self, rhs: &BitVector) -> BitVector {
        assert_eq!(self.len(), rhs.len(), "xor of unequal-length bit vectors");
        self.0.iter().zip(&rhs.0).map(|(a, b)| a ^ b).collect()
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector[{}](", self.len())?;
        for &b in self.0.iter().take(64) {
            f.write_str(if b { "1" } else { "0" })?;
        }
        if self.len() > 64 {
            f.write_str("…")?;
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn access_address_hex_is_lsb_first_bytes() {
        let aa = BitVector::from_word_lsb_first(0x8E89_BED6, 32);
        assert_eq!(aa.to_hex(), "d6be898e");
        assert_eq!(aa.word_lsb_first(0, 32), 0x8E89_BED6);
        assert!(!aa[0]); // 0xD6 = 1101_0110, LSB is 0
    }

    #[test]
    fn msb_first_round_trip() {
        let mut v = BitVector::new();
        v.push_word_msb_first(0xABCDEF, 24);
        assert_eq!(v.word_msb_first(0, 24), 0xABCDEF);
        assert!(v[0]);
    }

    #[test]
    fn hex_round_trip_partial_byte() {
        let v: BitVector = [
            true, false, true, true, false, false, true, true, true, false,
        ]
        .into_iter()
        .collect();
        let h = v.to_hex();
        assert_eq!(BitVector::from_hex(&h, v.len()).unwrap(), v);
    }
}
