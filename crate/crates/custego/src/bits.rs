//! MSB-first bit writer/reader plus order-0 exp-Golomb codes.

use crate::error::{Error, Result};

#[derive(Default)]
pub struct BitWriter {
    buf: Vec<u8>,
    cur: u8,
    filled: u8,
    bits: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write_bit(&mut self, bit: bool) {
        self.cur = (self.cur << 1) | bit as u8;
        self.filled += 1;
        self.bits += 1;
        if self.filled == 8 {
            self.buf.push(self.cur);
            self.cur = 0;
            self.filled = 0;
        }
    }

    /// Writes the low `n` bits of `v`, most significant first.
    pub fn write_bits(&mut self, v: u64, n: u32) {
        for i in (0..n).rev() {
            self.write_bit((v >> i) & 1 == 1);
        }
    }

    /// Order-0 exp-Golomb for unsigned values.
    pub fn write_ue(&mut self, v: u64) {
        let width = 64 - (v + 1).leading_zeros();
        for _ in 0..width - 1 {
            self.write_bit(false);
        }
        self.write_bits(v + 1, width);
    }

    /// Signed exp-Golomb: 0, 1, -1, 2, -2, ...
    pub fn write_se(&mut self, v: i64) {
        self.write_ue(se_to_ue(v));
    }

    /// Pads with zero bits to the next byte boundary.
    pub fn align(&mut self) {
        while self.filled != 0 {
            self.write_bit(false);
        }
    }

    /// Total bits written so far (before alignment padding counts too).
    pub fn bit_len(&self) -> u64 {
        self.bits
    }

    pub fn into_bytes(mut self) -> Vec<u8> {
        self.align();
        self.buf
    }
}

pub struct BitReader<'a> {
    data: &'a [u8],
    byte: usize,
    bit: u8,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, byte: 0, bit: 0 }
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        let b = self
            .data
            .get(self.byte)
            .ok_or_else(|| Error::format("truncated bitstream"))?;
        let bit = (b >> (7 - self.bit)) & 1 == 1;
        self.bit += 1;
        if self.bit == 8 {
            self.bit = 0;
            self.byte += 1;
        }
        Ok(bit)
    }

    pub fn read_bits(&mut self, n: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn read_ue(&mut self) -> Result<u64> {
        let mut zeros = 0u32;
        while !self.read_bit()? {
            zeros += 1;
            if zeros > 63 {
                return Err(Error::format("exp-Golomb prefix overflow"));
            }
        }
        let rest = self.read_bits(zeros)?;
        Ok((1u64 << zeros) + rest - 1)
    }

    pub fn read_se(&mut self) -> Result<i64> {
        Ok(ue_to_se(self.read_ue()?))
    }

    /// Skips to the next byte boundary.
    pub fn align(&mut self) {
        if self.bit != 0 {
            self.bit = 0;
            self.byte += 1;
        }
    }

    /// Byte offset of the current (aligned) read position.
    pub fn byte_pos(&self) -> usize {
        self.byte + (self.bit != 0) as usize
    }
}

fn se_to_ue(v: i64) -> u64 {
    if v > 0 {
        (2 * v - 1) as u64
    } else {
        (-2 * v) as u64
    }
}

fn ue_to_se(u: u64) -> i64 {
    let k = ((u + 1) / 2) as i64;
    if u % 2 == 1 {
        k
    } else {
        -k
    }
}

/// Bit length of the order-0 exp-Golomb code for `v`.
pub fn ue_len(v: u64) -> u64 {
    let width = 64 - (v + 1).leading_zeros() as u64;
    2 * width - 1
}

pub fn se_len(v: i64) -> u64 {
    ue_len(se_to_ue(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ue_roundtrip() {
        let mut w = BitWriter::new();
        for v in 0..200u64 {
            w.write_ue(v);
        }
        let bytes = w.into_bytes();
        let mut r = BitReader::new(&bytes);
        for v in 0..200u64 {
            assert_eq!(r.read_ue().unwrap(), v);
        }
    }

    #[test]
    fn se_roundtrip_and_len() {
        let mut w = BitWriter::new();
        for v in -100..=100i64 {
            w.write_se(v);
        }
        let bytes = w.into_bytes();
        let mut r = BitReader::new(&bytes);
        for v in -100..=100i64 {
            assert_eq!(r.read_se().unwrap(), v);
        }
        // se_len matches actually written bits
        let mut w = BitWriter::new();
        w.write_se(-17);
        assert_eq!(w.bit_len(), se_len(-17));
    }

    #[test]
    fn zero_codes_one_bit() {
        assert_eq!(ue_len(0), 1);
        assert_eq!(se_len(0), 1);
    }

    #[test]
    fn doubling_magnitude_never_shrinks_code() {
        for v in 1..1000i64 {
            assert!(se_len(2 * v) >= se_len(v));
            assert!(se_len(-2 * v) >= se_len(-v));
        }
    }

    #[test]
    fn truncated_stream_errors() {
        let mut r = BitReader::new(&[]);
        assert!(r.read_bit().is_err());
    }
}
