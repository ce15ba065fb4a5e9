//! MSB-first bit packing and order-0 Exp-Golomb codes.

use crate::error::{Error, Result};

#[derive(Default)]
pub(crate) struct BitWriter {
    bytes: Vec<u8>,
    acc: u8,
    used: u8,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_bit(&mut self, bit: bool) {
        self.acc = (self.acc << 1) | bit as u8;
        self.used += 1;
        if self.used == 8 {
            self.bytes.push(self.acc);
            self.acc = 0;
            self.used = 0;
        }
    }

    pub fn put_bits(&mut self, value: u64, n: u32) {
        for i in (0..n).rev() {
            self.put_bit((value >> i) & 1 == 1);
        }
    }

    pub fn put_ue(&mut self, v: u64) {
        let x = v + 1;
        let len = 64 - x.leading_zeros();
        self.put_bits(0, len - 1);
        self.put_bits(x, len);
    }

    /// Signed values map 0, 1, -1, 2, -2, ... onto 0, 1, 2, 3, 4, ...
    pub fn put_se(&mut self, v: i64) {
        let mapped = if v > 0 { 2 * v as u64 - 1 } else { 2 * v.unsigned_abs() };
        self.put_ue(mapped);
    }

    /// Flushes, padding the last byte with zero bits.
    pub fn finish(mut self) -> Vec<u8> {
        if self.used > 0 {
            self.bytes.push(self.acc << (8 - self.used));
        }
        self.bytes
    }
}

pub(crate) struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    /// Byte offset of `bytes[0]` within the enclosing stream, for errors.
    base: u64,
}

const MAX_PREFIX: u32 = 40;

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], base: u64) -> Self {
        Self { bytes, pos: 0, base }
    }

    pub fn offset(&self) -> u64 {
        self.base + (self.pos / 8) as u64
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::format(self.offset(), message)
    }

    pub fn get_bit(&mut self) -> Result<bool> {
        let byte = *self
            .bytes
            .get(self.pos / 8)
            .ok_or_else(|| self.error("bitstream ends mid-symbol"))?;
        let bit = (byte >> (7 - self.pos % 8)) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn get_bits(&mut self, n: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | self.get_bit()? as u64;
        }
        Ok(v)
    }

    pub fn get_ue(&mut self) -> Result<u64> {
        let mut zeros = 0;
        while !self.get_bit()? {
            zeros += 1;
            if zeros > MAX_PREFIX {
                return Err(self.error("Exp-Golomb prefix too long"));
            }
        }
        Ok(((1u64 << zeros) | self.get_bits(zeros)?) - 1)
    }

    pub fn get_se(&mut self) -> Result<i64> {
        let m = self.get_ue()?;
        Ok(if m % 2 == 1 {
            m.div_ceil(2) as i64
        } else {
            -((m / 2) as i64)
        })
    }

    /// Succeeds only if every remaining bit is zero padding in the final byte.
    pub fn expect_end(&self) -> Result<()> {
        let used_bytes = self.pos.div_ceil(8);
        if used_bytes != self.bytes.len() {
            return Err(Error::format(
                self.base + used_bytes as u64,
                format!("{} trailing bytes", self.bytes.len() - used_bytes),
            ));
        }
        if !self.pos.is_multiple_of(8) {
            let last = self.bytes[used_bytes - 1];
            if last & (0xff >> (self.pos % 8)) != 0 {
                return Err(self.error("nonzero padding bits"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_codewords() {
        let mut w = BitWriter::new();
        // ue(0)=1, ue(1)=010, ue(2)=011, ue(3)=00100
        for v in 0..4 {
            w.put_ue(v);
        }
        assert_eq!(w.finish(), vec![0b1010_0110, 0b0100_0000]);
    }

    #[test]
    fn truncated_prefix_reports_offset() {
        let mut r = BitReader::new(&[0, 0], 16);
        let err = r.get_ue().unwrap_err();
        assert!(matches!(err, Error::Format { offset: 18, .. }), "{err}");
    }

    proptest! {
        #[test]
        fn roundtrip(values in prop::collection::vec(-100_000i64..100_000, 0..64)) {
            let mut w = BitWriter::new();
            for &v in &values {
                w.put_se(v);
                w.put_ue(v.unsigned_abs());
            }
            let bytes = w.finish();
            let mut r = BitReader::new(&bytes, 0);
            for &v in &values {
                prop_assert_eq!(r.get_se().unwrap(), v);
                prop_assert_eq!(r.get_ue().unwrap(), v.unsigned_abs());
            }
            prop_assert!(r.expect_end().is_ok());
        }
    }
}
