use crate::error::{Error, Result};

/// Reads entropy-coded bits, removing 0xFF00 stuffing.
pub(crate) struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    acc: u32,
    n_bits: u32,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8], pos: usize) -> Self {
        Self { data, pos, acc: 0, n_bits: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    fn truncated(&self, what: &str) -> Error {
        Error::Parse { offset: self.pos, message: what.to_string() }
    }

    fn fill_byte(&mut self) -> Result<()> {
        let Some(&byte) = self.data.get(self.pos) else {
            return Err(self.truncated("entropy-coded segment is truncated"));
        };
        if byte == 0xFF {
            match self.data.get(self.pos + 1) {
                Some(0x00) => self.pos += 2,
                Some(_) => return Err(self.truncated("marker inside entropy-coded segment")),
                None => return Err(self.truncated("entropy-coded segment is truncated")),
            }
        } else {
            self.pos += 1;
        }
        self.acc = (self.acc << 8) | u32::from(byte);
        self.n_bits += 8;
        Ok(())
    }

    pub fn bit(&mut self) -> Result<u32> {
        if self.n_bits == 0 {
            self.fill_byte()?;
        }
        self.n_bits -= 1;
        Ok((self.acc >> self.n_bits) & 1)
    }

    pub fn bits(&mut self, n: u32) -> Result<u32> {
        debug_assert!(n <= 16);
        while self.n_bits < n {
            self.fill_byte()?;
        }
        self.n_bits -= n;
        Ok((self.acc >> self.n_bits) & ((1u32 << n) - 1))
    }

    /// Drops buffered bits and consumes an RSTn marker.
    pub fn restart(&mut self, expected: u8) -> Result<()> {
        self.acc = 0;
        self.n_bits = 0;
        match (self.data.get(self.pos), self.data.get(self.pos + 1)) {
            (Some(0xFF), Some(&m)) if m == 0xD0 + expected => {
                self.pos += 2;
                Ok(())
            }
            _ => Err(self.truncated("expected restart marker")),
        }
    }
}

/// Accumulates entropy-coded bits, stuffing a zero byte after every 0xFF.
#[derive(Default)]
pub(crate) struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    n_bits: u32,
}

impl BitWriter {
    pub fn put(&mut self, value: u32, n: u32) {
        debug_assert!(n <= 16);
        if n == 0 {
            return;
        }
        self.acc = (self.acc << n) | (value & ((1u32 << n) - 1));
        self.n_bits += n;
        while self.n_bits >= 8 {
            let byte = (self.acc >> (self.n_bits - 8)) as u8;
            self.out.push(byte);
            if byte == 0xFF {
                self.out.push(0x00);
            }
            self.n_bits -= 8;
        }
        self.acc &= (1u32 << self.n_bits) - 1;
    }

    /// Pads the last partial byte with one bits.
    pub fn flush(&mut self) {
        if self.n_bits > 0 {
            let pad = 8 - self.n_bits;
            self.put((1 << pad) - 1, pad);
        }
    }

    pub fn into_bytes(mut self) -> Vec<u8> {
        self.flush();
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stuffing_round_trip() {
        let mut w = BitWriter::default();
        w.put(0xFF, 8);
        w.put(0b101, 3);
        w.put(0x1234, 16);
        let bytes = w.into_bytes();
        assert_eq!(&bytes[..2], &[0xFF, 0x00]);
        let mut r = BitReader::new(&bytes, 0);
        assert_eq!(r.bits(8).unwrap(), 0xFF);
        assert_eq!(r.bits(3).unwrap(), 0b101);
        assert_eq!(r.bits(16).unwrap(), 0x1234);
    }

    #[test]
    fn truncation_reports_offset() {
        let mut r = BitReader::new(&[0xAB], 0);
        r.bits(8).unwrap();
        match r.bit() {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
