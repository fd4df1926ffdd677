use super::bits::{BitReader, BitWriter};
use super::tables::HuffmanSpec;
use crate::error::{Error, Result};

/// Canonical Huffman decoder built from a DHT specification.
#[derive(Clone, Debug)]
pub(crate) struct Decoder {
    max_code: [i32; 17],
    val_offset: [i32; 17],
    symbols: Vec<u8>,
}

impl Decoder {
    pub fn new(spec: &HuffmanSpec) -> Result<Self> {
        let mut max_code = [-1i32; 17];
        let mut val_offset = [0i32; 17];
        let mut code = 0i32;
        let mut k = 0i32;
        for len in 1..=16 {
            let count = i32::from(spec.counts[len - 1]);
            if count > 0 {
                val_offset[len] = k - code;
                code += count;
                k += count;
                max_code[len] = code - 1;
            }
            if code > (1 << len) {
                return Err(Error::Malformed("over-subscribed Huffman table".into()));
            }
            code <<= 1;
        }
        if k as usize != spec.symbols.len() {
            return Err(Error::Malformed("Huffman symbol count mismatch".into()));
        }
        Ok(Self { max_code, val_offset, symbols: spec.symbols.clone() })
    }

    pub fn decode(&self, r: &mut BitReader<'_>) -> Result<u8> {
        let mut code = 0i32;
        for len in 1..=16 {
            code = (code << 1) | r.bit()? as i32;
            if code <= self.max_code[len] {
                return Ok(self.symbols[(code + self.val_offset[len]) as usize]);
            }
        }
        Err(Error::Parse { offset: r.position(), message: "invalid Huffman code".into() })
    }
}

/// Symbol to (code, length) lookup for encoding.
#[derive(Clone, Debug)]
pub(crate) struct Encoder {
    codes: [(u16, u8); 256],
}

impl Encoder {
    pub fn new(spec: &HuffmanSpec) -> Self {
        let mut codes = [(0u16, 0u8); 256];
        let mut code = 0u16;
        let mut k = 0;
        for len in 1..=16u8 {
            for _ in 0..spec.counts[len as usize - 1] {
                codes[spec.symbols[k] as usize] = (code, len);
                code += 1;
                k += 1;
            }
            code <<= 1;
        }
        Self { codes }
    }

    pub fn put(&self, w: &mut BitWriter, symbol: u8) {
        let (code, len) = self.codes[symbol as usize];
        debug_assert!(len > 0, "symbol {symbol:#x} has no code");
        w.put(u32::from(code), u32::from(len));
    }
}

/// Magnitude category of a coefficient value.
pub(crate) fn category(v: i32) -> u32 {
    32 - v.unsigned_abs().leading_zeros()
}

/// Appended bits for `v` in category `cat` (ones' complement for negatives).
pub(crate) fn magnitude_bits(v: i32, cat: u32) -> u32 {
    if v >= 0 {
        v as u32
    } else {
        ((v - 1) as u32) & ((1u32 << cat) - 1)
    }
}

/// Inverse of [`magnitude_bits`].
pub(crate) fn extend(bits: u32, cat: u32) -> i32 {
    if cat == 0 {
        return 0;
    }
    if bits < (1 << (cat - 1)) {
        bits as i32 - (1 << cat) + 1
    } else {
        bits as i32
    }
}
