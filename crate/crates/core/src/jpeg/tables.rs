//! Zig-zag ordering, the reference quantization tables with their quality
//! scaling, and the typical Huffman tables used by the encoder.

use super::QuantTable;
use crate::error::{invalid, Result};

/// `ZIGZAG_TO_NATURAL[k]` is the row-major index of the k-th coefficient in zig-zag order.
pub const ZIGZAG_TO_NATURAL: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6, 7, 14, 21,
    28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54,
    47, 55, 62, 63,
];

/// Inverse of [`ZIGZAG_TO_NATURAL`].
pub const NATURAL_TO_ZIGZAG: [usize; 64] = {
    let mut out = [0usize; 64];
    let mut k = 0;
    while k < 64 {
        out[ZIGZAG_TO_NATURAL[k]] = k;
        k += 1;
    }
    out
};

/// Row-major index of the `n`-th AC frequency in zig-zag order (`n` starts at 1).
///
/// Detectors that analyse "the first N AC coefficients" iterate `n = 1..=N`.
pub fn ac_mode_index(n: usize) -> usize {
    assert!((1..64).contains(&n), "AC mode {n} out of range");
    ZIGZAG_TO_NATURAL[n]
}

/// Base luminance table (natural order).
pub const BASE_LUMINANCE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, 12, 12, 14, 19, 26, 58, 60, 55, 14, 13, 16, 24, 40, 57, 69, 56, 14, 17, 22, 29, 51,
    87, 80, 62, 18, 22, 37, 56, 68, 109, 103, 77, 24, 35, 55, 64, 81, 104, 113, 92, 49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Base chrominance table (natural order).
pub const BASE_CHROMINANCE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99, 24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99,
];

/// A JPEG quality factor in `1..=100`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct QualityFactor(u8);

impl QualityFactor {
    pub fn new(value: u8) -> Result<Self> {
        if (1..=100).contains(&value) {
            Ok(Self(value))
        } else {
            Err(invalid(format!("quality factor {value} outside 1..=100")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for QualityFactor {
    type Error = crate::Error;
    fn try_from(value: u8) -> Result<Self> {
        Self::new(value)
    }
}

impl From<QualityFactor> for u8 {
    fn from(q: QualityFactor) -> u8 {
        q.0
    }
}

impl std::fmt::Display for QualityFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

fn scale_table(base: &[u16; 64], q: QualityFactor) -> QuantTable {
    let q = i64::from(q.get());
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut zz = [0u16; 64];
    for (k, slot) in zz.iter_mut().enumerate() {
        let b = i64::from(base[ZIGZAG_TO_NATURAL[k]]);
        // round(b * scale / 100) with halves rounded up
        let v = (b * scale + 50) / 100;
        *slot = v.clamp(1, 255) as u16;
    }
    QuantTable::from_zigzag(zz).expect("scaled entries are within 1..=255")
}

/// Luminance and chrominance tables for a quality factor.
pub fn quality_to_tables(q: QualityFactor) -> (QuantTable, QuantTable) {
    (scale_table(&BASE_LUMINANCE, q), scale_table(&BASE_CHROMINANCE, q))
}

/// Quality factor whose standard luminance table is nearest to `t` in L1
/// distance; ties go to the higher quality.
pub fn estimate_quality(t: &QuantTable) -> QualityFactor {
    (1..=100u8)
        .map(QualityFactor)
        .min_by_key(|&q| {
            let lum = scale_table(&BASE_LUMINANCE, q);
            let d: u32 = (0..64).map(|n| u32::from(lum.step(n).abs_diff(t.step(n)))).sum();
            (d, std::cmp::Reverse(q.0))
        })
        .expect("nonempty range")
}

/// Huffman table in the DHT layout: code counts per length and symbols in code order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HuffmanSpec {
    pub counts: [u8; 16],
    pub symbols: Vec<u8>,
}

pub(crate) fn std_dc_luminance() -> HuffmanSpec {
    HuffmanSpec { counts: [0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0], symbols: (0..12).collect() }
}

pub(crate) fn std_dc_chrominance() -> HuffmanSpec {
    HuffmanSpec { counts: [0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0], symbols: (0..12).collect() }
}

pub(crate) fn std_ac_luminance() -> HuffmanSpec {
    HuffmanSpec {
        counts: [0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7d],
        symbols: vec![
            0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07, 0x22, 0x71,
            0x14, 0x32, 0x81, 0x91, 0xa1, 0x08, 0x23, 0x42, 0xb1, 0xc1, 0x15, 0x52, 0xd1, 0xf0, 0x24, 0x33, 0x62, 0x72,
            0x82, 0x09, 0x0a, 0x16, 0x17, 0x18, 0x19, 0x1a, 0x25, 0x26, 0x27, 0x28, 0x29, 0x2a, 0x34, 0x35, 0x36, 0x37,
            0x38, 0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59,
            0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a, 0x83,
            0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3,
            0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3,
            0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe1, 0xe2,
            0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf1, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa,
        ],
    }
}

pub(crate) fn std_ac_chrominance() -> HuffmanSpec {
    HuffmanSpec {
        counts: [0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77],
        symbols: vec![
            0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21, 0x31, 0x06, 0x12, 0x41, 0x51, 0x07, 0x61, 0x71, 0x13, 0x22,
            0x32, 0x81, 0x08, 0x14, 0x42, 0x91, 0xa1, 0xb1, 0xc1, 0x09, 0x23, 0x33, 0x52, 0xf0, 0x15, 0x62, 0x72, 0xd1,
            0x0a, 0x16, 0x24, 0x34, 0xe1, 0x25, 0xf1, 0x17, 0x18, 0x19, 0x1a, 0x26, 0x27, 0x28, 0x29, 0x2a, 0x35, 0x36,
            0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58,
            0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a,
            0x82, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a,
            0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba,
            0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda,
            0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa,
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: u8) -> QualityFactor {
        QualityFactor::new(v).unwrap()
    }

    #[test]
    fn zigzag_is_a_permutation() {
        let mut seen = [false; 64];
        for &n in &ZIGZAG_TO_NATURAL {
            assert!(!seen[n]);
            seen[n] = true;
        }
        for k in 0..64 {
            assert_eq!(NATURAL_TO_ZIGZAG[ZIGZAG_TO_NATURAL[k]], k);
        }
        assert_eq!(ac_mode_index(1), 1);
        assert_eq!(ac_mode_index(2), 8);
        assert_eq!(ac_mode_index(3), 16);
    }

    #[test]
    fn quality_50_is_the_base_table() {
        let (lum, chrom) = quality_to_tables(q(50));
        for n in 0..64 {
            assert_eq!(lum.step(n), BASE_LUMINANCE[n]);
            assert_eq!(chrom.step(n), BASE_CHROMINANCE[n]);
        }
    }

    #[test]
    fn quality_100_is_all_ones() {
        let (lum, chrom) = quality_to_tables(q(100));
        assert!(lum.zigzag().iter().all(|&v| v == 1));
        assert!(chrom.zigzag().iter().all(|&v| v == 1));
    }

    #[test]
    fn quality_80_dc_step() {
        // 16 * 40 / 100 = 6.4
        assert_eq!(quality_to_tables(q(80)).0.step(0), 6);
    }

    #[test]
    fn tables_are_monotone_in_quality() {
        for a in 1..100u8 {
            let (la, ca) = quality_to_tables(q(a));
            let (lb, cb) = quality_to_tables(q(a + 1));
            for n in 0..64 {
                assert!(lb.step(n) <= la.step(n));
                assert!(cb.step(n) <= ca.step(n));
            }
        }
    }

    #[test]
    fn standard_tables_give_back_their_quality() {
        for v in 1..=100u8 {
            let est = estimate_quality(&quality_to_tables(q(v)).0).get();
            // a few neighbouring qualities share a table; the estimate must
            // at least reproduce it
            assert_eq!(quality_to_tables(q(est)).0, quality_to_tables(q(v)).0, "{v} -> {est}");
        }
        assert_eq!(estimate_quality(&quality_to_tables(q(95)).0).get(), 95);
    }

    #[test]
    fn out_of_range_quality_is_rejected() {
        assert!(QualityFactor::new(0).is_err());
        assert!(QualityFactor::new(101).is_err());
        assert!(serde_json::from_str::<QualityFactor>("0").is_err());
        assert_eq!(serde_json::from_str::<QualityFactor>("87").unwrap().get(), 87);
    }

    #[test]
    fn huffman_specs_are_consistent() {
        for spec in [std_dc_luminance(), std_dc_chrominance(), std_ac_luminance(), std_ac_chrominance()] {
            let total: usize = spec.counts.iter().map(|&c| c as usize).sum();
            assert_eq!(total, spec.symbols.len());
        }
    }
}
