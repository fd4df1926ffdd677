//! Baseline JPEG model: quantized DCT coefficients, quantization tables and
//! pixel conversion.
//!
//! [`parse_jpeg`] reads a baseline sequential Huffman stream into a
//! [`QuantizedJpeg`] without dequantizing anything, [`emit`] writes the
//! coefficients back bit-exactly, and [`encode`] compresses a [`PixelImage`]
//! at a quality factor with the blocking grid anchored at the top-left
//! pixel. Coefficients are kept in natural (row-major) order; use
//! [`ac_mode_index`] to walk AC frequencies in zig-zag order.

mod bits;
pub mod dct;
mod decode;
mod dump;
mod encode;
mod huffman;
pub(crate) mod pixels;
pub mod tables;

pub use decode::parse_jpeg;
pub use dump::{dump_coefficients, parse_dump, DumpRow};
pub use encode::{emit, encode, encode_with, quantize, with_comment, EncodeOptions};
pub use pixels::{decode_to_pixels, PixelImage, PixelLayout};
pub use tables::{
    ac_mode_index, estimate_quality, quality_to_tables, QualityFactor, NATURAL_TO_ZIGZAG, ZIGZAG_TO_NATURAL,
};

use crate::error::{invalid, Result};

/// 64 quantization steps, stored in zig-zag order as in a DQT segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QuantTable {
    zigzag: [u16; 64],
}

impl QuantTable {
    pub fn from_zigzag(zigzag: [u16; 64]) -> Result<Self> {
        if let Some(bad) = zigzag.iter().find(|&&v| v == 0 || v > 255) {
            return Err(invalid(format!("quantization step {bad} outside 1..=255")));
        }
        Ok(Self { zigzag })
    }

    pub fn from_natural(natural: [u16; 64]) -> Result<Self> {
        let mut zz = [0u16; 64];
        for (k, slot) in zz.iter_mut().enumerate() {
            *slot = natural[ZIGZAG_TO_NATURAL[k]];
        }
        Self::from_zigzag(zz)
    }

    pub fn zigzag(&self) -> &[u16; 64] {
        &self.zigzag
    }

    /// Step for the coefficient at row-major index `natural`.
    pub fn step(&self, natural: usize) -> u16 {
        self.zigzag[NATURAL_TO_ZIGZAG[natural]]
    }

    pub fn natural(&self) -> [u16; 64] {
        std::array::from_fn(|n| self.step(n))
    }
}

/// Quantized coefficients of one 8x8 block in natural order; index 0 is DC.
pub type Block = [i16; 64];

/// One colour component: sampling factors, its table and its block grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub id: u8,
    pub h_samp: u8,
    pub v_samp: u8,
    pub table: QuantTable,
    blocks_wide: usize,
    blocks_tall: usize,
    blocks: Vec<Block>,
}

impl Component {
    pub fn new(id: u8, h_samp: u8, v_samp: u8, table: QuantTable, blocks_wide: usize, blocks_tall: usize) -> Self {
        Self { id, h_samp, v_samp, table, blocks_wide, blocks_tall, blocks: vec![[0; 64]; blocks_wide * blocks_tall] }
    }

    pub fn blocks_wide(&self) -> usize {
        self.blocks_wide
    }

    pub fn blocks_tall(&self) -> usize {
        self.blocks_tall
    }

    pub fn block(&self, bx: usize, by: usize) -> &Block {
        &self.blocks[by * self.blocks_wide + bx]
    }

    pub fn block_mut(&mut self, bx: usize, by: usize) -> &mut Block {
        &mut self.blocks[by * self.blocks_wide + bx]
    }

    /// All blocks in raster order.
    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }
}

/// Chroma layout used when encoding colour images.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChromaSubsampling {
    #[default]
    #[serde(rename = "444")]
    S444,
    #[serde(rename = "420")]
    S420,
}

/// A parsed baseline JPEG: geometry plus quantized coefficients per component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizedJpeg {
    width: u32,
    height: u32,
    components: Vec<Component>,
}

impl QuantizedJpeg {
    /// Builds an image with all-zero coefficients. Components are given as
    /// `(id, h_samp, v_samp, table)`.
    pub fn new(width: u32, height: u32, components: &[(u8, u8, u8, QuantTable)]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("zero-sized image"));
        }
        if components.is_empty() || components.len() > 4 {
            return Err(invalid("a JPEG has 1 to 4 components"));
        }
        let h_max = components.iter().map(|c| c.1).max().unwrap_or(1);
        let v_max = components.iter().map(|c| c.2).max().unwrap_or(1);
        let mut out = Vec::with_capacity(components.len());
        for &(id, h, v, table) in components {
            if !(1..=4).contains(&h) || !(1..=4).contains(&v) {
                return Err(invalid("sampling factors must be in 1..=4"));
            }
            let (bw, bh) = component_block_dims(width, height, h, v, h_max, v_max);
            out.push(Component::new(id, h, v, table, bw, bh));
        }
        Ok(Self { width, height, components: out })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [Component] {
        &mut self.components
    }

    /// The luminance (first) component; detectors only read this one.
    pub fn luma(&self) -> &Component {
        &self.components[0]
    }

    /// Block grid of the full-resolution image, `(ceil(W/8), ceil(H/8))`.
    pub fn block_grid(&self) -> (usize, usize) {
        (self.width.div_ceil(8) as usize, self.height.div_ceil(8) as usize)
    }

    pub(crate) fn max_sampling(&self) -> (u8, u8) {
        let h = self.components.iter().map(|c| c.h_samp).max().unwrap_or(1);
        let v = self.components.iter().map(|c| c.v_samp).max().unwrap_or(1);
        (h, v)
    }
}

pub(crate) fn component_block_dims(width: u32, height: u32, h: u8, v: u8, h_max: u8, v_max: u8) -> (usize, usize) {
    let cw = (width as usize * h as usize).div_ceil(h_max as usize);
    let ch = (height as usize * v as usize).div_ceil(v_max as usize);
    (cw.div_ceil(8), ch.div_ceil(8))
}
