use super::dct;
use super::QuantizedJpeg;
use crate::error::{invalid, Result};

/// Sample layout of a [`PixelImage`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PixelLayout {
    Gray,
    Rgb,
}

impl PixelLayout {
    pub fn channels(self) -> usize {
        match self {
            PixelLayout::Gray => 1,
            PixelLayout::Rgb => 3,
        }
    }
}

/// An 8-bit raster image, interleaved when RGB.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelImage {
    width: u32,
    height: u32,
    layout: PixelLayout,
    data: Vec<u8>,
}

impl PixelImage {
    pub fn new(width: u32, height: u32, layout: PixelLayout, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("zero-sized image"));
        }
        let expected = width as usize * height as usize * layout.channels();
        if data.len() != expected {
            return Err(invalid(format!("expected {expected} samples, got {}", data.len())));
        }
        Ok(Self { width, height, layout, data })
    }

    pub fn filled(width: u32, height: u32, layout: PixelLayout, value: u8) -> Result<Self> {
        Self::new(width, height, layout, vec![value; width as usize * height as usize * layout.channels()])
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, PixelLayout::Gray, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn layout(&self) -> PixelLayout {
        self.layout
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    /// Samples of pixel `(x, y)`, one per channel.
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.layout.channels();
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.data[i..i + c]
    }

    pub fn pixel_mut(&mut self, x: u32, y: u32) -> &mut [u8] {
        let c = self.layout.channels();
        let i = (y as usize * self.width as usize + x as usize) * c;
        &mut self.data[i..i + c]
    }

    /// Luminance plane (JFIF weights for RGB).
    pub fn luma(&self) -> Vec<u8> {
        match self.layout {
            PixelLayout::Gray => self.data.clone(),
            PixelLayout::Rgb => self.data.chunks_exact(3).map(|p| rgb_to_ycbcr(p[0], p[1], p[2]).0).collect(),
        }
    }

    pub fn to_gray(&self) -> PixelImage {
        PixelImage { width: self.width, height: self.height, layout: PixelLayout::Gray, data: self.luma() }
    }

    /// Copies a rectangle starting at `(x0, y0)`.
    pub fn crop(&self, x0: u32, y0: u32, width: u32, height: u32) -> Result<PixelImage> {
        if width == 0 || height == 0 || x0 + width > self.width || y0 + height > self.height {
            return Err(invalid("crop rectangle outside image"));
        }
        let c = self.layout.channels();
        let mut data = Vec::with_capacity(width as usize * height as usize * c);
        for y in y0..y0 + height {
            let start = (y as usize * self.width as usize + x0 as usize) * c;
            data.extend_from_slice(&self.data[start..start + width as usize * c]);
        }
        PixelImage::new(width, height, self.layout, data)
    }
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub(crate) fn rgb_to_ycbcr(r: u8, g: u8, b: u8) -> (u8, u8, u8) {
    let (r, g, b) = (f64::from(r), f64::from(g), f64::from(b));
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = -0.168_735_892 * r - 0.331_264_108 * g + 0.5 * b + 128.0;
    let cr = 0.5 * r - 0.418_687_589 * g - 0.081_312_411 * b + 128.0;
    (clamp_u8(y), clamp_u8(cb), clamp_u8(cr))
}

fn ycbcr_to_rgb(y: u8, cb: u8, cr: u8) -> [u8; 3] {
    let (y, cb, cr) = (f64::from(y), f64::from(cb) - 128.0, f64::from(cr) - 128.0);
    [clamp_u8(y + 1.402 * cr), clamp_u8(y - 0.344_136_286 * cb - 0.714_136_286 * cr), clamp_u8(y + 1.772 * cb)]
}

/// Reconstructs one component as an 8-bit plane covering its whole block grid.
pub(crate) fn component_plane(j: &QuantizedJpeg, index: usize) -> (usize, usize, Vec<u8>) {
    let comp = &j.components()[index];
    let steps = comp.table.natural();
    let (bw, bh) = (comp.blocks_wide(), comp.blocks_tall());
    let stride = bw * 8;
    let mut plane = vec![0u8; stride * bh * 8];
    for by in 0..bh {
        for bx in 0..bw {
            let block = comp.block(bx, by);
            let deq: [f64; 64] = std::array::from_fn(|n| f64::from(block[n]) * f64::from(steps[n]));
            let samples = dct::inverse(&deq);
            for y in 0..8 {
                let row = (by * 8 + y) * stride + bx * 8;
                for x in 0..8 {
                    plane[row + x] = clamp_u8(samples[y * 8 + x] + 128.0);
                }
            }
        }
    }
    (stride, bh * 8, plane)
}

/// Dequantizes, inverse transforms and colour converts.
///
/// One-component images decode to [`PixelLayout::Gray`], three-component
/// images to RGB with chroma upsampled by replication. Other component
/// counts decode their first component as gray.
pub fn decode_to_pixels(j: &QuantizedJpeg) -> PixelImage {
    let (w, h) = (j.width() as usize, j.height() as usize);
    let (luma_stride, _, luma) = component_plane(j, 0);
    if j.components().len() != 3 {
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            data.extend_from_slice(&luma[y * luma_stride..y * luma_stride + w]);
        }
        return PixelImage { width: j.width(), height: j.height(), layout: PixelLayout::Gray, data };
    }
    let (h_max, v_max) = j.max_sampling();
    let planes: Vec<_> = (0..3).map(|i| component_plane(j, i)).collect();
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let mut s = [0u8; 3];
            for (c, (stride, _, plane)) in planes.iter().enumerate() {
                let comp = &j.components()[c];
                let sx = x * comp.h_samp as usize / h_max as usize;
                let sy = y * comp.v_samp as usize / v_max as usize;
                s[c] = plane[sy * stride + sx];
            }
            data.extend_from_slice(&ycbcr_to_rgb(s[0], s[1], s[2]));
        }
    }
    PixelImage { width: j.width(), height: j.height(), layout: PixelLayout::Rgb, data }
}
