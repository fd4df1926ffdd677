//! Reading source bitmaps and masks from common raster formats.

use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::jpeg::{PixelImage, PixelLayout};
use crate::synth::PixelMask;

fn open(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::Io(io),
        other => Error::UnsupportedFormat(format!("{}: {other}", path.display())),
    })
}

/// Loads a bitmap; single-channel files become gray, everything else RGB.
pub fn read_pixels(path: &Path) -> Result<PixelImage> {
    let img = open(path)?;
    let (w, h) = (img.width(), img.height());
    if img.color().channel_count() <= 2 {
        PixelImage::new(w, h, PixelLayout::Gray, img.into_luma8().into_raw())
    } else {
        PixelImage::new(w, h, PixelLayout::Rgb, img.into_rgb8().into_raw())
    }
}

/// Loads a mask image; any non-zero luminance marks a tampered pixel.
pub fn read_mask(path: &Path) -> Result<PixelMask> {
    let img = open(path)?.into_luma8();
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return Err(invalid("empty mask image"));
    }
    PixelMask::new(w, h, img.into_raw().into_iter().map(|v| v != 0).collect())
}

/// Writes a bitmap as binary PGM or PPM.
pub fn write_pnm(path: &Path, img: &PixelImage) -> Result<()> {
    let magic = match img.layout() {
        PixelLayout::Gray => "P5",
        PixelLayout::Rgb => "P6",
    };
    let mut bytes = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    bytes.extend_from_slice(img.data());
    crate::util::atomic_write(path, &bytes)
}

/// Writes a pixel mask as an 8-bit PGM (0 or 255).
pub fn write_mask(path: &Path, mask: &PixelMask) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            bytes.push(if mask.get(x, y) { 255 } else { 0 });
        }
    }
    crate::util::atomic_write(path, &bytes)
}
