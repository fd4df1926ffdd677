//! Procedural test imagery.
//!
//! [`natural_image`] layers multi-octave value noise, a few soft-edged
//! shapes and sensor-like Gaussian noise, which gives DCT coefficient
//! statistics close to those of photographs (heavy-tailed, Laplacian-like
//! AC distributions). Used by tests, the acceptance suite and the CLI's
//! `--synthetic-sources` mode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PixelMask;
use crate::jpeg::{PixelImage, PixelLayout};
use crate::util::{child_seed, gaussian};

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn value_noise(width: usize, height: usize, cell: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gw = width / cell + 2;
    let gh = height / cell + 2;
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        let gy = y / cell;
        let ty = smooth((y % cell) as f64 / cell as f64);
        for x in 0..width {
            let gx = x / cell;
            let tx = smooth((x % cell) as f64 / cell as f64);
            let a = lattice[gy * gw + gx];
            let b = lattice[gy * gw + gx + 1];
            let c = lattice[(gy + 1) * gw + gx];
            let d = lattice[(gy + 1) * gw + gx + 1];
            out.push((a * (1.0 - tx) + b * tx) * (1.0 - ty) + (c * (1.0 - tx) + d * tx) * ty);
        }
    }
    out
}

fn luminance_field(width: usize, height: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let base = rng.gen_range(90.0..160.0);
    let mut field = vec![base; width * height];
    let texture = rng.gen_range(0.6..1.4);
    for (cell, amp) in [(96, 45.0), (48, 28.0), (24, 18.0), (12, 12.0), (6, 8.0), (3, 5.0), (2, 3.0)] {
        let n = value_noise(width, height, cell, rng);
        for (f, v) in field.iter_mut().zip(n) {
            *f += amp * texture * v;
        }
    }
    let n_shapes = rng.gen_range(3..9);
    for _ in 0..n_shapes {
        let cx = rng.gen_range(0.0..width as f64);
        let cy = rng.gen_range(0.0..height as f64);
        let rx = rng.gen_range(8.0..(width as f64 / 3.0).max(9.0));
        let ry = rng.gen_range(8.0..(height as f64 / 3.0).max(9.0));
        let offset = rng.gen_range(-50.0..50.0);
        let edge = rng.gen_range(0.5..3.0);
        let rect = rng.gen_bool(0.5);
        for y in 0..height {
            for x in 0..width {
                let dx = (x as f64 - cx) / rx;
                let dy = (y as f64 - cy) / ry;
                let d = if rect { dx.abs().max(dy.abs()) } else { (dx * dx + dy * dy).sqrt() };
                // signed distance in pixels, roughly
                let s = (1.0 - d) * rx.min(ry) / edge;
                let w = 1.0 / (1.0 + (-s).exp());
                field[y * width + x] += offset * w;
            }
        }
    }
    let sigma = rng.gen_range(1.0..3.0);
    for f in field.iter_mut() {
        *f += sigma * gaussian(rng);
    }
    field
}

/// Grayscale photograph-like image, deterministic in `seed`.
pub fn natural_image(width: u32, height: u32, seed: u64) -> PixelImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = luminance_field(width as usize, height as usize, &mut rng);
    let data = field.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    PixelImage::new(width, height, PixelLayout::Gray, data).expect("dimensions match")
}

/// Colour variant: a luminance field plus smooth low-amplitude chroma.
pub fn natural_image_rgb(width: u32, height: u32, seed: u64) -> PixelImage {
    let (w, h) = (width as usize, height as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let luma = luminance_field(w, h, &mut rng);
    let cb = value_noise(w, h, 64, &mut rng);
    let cr = value_noise(w, h, 64, &mut rng);
    let mut data = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        let (y, b, r) = (luma[i], 25.0 * cb[i], 25.0 * cr[i]);
        data.push((y + 1.402 * r).round().clamp(0.0, 255.0) as u8);
        data.push((y - 0.344 * b - 0.714 * r).round().clamp(0.0, 255.0) as u8);
        data.push((y + 1.772 * b).round().clamp(0.0, 255.0) as u8);
    }
    PixelImage::new(width, height, PixelLayout::Rgb, data).expect("dimensions match")
}

/// A random blob (ellipse or rectangle) covering roughly `area` of the frame.
pub fn random_region_mask(width: u32, height: u32, area: std::ops::Range<f64>, seed: u64) -> PixelMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let target = rng.gen_range(area);
    let aspect = rng.gen_range(0.6..1.6);
    let ellipse = rng.gen_bool(0.5);
    // area of ellipse = pi*rx*ry, rectangle = 4*rx*ry
    let k = if ellipse { std::f64::consts::PI } else { 4.0 };
    let ry = (target * w * h / (k * aspect)).sqrt();
    let rx = (ry * aspect).min(w / 2.0 - 1.0);
    let ry = ry.min(h / 2.0 - 1.0);
    let cx = rng.gen_range(rx..(w - rx).max(rx + 1.0));
    let cy = rng.gen_range(ry..(h - ry).max(ry + 1.0));
    PixelMask::from_fn(width, height, |x, y| {
        let dx = (x as f64 + 0.5 - cx) / rx;
        let dy = (y as f64 + 0.5 - cy) / ry;
        if ellipse {
            dx * dx + dy * dy <= 1.0
        } else {
            dx.abs() <= 1.0 && dy.abs() <= 1.0
        }
    })
}

/// Copies `donor` pixels into `original` wherever `mask` is set.
pub fn splice(original: &PixelImage, donor: &PixelImage, mask: &PixelMask) -> PixelImage {
    let mut out = original.clone();
    for y in 0..original.height() {
        for x in 0..original.width() {
            if mask.get(x, y) {
                out.pixel_mut(x, y).copy_from_slice(donor.pixel(x, y));
            }
        }
    }
    out
}

/// An (original, tampered, mask) source triple held in memory.
#[derive(Clone, Debug)]
pub struct SourceTriple {
    pub id: String,
    pub original: PixelImage,
    pub tampered: PixelImage,
    pub mask: PixelMask,
}

/// Builds a spliced source triple: the tampered bitmap carries content of
/// an independent image inside a random region of 8-30 % of the frame.
pub fn synthetic_source(id: impl Into<String>, width: u32, height: u32, seed: u64, color: bool) -> SourceTriple {
    let make = |s| if color { natural_image_rgb(width, height, s) } else { natural_image(width, height, s) };
    let original = make(child_seed(seed, 0));
    let donor = make(child_seed(seed, 1));
    let mask = random_region_mask(width, height, 0.08..0.30, child_seed(seed, 2));
    let tampered = splice(&original, &donor, &mask);
    SourceTriple { id: id.into(), original, tampered, mask }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(natural_image(64, 48, 7), natural_image(64, 48, 7));
        assert_ne!(natural_image(64, 48, 7), natural_image(64, 48, 8));
    }

    #[test]
    fn generated_images_have_texture() {
        let img = natural_image(128, 128, 3);
        let mean = img.data().iter().map(|&v| f64::from(v)).sum::<f64>() / img.data().len() as f64;
        let var = img.data().iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / img.data().len() as f64;
        assert!(var > 100.0, "variance {var}");
    }

    #[test]
    fn region_mask_covers_requested_area() {
        for seed in 0..20 {
            let m = random_region_mask(256, 256, 0.1..0.2, seed);
            let frac = m.count() as f64 / (256.0 * 256.0);
            assert!((0.05..0.25).contains(&frac), "seed {seed}: {frac}");
        }
    }

    #[test]
    fn splice_only_touches_masked_pixels() {
        let s = synthetic_source("a", 64, 64, 11, false);
        for y in 0..64 {
            for x in 0..64 {
                if !s.mask.get(x, y) {
                    assert_eq!(s.original.pixel(x, y), s.tampered.pixel(x, y));
                }
            }
        }
    }
}
