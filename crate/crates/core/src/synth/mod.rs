//! Aligned double-JPEG forgery synthesis.
//!
//! A case is produced by compressing the original bitmap at `q1`,
//! decoding it, pasting the masked pixels of the uncompressed tampered
//! bitmap, and compressing the result at `q2 >= q1` on the same 8x8 grid.
//! The pasted region is therefore singly compressed while the background
//! carries both compressions.

mod corpus;
pub mod fixtures;

pub use corpus::{
    build_corpus, coverage, read_manifest, resolve, CaseSource, CorpusConfig, FileSource, ManifestRow, QualityPlan,
    MANIFEST_FILE,
};

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::jpeg::{
    decode_to_pixels, encode_with, parse_jpeg, ChromaSubsampling, EncodeOptions, PixelImage, QualityFactor,
};

/// Pixel-resolution binary mask; `true` marks replaced pixels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelMask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl PixelMask {
    pub fn new(width: u32, height: u32, data: Vec<bool>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(invalid("mask size does not match its dimensions"));
        }
        Ok(Self { width, height, data })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![false; width as usize * height as usize] }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }
}

/// Block-resolution binary ground truth, one cell per 8x8 pixel block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruthMask {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl GroundTruthMask {
    pub fn new(width: usize, height: usize, cells: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || cells.len() != width * height {
            return Err(invalid("ground-truth size does not match its dimensions"));
        }
        Ok(Self { width, height, cells })
    }

    /// Reduces a pixel mask to blocks: a block is tampered when at least
    /// `threshold` of its pixels are masked. Partial edge blocks count only
    /// the pixels inside the image.
    pub fn from_pixel_mask(mask: &PixelMask, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(invalid(format!("block threshold {threshold} outside (0, 1]")));
        }
        let (w, h) = (mask.width().div_ceil(8) as usize, mask.height().div_ceil(8) as usize);
        let mut cells = Vec::with_capacity(w * h);
        for by in 0..h as u32 {
            for bx in 0..w as u32 {
                let (mut hit, mut total) = (0usize, 0usize);
                for y in by * 8..((by + 1) * 8).min(mask.height()) {
                    for x in bx * 8..((bx + 1) * 8).min(mask.width()) {
                        total += 1;
                        hit += usize::from(mask.get(x, y));
                    }
                }
                cells.push(hit > 0 && hit as f64 >= threshold * total as f64);
            }
        }
        Self::new(w, h, cells)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, bx: usize, by: usize) -> bool {
        self.cells[by * self.width + bx]
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn positives(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    /// Binary PBM (P4), one bit per block, rows padded to whole bytes.
    pub fn to_pbm(&self) -> Vec<u8> {
        let mut out = format!("P4\n{} {}\n", self.width, self.height).into_bytes();
        for row in self.cells.chunks(self.width) {
            for chunk in row.chunks(8) {
                let mut byte = 0u8;
                for (i, &b) in chunk.iter().enumerate() {
                    if b {
                        byte |= 0x80 >> i;
                    }
                }
                out.push(byte);
            }
        }
        out
    }

    pub fn from_pbm(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Malformed(format!("PBM: {m}"));
        let mut fields = Vec::new();
        let mut i = 0;
        while fields.len() < 3 {
            while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
                if bytes[i] == b'#' {
                    while i < bytes.len() && bytes[i] != b'\n' {
                        i += 1;
                    }
                } else {
                    i += 1;
                }
            }
            let start = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if start == i {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..i]).map_err(|_| bad("header is not ASCII"))?.to_string());
        }
        if fields[0] != "P4" {
            return Err(bad("expected P4 magic"));
        }
        let w: usize = fields[1].parse().map_err(|_| bad("width"))?;
        let h: usize = fields[2].parse().map_err(|_| bad("height"))?;
        i += 1;
        let row_bytes = w.div_ceil(8);
        let body = bytes.get(i..i + row_bytes * h).ok_or_else(|| bad("truncated raster"))?;
        let mut cells = Vec::with_capacity(w * h);
        for row in body.chunks(row_bytes) {
            for x in 0..w {
                cells.push(row[x / 8] & (0x80 >> (x % 8)) != 0);
            }
        }
        Self::new(w, h, cells)
    }
}

/// Knobs of the synthesis pipeline.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthOptions {
    /// Fraction of masked pixels that marks a block as tampered.
    pub block_threshold: f64,
    pub subsampling: ChromaSubsampling,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { block_threshold: 0.5, subsampling: ChromaSubsampling::S444 }
    }
}

/// One synthesized forgery.
#[derive(Clone, Debug)]
pub struct ForgeryCase {
    pub jpeg: Vec<u8>,
    pub mask: GroundTruthMask,
    pub q1: QualityFactor,
    pub q2: QualityFactor,
    pub source_ids: Vec<String>,
}

/// Runs the compress / paste / recompress pipeline for one case.
///
/// An empty `pixel_mask` produces a negative control: a uniformly doubly
/// compressed image with an all-false ground truth.
pub fn synthesize_case(
    original: &PixelImage,
    tampered: &PixelImage,
    pixel_mask: &PixelMask,
    q1: QualityFactor,
    q2: QualityFactor,
    opts: &SynthOptions,
) -> Result<ForgeryCase> {
    if original.width() != tampered.width()
        || original.height() != tampered.height()
        || original.layout() != tampered.layout()
    {
        return Err(invalid("original and tampered bitmaps differ in size or layout"));
    }
    if pixel_mask.width() != original.width() || pixel_mask.height() != original.height() {
        return Err(invalid("pixel mask size differs from the bitmaps"));
    }
    if q2 < q1 {
        return Err(invalid(format!("second quality {q2} below first quality {q1}")));
    }
    let first = encode_with(original, &EncodeOptions { quality: q1, subsampling: opts.subsampling })?;
    let mut composite = decode_to_pixels(&parse_jpeg(&first)?);
    // decode_to_pixels yields RGB for colour input and gray otherwise, matching the source layout
    for y in 0..original.height() {
        for x in 0..original.width() {
            if pixel_mask.get(x, y) {
                composite.pixel_mut(x, y).copy_from_slice(tampered.pixel(x, y));
            }
        }
    }
    let jpeg = encode_with(&composite, &EncodeOptions { quality: q2, subsampling: opts.subsampling })?;
    Ok(ForgeryCase {
        jpeg,
        mask: GroundTruthMask::from_pixel_mask(pixel_mask, opts.block_threshold)?,
        q1,
        q2,
        source_ids: Vec::new(),
    })
}

/// Inclusive range of first-compression quality factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct QualityRange {
    pub min: u8,
    pub max: u8,
}

impl Default for QualityRange {
    fn default() -> Self {
        Self { min: 80, max: 100 }
    }
}

/// Draws `q1` uniformly from the range, then `q2` uniformly from `q1..=max`.
pub fn sample_quality_pair_in(rng: &mut impl Rng, range: QualityRange) -> (QualityFactor, QualityFactor) {
    let q1 = rng.gen_range(range.min..=range.max);
    let q2 = rng.gen_range(q1..=range.max);
    (QualityFactor::new(q1).expect("range within 1..=100"), QualityFactor::new(q2).expect("range within 1..=100"))
}

/// `q1` uniform over 80..=100, `q2` uniform over `q1..=100`.
pub fn sample_quality_pair(rng: &mut impl Rng) -> (QualityFactor, QualityFactor) {
    sample_quality_pair_in(rng, QualityRange::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(v: u8) -> QualityFactor {
        QualityFactor::new(v).unwrap()
    }

    #[test]
    fn majority_reduction() {
        // left 4 columns of the first block, all 8 columns of the second
        let m = PixelMask::from_fn(16, 8, |x, _| !(4..8).contains(&x));
        let gt = GroundTruthMask::from_pixel_mask(&m, 0.5).unwrap();
        assert_eq!(gt.cells(), &[true, true]);
        let gt = GroundTruthMask::from_pixel_mask(&m, 0.6).unwrap();
        assert_eq!(gt.cells(), &[false, true]);
        assert!(GroundTruthMask::from_pixel_mask(&m, 0.0).is_err());
    }

    #[test]
    fn single_tile_maps_to_one_cell() {
        let m = PixelMask::from_fn(64, 64, |x, y| (24..32).contains(&x) && (40..48).contains(&y));
        let gt = GroundTruthMask::from_pixel_mask(&m, 0.5).unwrap();
        assert_eq!(gt.positives(), 1);
        assert!(gt.get(3, 5));
    }

    #[test]
    fn full_hd_reduces_to_240_by_135() {
        let m = PixelMask::from_fn(1920, 1080, |_, _| true);
        let gt = GroundTruthMask::from_pixel_mask(&m, 0.5).unwrap();
        assert_eq!(gt.dims(), (240, 135));
        assert_eq!(gt.positives(), 240 * 135);
    }

    #[test]
    fn pbm_round_trip() {
        let cells: Vec<bool> = (0..13 * 5).map(|i| i % 3 == 0).collect();
        let gt = GroundTruthMask::new(13, 5, cells).unwrap();
        assert_eq!(GroundTruthMask::from_pbm(&gt.to_pbm()).unwrap(), gt);
        assert!(GroundTruthMask::from_pbm(b"P4\n13 5\n").is_err());
    }

    #[test]
    fn quality_pairs_respect_ordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let (a, b) = sample_quality_pair(&mut rng);
            assert!((80..=100).contains(&a.get()));
            assert!(b >= a);
        }
        let (a, b) = sample_quality_pair_in(&mut rng, QualityRange { min: 100, max: 100 });
        assert_eq!((a.get(), b.get()), (100, 100));
    }

    #[test]
    fn synthesis_rejects_bad_arguments() {
        let s = fixtures::synthetic_source("a", 32, 32, 1, false);
        let small = fixtures::natural_image(16, 32, 1);
        let opts = SynthOptions::default();
        assert!(synthesize_case(&s.original, &small, &s.mask, q(80), q(90), &opts).is_err());
        assert!(synthesize_case(&s.original, &s.tampered, &s.mask, q(90), q(80), &opts).is_err());
    }

    #[test]
    fn negative_control_has_empty_mask() {
        let s = fixtures::synthetic_source("a", 64, 64, 2, false);
        let case =
            synthesize_case(&s.original, &s.tampered, &PixelMask::empty(64, 64), q(80), q(95), &Default::default())
                .unwrap();
        assert_eq!(case.mask.positives(), 0);
        assert_eq!(case.mask.dims(), (8, 8));
    }

    #[test]
    fn full_frame_mask_is_single_compression() {
        let s = fixtures::synthetic_source("a", 64, 64, 3, false);
        let full = PixelMask::from_fn(64, 64, |_, _| true);
        let case = synthesize_case(&s.original, &s.tampered, &full, q(80), q(95), &Default::default()).unwrap();
        assert_eq!(case.mask.positives(), 64);
        let direct = crate::jpeg::encode(&s.tampered, q(95)).unwrap();
        assert_eq!(case.jpeg, direct);
    }
}
