//! Block-resolution tampering maps, logistic score normalization and
//! window-to-block score attribution.
//!
//! Every detector emits a [`TamperingMap`]: one score in `[0, 1]` per 8x8
//! pixel block, higher meaning more likely tampered.

use std::io::Write;

use crate::error::{invalid, Error, Result};

/// Parameters of `f(x) = 1 / (1 + exp(-phi1 * (x + phi2)))`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogisticParams {
    pub phi1: f64,
    pub phi2: f64,
}

impl LogisticParams {
    pub fn new(phi1: f64, phi2: f64) -> Result<Self> {
        if !(phi1 > 0.0 && phi1.is_finite() && phi2.is_finite()) {
            return Err(invalid(format!("logistic slope must be positive and finite, got {phi1}")));
        }
        Ok(Self { phi1, phi2 })
    }

    pub fn apply(&self, x: f64) -> f64 {
        logistic_normalize(x, *self)
    }
}

/// Maps a raw detector response into `(0, 1)`; strictly increasing in `x`.
pub fn logistic_normalize(x: f64, p: LogisticParams) -> f64 {
    let z = p.phi1 * (x + p.phi2);
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// A grid of per-block scores in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TamperingMap {
    width: usize,
    height: usize,
    scores: Vec<f64>,
    detector: String,
    reliability: Option<f64>,
}

pub const MAP_MAGIC: &[u8; 4] = b"TMAP";

impl TamperingMap {
    pub fn new(width: usize, height: usize, scores: Vec<f64>, detector: impl Into<String>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("empty map"));
        }
        if scores.len() != width * height {
            return Err(invalid(format!("{} scores for a {width}x{height} grid", scores.len())));
        }
        if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(invalid(format!("score {bad} outside [0, 1]")));
        }
        Ok(Self { width, height, scores, detector: detector.into(), reliability: None })
    }

    pub fn uniform(width: usize, height: usize, score: f64, detector: impl Into<String>) -> Result<Self> {
        Self::new(width, height, vec![score; width * height], detector)
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

    pub fn get(&self, bx: usize, by: usize) -> f64 {
        self.scores[by * self.width + bx]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn detector(&self) -> &str {
        &self.detector
    }

    pub fn set_detector(&mut self, detector: impl Into<String>) {
        self.detector = detector.into();
    }

    /// Twice the mean absolute deviation from 0.5, in `[0, 1]`.
    ///
    /// Unreliable maps look like low-contrast noise around 0.5 and score near 0.
    pub fn contrast(&self) -> f64 {
        2.0 * self.scores.iter().map(|s| (s - 0.5).abs()).sum::<f64>() / self.scores.len() as f64
    }

    /// Explicit reliability when a detector set one, otherwise [`Self::contrast`].
    pub fn reliability(&self) -> f64 {
        self.reliability.unwrap_or_else(|| self.contrast())
    }

    pub fn explicit_reliability(&self) -> Option<f64> {
        self.reliability
    }

    pub fn with_reliability(mut self, r: f64) -> Self {
        self.reliability = Some(r.clamp(0.0, 1.0));
        self
    }

    /// Applies `f` to every score and clamps the result into `[0, 1]`.
    pub fn map_scores(&self, f: impl Fn(f64) -> f64) -> TamperingMap {
        TamperingMap { scores: self.scores.iter().map(|&s| f(s).clamp(0.0, 1.0)).collect(), ..self.clone() }
    }

    /// Binary layout: `TMAP`, width, height and a 32-bit provenance tag
    /// (all little-endian u32), followed by `width * height` f32 scores.
    pub fn to_bytes(&self, tag: u32) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.scores.len());
        out.extend_from_slice(MAP_MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&tag.to_le_bytes());
        for &s in &self.scores {
            out.extend_from_slice(&(s as f32).to_le_bytes());
        }
        out
    }

    /// Inverse of [`Self::to_bytes`]; returns the map and its provenance tag.
    pub fn from_bytes(bytes: &[u8], detector: impl Into<String>) -> Result<(Self, u32)> {
        if bytes.len() < 16 || &bytes[..4] != MAP_MAGIC {
            return Err(Error::Malformed("missing TMAP header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let (w, h, tag) = (word(4) as usize, word(8) as usize, word(12));
        if bytes.len() != 16 + 4 * w * h {
            return Err(Error::Malformed(format!("map body has {} bytes, expected {}", bytes.len() - 16, 4 * w * h)));
        }
        let scores =
            bytes[16..].chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap()))).collect();
        let map = Self::new(w, h, scores, detector).map_err(|e| Error::Malformed(e.to_string()))?;
        Ok((map, tag))
    }

    /// 8-bit binary PGM for visual inspection, one pixel per block.
    pub fn write_pgm(&self, mut w: impl Write) -> Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.scores.iter().map(|s| (s * 255.0).round() as u8).collect();
        w.write_all(&bytes)?;
        Ok(())
    }
}

/// A window in pixel coordinates; edges lie on the 8-px block grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowRect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl WindowRect {
    pub fn square(x: usize, y: usize, size: usize) -> Self {
        Self { x, y, width: size, height: size }
    }

    /// Covered blocks as `(bx0, by0, bx1, by1)`, end exclusive.
    pub fn block_span(&self) -> (usize, usize, usize, usize) {
        (self.x / 8, self.y / 8, (self.x + self.width) / 8, (self.y + self.height) / 8)
    }
}

/// Averages window scores onto every block each window covers.
///
/// Blocks covered by no window get 0.5; the map's reliability is then the
/// contrast scaled by the covered fraction. An empty window list yields an
/// all-0.5 map with reliability 0.
pub fn attribute_windows(windows: &[(WindowRect, f64)], grid: (usize, usize), detector: &str) -> Result<TamperingMap> {
    let (gw, gh) = grid;
    if windows.is_empty() {
        return Ok(TamperingMap::uniform(gw, gh, 0.5, detector)?.with_reliability(0.0));
    }
    let mut sum = vec![0.0; gw * gh];
    let mut count = vec![0u32; gw * gh];
    for (rect, score) in windows {
        if rect.x % 8 != 0
            || rect.y % 8 != 0
            || rect.width % 8 != 0
            || rect.height % 8 != 0
            || rect.width == 0
            || rect.height == 0
        {
            return Err(invalid(format!("window {rect:?} is not aligned to the block grid")));
        }
        let (bx0, by0, bx1, by1) = rect.block_span();
        if bx1 > gw || by1 > gh {
            return Err(invalid(format!("window {rect:?} exceeds the {gw}x{gh} block grid")));
        }
        if !(0.0..=1.0).contains(score) {
            return Err(invalid(format!("window score {score} outside [0, 1]")));
        }
        for by in by0..by1 {
            for bx in bx0..bx1 {
                sum[by * gw + bx] += score;
                count[by * gw + bx] += 1;
            }
        }
    }
    let covered = count.iter().filter(|&&c| c > 0).count();
    let scores =
        sum.iter().zip(&count).map(|(&s, &c)| if c == 0 { 0.5 } else { (s / f64::from(c)).clamp(0.0, 1.0) }).collect();
    let map = TamperingMap::new(gw, gh, scores, detector)?;
    if covered < gw * gh {
        let r = map.contrast() * covered as f64 / (gw * gh) as f64;
        Ok(map.with_reliability(r))
    } else {
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(a: f64, b: f64) -> LogisticParams {
        LogisticParams::new(a, b).unwrap()
    }

    #[test]
    fn logistic_reference_values() {
        assert_eq!(logistic_normalize(0.0, p(3.0, 0.0)), 0.5);
        assert!((logistic_normalize(200.0, p(0.005, 0.0)) - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-12);
        assert!((logistic_normalize(200.0, p(0.005, 0.0)) - 0.7311).abs() < 1e-4);
        assert_eq!(logistic_normalize(-60.0, p(0.05, 60.0)), 0.5);
        assert!((logistic_normalize(4.0, p(1.0, 0.0)) - 0.982).abs() < 1e-3);
    }

    #[test]
    fn logistic_saturates_without_nan() {
        let f = p(1.0, 0.0);
        assert_eq!(logistic_normalize(1e6, f), 1.0);
        assert_eq!(logistic_normalize(-1e6, f), 0.0);
        assert!(LogisticParams::new(0.0, 0.0).is_err());
        assert!(LogisticParams::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn map_rejects_out_of_range_scores() {
        assert!(TamperingMap::new(2, 1, vec![0.2, 1.5], "x").is_err());
        assert!(TamperingMap::new(2, 1, vec![0.2, f64::NAN], "x").is_err());
        assert!(TamperingMap::new(2, 2, vec![0.2], "x").is_err());
    }

    #[test]
    fn single_window_gives_uniform_map() {
        let m = attribute_windows(&[(WindowRect::square(0, 0, 64), 0.3)], (8, 8), "t").unwrap();
        assert!(m.scores().iter().all(|&s| s == 0.3));
    }

    #[test]
    fn overlapping_windows_average() {
        let w = WindowRect::square(0, 0, 32);
        let m = attribute_windows(&[(w, 0.0), (w, 1.0)], (4, 4), "t").unwrap();
        assert!(m.scores().iter().all(|&s| s == 0.5));
    }

    #[test]
    fn uncovered_blocks_are_neutral_and_lower_reliability() {
        let m = attribute_windows(&[(WindowRect::square(0, 0, 16), 1.0)], (4, 4), "t").unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(3, 3), 0.5);
        assert!(m.reliability() < m.contrast());
        let empty = attribute_windows(&[], (3, 3), "t").unwrap();
        assert!(empty.scores().iter().all(|&s| s == 0.5));
        assert_eq!(empty.reliability(), 0.0);
    }

    #[test]
    fn misaligned_or_oversized_windows_are_rejected() {
        assert!(attribute_windows(&[(WindowRect::square(4, 0, 16), 0.5)], (4, 4), "t").is_err());
        assert!(attribute_windows(&[(WindowRect::square(24, 0, 16), 0.5)], (4, 4), "t").is_err());
    }

    #[test]
    fn serialization_round_trip() {
        let m = TamperingMap::new(3, 2, vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.125], "t").unwrap();
        let bytes = m.to_bytes(0xDEADBEEF);
        assert_eq!(bytes.len(), 16 + 24);
        let (back, tag) = TamperingMap::from_bytes(&bytes, "t").unwrap();
        assert_eq!(tag, 0xDEADBEEF);
        assert_eq!(back.scores(), m.scores());
        assert!(TamperingMap::from_bytes(&bytes[..20], "t").is_err());
    }

    #[test]
    fn contrast_of_neutral_map_is_zero() {
        assert_eq!(TamperingMap::uniform(5, 5, 0.5, "t").unwrap().contrast(), 0.0);
        assert_eq!(TamperingMap::new(2, 1, vec![0.0, 1.0], "t").unwrap().contrast(), 1.0);
    }
}
