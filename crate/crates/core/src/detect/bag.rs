//! Blocking-artifact grid detector.
//!
//! Block-wise coding leaves faint discontinuities on every 8th row and
//! column. Absolute second differences, accumulated along the line direction,
//! expose them; a per-phase median over the 8-periodic classes keeps the
//! periodic part and drops content edges. A block whose border carries less
//! grid energy than its interior does not line up with the image's grid.

use rayon::prelude::*;

use super::luma_image;
use crate::error::{Error, Result};
use crate::jpeg::{PixelImage, QuantizedJpeg};
use crate::maps::{logistic_normalize, LogisticParams, TamperingMap};

/// Half-length of the accumulation and comb windows, in pixels.
const REACH: usize = 16;

pub const BAG_LOGISTIC: LogisticParams = LogisticParams { phi1: 0.005, phi2: 0.0 };

/// Per-pixel grid strength, nonnegative.
#[derive(Clone, Debug, PartialEq)]
pub struct BagImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl BagImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(crate::error::invalid("BAG values do not match dimensions"));
        }
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn median(v: &mut [f64]) -> f64 {
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    let m = *m;
    if v.len() % 2 == 1 {
        m
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower + m) / 2.0
    }
}

/// Second differences across lines at `stride` steps, summed over
/// `2 * REACH + 1` positions along the line, then comb-filtered.
///
/// `across(i)` / `along(i)` address a 1-D traversal: for vertical grid lines
/// "across" is x and "along" is y.
fn line_component(v: &[f64], w: usize, h: usize, transpose: bool) -> Vec<f64> {
    // work in (a, l) coordinates: a runs across lines, l along them
    let (na, nl) = if transpose { (h, w) } else { (w, h) };
    let at = |a: usize, l: usize| if transpose { v[a * w + l] } else { v[l * w + a] };
    let mut d = vec![0.0; na * nl];
    for l in 0..nl {
        for a in 1..na - 1 {
            d[l * na + a] = (2.0 * at(a, l) - at(a - 1, l) - at(a + 1, l)).abs();
        }
    }
    // running sum along l
    let mut acc = vec![0.0; na * nl];
    for a in 0..na {
        let mut prefix = vec![0.0; nl + 1];
        for l in 0..nl {
            prefix[l + 1] = prefix[l] + d[l * na + a];
        }
        for l in 0..nl {
            let lo = l.saturating_sub(REACH);
            let hi = (l + REACH + 1).min(nl);
            acc[l * na + a] = prefix[hi] - prefix[lo];
        }
    }
    let rows: Vec<Vec<f64>> = (0..nl)
        .into_par_iter()
        .map(|l| {
            let row = &acc[l * na..(l + 1) * na];
            let mut out = vec![0.0; na];
            let mut phase = Vec::with_capacity(5);
            let mut local = Vec::with_capacity(2 * REACH + 1);
            for (a, o) in out.iter_mut().enumerate() {
                let lo = a.saturating_sub(REACH);
                let hi = (a + REACH + 1).min(na);
                phase.clear();
                local.clear();
                local.extend_from_slice(&row[lo..hi]);
                let mut k = a % 8;
                while k < hi {
                    if k >= lo {
                        phase.push(row[k]);
                    }
                    k += 8;
                }
                *o = (median(&mut phase) - median(&mut local)).max(0.0);
            }
            out
        })
        .collect();
    let mut out = vec![0.0; w * h];
    for (l, row) in rows.iter().enumerate() {
        for (a, &val) in row.iter().enumerate() {
            let idx = if transpose { a * w + l } else { l * w + a };
            out[idx] = val;
        }
    }
    out
}

/// Grid strength of the luminance of `p`.
pub fn compute_bag_image(p: &PixelImage) -> Result<BagImage> {
    let (w, h) = (p.width() as usize, p.height() as usize);
    if w < 16 || h < 16 {
        return Err(Error::DegenerateInput(format!("{w}x{h} image is smaller than two grid periods")));
    }
    let v: Vec<f64> = p.luma().iter().map(|&x| f64::from(x)).collect();
    let vertical = line_component(&v, w, h, false);
    let horizontal = line_component(&v, w, h, true);
    let values = vertical.iter().zip(&horizontal).map(|(a, b)| a + b).collect();
    BagImage::new(w, h, values)
}

/// Raw block score: mean over the central 6x6 minus mean over the 28-pixel
/// border ring. Partial edge blocks use the pixels they have.
pub fn bag_raw_scores(bag: &BagImage) -> (usize, usize, Vec<f64>) {
    let gw = bag.width.div_ceil(8);
    let gh = bag.height.div_ceil(8);
    let mut out = Vec::with_capacity(gw * gh);
    for by in 0..gh {
        for bx in 0..gw {
            let (mut cs, mut cn, mut rs, mut rn) = (0.0, 0usize, 0.0, 0usize);
            for y in 0..8 {
                for x in 0..8 {
                    let (px, py) = (bx * 8 + x, by * 8 + y);
                    if px >= bag.width || py >= bag.height {
                        continue;
                    }
                    let v = bag.get(px, py);
                    if (1..7).contains(&x) && (1..7).contains(&y) {
                        cs += v;
                        cn += 1;
                    } else {
                        rs += v;
                        rn += 1;
                    }
                }
            }
            out.push(if cn == 0 || rn == 0 { 0.0 } else { cs / cn as f64 - rs / rn as f64 });
        }
    }
    (gw, gh, out)
}

/// Normalized block scores; all-zero input gives 0.5 everywhere.
pub fn bag_block_scores(bag: &BagImage) -> Result<TamperingMap> {
    let (gw, gh, raw) = bag_raw_scores(bag);
    let scores = raw.iter().map(|&r| logistic_normalize(r, BAG_LOGISTIC)).collect();
    TamperingMap::new(gw, gh, scores, "bag")
}

/// Full detector on a parsed image.
pub fn bag_map(j: &QuantizedJpeg) -> Result<TamperingMap> {
    bag_block_scores(&compute_bag_image(&luma_image(j))?)
}
