//! First-digit features of quantized AC coefficients and sliding-window
//! scoring.
//!
//! For each of the leading zig-zag AC modes, the feature vector holds the
//! relative frequency of each leading decimal digit among the nonzero
//! coefficients of that mode inside a window. Zero coefficients are not
//! counted, so a mode's digit frequencies sum to at most 1.

use rayon::prelude::*;

use super::FDF_WINDOWS;
use crate::error::{invalid, Error, Result};
use crate::jpeg::{ac_mode_index, QuantizedJpeg};
use crate::maps::{attribute_windows, TamperingMap, WindowRect};

/// Leading decimal digit of `|v|`; `None` for zero.
pub fn first_digit(v: i32) -> Option<u8> {
    let mut a = v.unsigned_abs();
    if a == 0 {
        return None;
    }
    while a >= 10 {
        a /= 10;
    }
    Some(a as u8)
}

/// Modes and digits covered by a feature vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct FeatureLayout {
    pub n_modes: usize,
    pub n_digits: usize,
}

impl FeatureLayout {
    /// 9 modes x 3 digits.
    pub const SINGLE_SCALE: Self = Self { n_modes: 9, n_digits: 3 };
    /// 20 modes x 9 digits.
    pub const MULTI_SCALE: Self = Self { n_modes: 20, n_digits: 9 };

    pub fn new(n_modes: usize, n_digits: usize) -> Result<Self> {
        if !(1..=63).contains(&n_modes) || !(1..=9).contains(&n_digits) {
            return Err(invalid(format!("feature layout {n_modes}x{n_digits} out of range")));
        }
        Ok(Self { n_modes, n_digits })
    }

    pub fn dims(&self) -> usize {
        self.n_modes * self.n_digits
    }
}

/// Mode-major, digit-minor relative frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct FdfFeatureVector {
    pub layout: FeatureLayout,
    pub values: Vec<f64>,
}

impl FdfFeatureVector {
    /// Frequencies of digits `1..=n_digits` for one mode (0-based).
    pub fn mode(&self, m: usize) -> &[f64] {
        &self.values[m * self.layout.n_digits..(m + 1) * self.layout.n_digits]
    }
}

/// Leading digit (0 for zero) of every luminance block and mode.
pub(crate) fn block_digits(j: &QuantizedJpeg, n_modes: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(j.luma().blocks().len() * n_modes);
    for b in j.luma().blocks() {
        for m in 1..=n_modes {
            out.push(first_digit(i32::from(b[ac_mode_index(m)])).unwrap_or(0));
        }
    }
    out
}

fn check_window(j: &QuantizedJpeg, rect: &WindowRect) -> Result<()> {
    let (gw, gh) = j.block_grid();
    if rect.width == 0
        || rect.height == 0
        || !rect.x.is_multiple_of(8)
        || !rect.y.is_multiple_of(8)
        || !rect.width.is_multiple_of(8)
        || !rect.height.is_multiple_of(8)
    {
        return Err(invalid(format!("window {rect:?} is not aligned to the block grid")));
    }
    if rect.x + rect.width > gw * 8 || rect.y + rect.height > gh * 8 {
        return Err(invalid(format!("window {rect:?} outside the {}x{} image", j.width(), j.height())));
    }
    Ok(())
}

fn features_from_digits(
    digits: &[u8],
    gw: usize,
    rect: &WindowRect,
    layout: FeatureLayout,
    stride: usize,
) -> FdfFeatureVector {
    let (bx0, by0, bx1, by1) = rect.block_span();
    let mut counts = vec![[0u32; 10]; layout.n_modes];
    for by in by0..by1 {
        for bx in bx0..bx1 {
            let base = (by * gw + bx) * stride;
            for (m, c) in counts.iter_mut().enumerate() {
                c[digits[base + m] as usize] += 1;
            }
        }
    }
    let mut values = Vec::with_capacity(layout.dims());
    for c in &counts {
        let nonzero: u32 = c[1..].iter().sum();
        for &n in &c[1..=layout.n_digits] {
            values.push(if nonzero == 0 { 0.0 } else { f64::from(n) / f64::from(nonzero) });
        }
    }
    FdfFeatureVector { layout, values }
}

/// Features of one block-aligned window.
pub fn extract_features(j: &QuantizedJpeg, rect: WindowRect, layout: FeatureLayout) -> Result<FdfFeatureVector> {
    check_window(j, &rect)?;
    let (gw, _) = j.block_grid();
    // only the blocks inside the window are needed
    let (bx0, by0, bx1, by1) = rect.block_span();
    let mut digits = vec![0u8; gw * (by1) * layout.n_modes];
    for by in by0..by1 {
        for bx in bx0..bx1 {
            let b = j.luma().block(bx, by);
            for m in 0..layout.n_modes {
                digits[(by * gw + bx) * layout.n_modes + m] =
                    first_digit(i32::from(b[ac_mode_index(m + 1)])).unwrap_or(0);
            }
        }
    }
    Ok(features_from_digits(&digits, gw, &rect, layout, layout.n_modes))
}

/// Anything that turns a feature vector into a score in `[0, 1]`.
pub trait WindowScorer: Sync {
    fn layout(&self) -> FeatureLayout;
    fn score(&self, f: &FdfFeatureVector) -> Result<f64>;
}

/// Top-left corners along one axis: every `stride`, plus the last position
/// flush with the edge.
fn positions(extent: usize, size: usize, stride: usize) -> Vec<usize> {
    let last = extent - size;
    let mut v: Vec<usize> = (0..=last).step_by(stride).collect();
    if *v.last().unwrap() != last {
        v.push(last);
    }
    v
}

/// Scores every window position and averages onto blocks.
pub fn sliding_window_map(
    j: &QuantizedJpeg,
    window_size: usize,
    stride: usize,
    model: &dyn WindowScorer,
    name: &str,
) -> Result<TamperingMap> {
    if !FDF_WINDOWS.contains(&window_size) {
        return Err(invalid(format!("window size {window_size} not one of {FDF_WINDOWS:?}")));
    }
    if stride == 0 || !stride.is_multiple_of(8) {
        return Err(invalid(format!("stride {stride} is not a positive multiple of 8")));
    }
    let (gw, gh) = j.block_grid();
    if gw * 8 < window_size || gh * 8 < window_size {
        return Err(Error::DegenerateInput(format!(
            "{}x{} image smaller than a {window_size} px window",
            j.width(),
            j.height()
        )));
    }
    let layout = model.layout();
    let digits = block_digits(j, layout.n_modes);
    let xs = positions(gw * 8, window_size, stride);
    let ys = positions(gh * 8, window_size, stride);
    let rects: Vec<WindowRect> =
        ys.iter().flat_map(|&y| xs.iter().map(move |&x| WindowRect::square(x, y, window_size))).collect();
    let scored: Vec<(WindowRect, f64)> = rects
        .into_par_iter()
        .map(|r| {
            let f = features_from_digits(&digits, gw, &r, layout, layout.n_modes);
            model.score(&f).map(|s| (r, s))
        })
        .collect::<Result<_>>()?;
    attribute_windows(&scored, (gw, gh), name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jpeg::{quality_to_tables, QualityFactor};

    struct Constant(f64);

    impl WindowScorer for Constant {
        fn layout(&self) -> FeatureLayout {
            FeatureLayout::MULTI_SCALE
        }
        fn score(&self, _: &FdfFeatureVector) -> Result<f64> {
            Ok(self.0)
        }
    }

    /// Scores a window by its position so that attribution can be traced.
    struct ByPosition;

    impl WindowScorer for ByPosition {
        fn layout(&self) -> FeatureLayout {
            FeatureLayout::SINGLE_SCALE
        }
        fn score(&self, f: &FdfFeatureVector) -> Result<f64> {
            Ok(f.values[0])
        }
    }

    fn blank(w: u32, h: u32) -> QuantizedJpeg {
        let (t, _) = quality_to_tables(QualityFactor::new(90).unwrap());
        QuantizedJpeg::new(w, h, &[(1, 1, 1, t)]).unwrap()
    }

    #[test]
    fn leading_digits() {
        assert_eq!(first_digit(-37), Some(3));
        assert_eq!(first_digit(0), None);
        assert_eq!(first_digit(9), Some(9));
        assert_eq!(first_digit(10), Some(1));
        assert_eq!(first_digit(i32::MIN), Some(2));
    }

    #[test]
    fn unit_coefficients_give_first_digit_one() {
        let mut j = blank(16, 16);
        let n = ac_mode_index(1);
        for (i, b) in [(0, 0), (1, 0), (0, 1), (1, 1)].iter().enumerate() {
            j.components_mut()[0].block_mut(b.0, b.1)[n] = if i % 2 == 0 { 1 } else { -1 };
        }
        let f = extract_features(&j, WindowRect::square(0, 0, 16), FeatureLayout::MULTI_SCALE).unwrap();
        assert_eq!(f.mode(0), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(f.mode(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn counts_match_brute_force_tally() {
        let mut j = blank(32, 32);
        let mut state = 12345u32;
        for by in 0..4 {
            for bx in 0..4 {
                let b = j.components_mut()[0].block_mut(bx, by);
                for c in b.iter_mut().skip(1) {
                    state = state.wrapping_mul(1_103_515_245).wrapping_add(12345);
                    *c = ((state >> 16) % 400) as i16 - 200;
                }
            }
        }
        let rect = WindowRect::square(8, 8, 16);
        let f = extract_features(&j, rect, FeatureLayout::MULTI_SCALE).unwrap();
        for m in 0..20 {
            let vals: Vec<i32> = (1..3)
                .flat_map(|by| (1..3).map(move |bx| (bx, by)))
                .map(|(bx, by)| i32::from(j.luma().block(bx, by)[ac_mode_index(m + 1)]))
                .collect();
            let nz = vals.iter().filter(|&&v| v != 0).count();
            for d in 1..=9u8 {
                let c = vals.iter().filter(|&&v| first_digit(v) == Some(d)).count();
                let want = if nz == 0 { 0.0 } else { c as f64 / nz as f64 };
                assert_eq!(f.mode(m)[d as usize - 1], want);
            }
            assert!(f.mode(m).iter().sum::<f64>() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn windows_must_be_aligned_and_inside() {
        let j = blank(32, 32);
        assert!(extract_features(&j, WindowRect::square(4, 0, 16), FeatureLayout::MULTI_SCALE).is_err());
        assert!(extract_features(&j, WindowRect::square(24, 0, 16), FeatureLayout::MULTI_SCALE).is_err());
    }

    #[test]
    fn constant_model_gives_uniform_map() {
        let j = blank(128, 96);
        let m = sliding_window_map(&j, 32, 8, &Constant(0.7), "fdf-32").unwrap();
        assert!(m.scores().iter().all(|&s| (s - 0.7).abs() < 1e-12));
    }

    #[test]
    fn tiling_stride_assigns_each_window_to_its_blocks() {
        let mut j = blank(64, 64);
        // mode-1 digit-1 frequency differs per 32x32 tile: tile k gets k ones among four nonzero
        let n = ac_mode_index(1);
        for ty in 0..2 {
            for tx in 0..2 {
                let k = ty * 2 + tx;
                for (i, (bx, by)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
                    j.components_mut()[0].block_mut(tx * 4 + bx, ty * 4 + by)[n] = if i < k { 1 } else { 2 };
                }
            }
        }
        let m = sliding_window_map(&j, 32, 32, &ByPosition, "t").unwrap();
        for by in 0..8 {
            for bx in 0..8 {
                let k = (by / 4) * 2 + bx / 4;
                assert!((m.get(bx, by) - k as f64 / 4.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bad_window_arguments() {
        let j = blank(64, 64);
        assert!(sliding_window_map(&j, 24, 8, &Constant(0.5), "x").is_err());
        assert!(sliding_window_map(&j, 32, 12, &Constant(0.5), "x").is_err());
        assert!(matches!(sliding_window_map(&j, 128, 8, &Constant(0.5), "x"), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn layout_dimensions() {
        assert_eq!(FeatureLayout::SINGLE_SCALE.dims(), 27);
        assert_eq!(FeatureLayout::MULTI_SCALE.dims(), 180);
        assert!(FeatureLayout::new(0, 3).is_err());
    }
}
