//! Localization detectors.
//!
//! All detectors read the luminance component only and emit a
//! [`TamperingMap`](crate::maps::TamperingMap) on the 8x8 block grid.

pub mod bag;
pub mod cda;
pub mod fdf;

use std::fmt;
use std::str::FromStr;

use crate::classifier::{registry_key, ClassifierMode, ClassifierRegistry};
use crate::error::{invalid, Error, Result};
use crate::fusion::{fused_map, FusionParams, DEFAULT_MAX_ITERS};
use crate::jpeg::pixels::component_plane;
use crate::jpeg::{estimate_quality, PixelImage, PixelLayout, QuantizedJpeg};
use crate::maps::TamperingMap;

pub use bag::{bag_block_scores, bag_map, compute_bag_image, BagImage};
pub use cda::{
    bgcda_map, cda_map, estimate_single_histogram, icda_map, n_factor, observed_histograms, CoeffHistogram,
    DoubleQuantModel, HistogramDetectorOptions,
};
pub use fdf::{extract_features, first_digit, sliding_window_map, FdfFeatureVector, FeatureLayout, WindowScorer};

/// Window sizes supported by the multi-scale first-digit detectors.
pub const FDF_WINDOWS: [usize; 8] = [16, 32, 48, 64, 80, 96, 112, 128];

/// Detector identifiers as used in configs, file names and reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorKind {
    Bag,
    Cda,
    Icda,
    BgCda,
    FdfA,
    /// Multi-scale first-digit detector at one window size in pixels.
    FdfW(usize),
    /// Fusion of the multi-scale first-digit maps.
    FdfFuse,
}

impl DetectorKind {
    /// True for detectors whose maps come from a trained classifier.
    pub fn needs_model(self) -> bool {
        matches!(self, Self::FdfA | Self::FdfW(_) | Self::FdfFuse)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Bag => f.write_str("bag"),
            Self::Cda => f.write_str("cda"),
            Self::Icda => f.write_str("icda"),
            Self::BgCda => f.write_str("bgcda"),
            Self::FdfA => f.write_str("fdf-a"),
            Self::FdfW(w) => write!(f, "fdf-{w}"),
            Self::FdfFuse => f.write_str("fdf-fuse"),
        }
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bag" => Ok(Self::Bag),
            "cda" => Ok(Self::Cda),
            "icda" | "i-cda" => Ok(Self::Icda),
            "bgcda" | "bg-cda" => Ok(Self::BgCda),
            "fdf-a" | "fdfa" => Ok(Self::FdfA),
            "fdf-fuse" | "fdf-f" => Ok(Self::FdfFuse),
            other => {
                let w = other
                    .strip_prefix("fdf-")
                    .and_then(|w| w.parse::<usize>().ok())
                    .filter(|w| FDF_WINDOWS.contains(w))
                    .ok_or_else(|| invalid(format!("unknown detector `{s}`")))?;
                Ok(Self::FdfW(w))
            }
        }
    }
}

impl serde::Serialize for DetectorKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for DetectorKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Window of the single-scale first-digit detector.
pub const FDF_A_WINDOW: usize = 64;

/// Everything besides the image that a detector may need.
#[derive(Clone, Debug)]
pub struct DetectorSetup<'a> {
    pub registry: Option<&'a ClassifierRegistry>,
    pub mode: ClassifierMode,
    /// Sliding-window stride in pixels.
    pub stride: usize,
    /// Window sizes whose maps are fused by `fdf-fuse`.
    pub fuse_windows: Vec<usize>,
    pub fusion: FusionParams,
    pub max_iters: usize,
}

impl Default for DetectorSetup<'_> {
    fn default() -> Self {
        Self {
            registry: None,
            mode: ClassifierMode::Aware,
            stride: 8,
            fuse_windows: vec![16, 32, 48, 64],
            fusion: FusionParams::FDF_F_F1,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

/// Runs one detector with its default options. Quality-aware models are
/// chosen by the quality estimated from the luminance table.
pub fn run_detector(kind: DetectorKind, j: &QuantizedJpeg, setup: &DetectorSetup<'_>) -> Result<TamperingMap> {
    match kind {
        DetectorKind::Bag => bag_map(j),
        DetectorKind::Cda => cda::cda_map_with(j, &HistogramDetectorOptions::cda()),
        DetectorKind::Icda => cda::icda_map_with(j, &HistogramDetectorOptions::icda()),
        DetectorKind::BgCda => cda::bgcda_map_with(j, &HistogramDetectorOptions::bgcda()).map(|(m, _)| m),
        DetectorKind::FdfA => window_map(kind, FDF_A_WINDOW, j, setup),
        DetectorKind::FdfW(w) => window_map(kind, w, j, setup),
        DetectorKind::FdfFuse => {
            if setup.fuse_windows.is_empty() {
                return Err(invalid("fdf-fuse needs at least one window size"));
            }
            let maps = setup
                .fuse_windows
                .iter()
                .map(|&w| window_map(DetectorKind::FdfW(w), w, j, setup))
                .collect::<Result<Vec<_>>>()?;
            fused_map(&maps, &setup.fusion, setup.max_iters)
        }
    }
}

fn window_map(kind: DetectorKind, window: usize, j: &QuantizedJpeg, setup: &DetectorSetup<'_>) -> Result<TamperingMap> {
    let registry = setup.registry.ok_or_else(|| Error::NotFound(format!("{kind} needs trained classifiers")))?;
    let key = registry_key(kind).expect("classifier-backed detector");
    let q2 = estimate_quality(&j.components()[0].table).get();
    let model = registry.select(&key, q2, setup.mode)?;
    sliding_window_map(j, window, setup.stride, model, &kind.to_string())
}

/// The decoded luminance plane cropped to the image size.
pub fn luma_image(j: &QuantizedJpeg) -> PixelImage {
    let (w, h) = (j.width() as usize, j.height() as usize);
    let (stride, _, plane) = component_plane(j, 0);
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        data.extend_from_slice(&plane[y * stride..y * stride + w]);
    }
    PixelImage::new(j.width(), j.height(), PixelLayout::Gray, data).expect("plane covers the image")
}
