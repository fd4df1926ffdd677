//! Localization scoring: threshold sweep, small-component cleanup,
//! block-level confusion counts, ROC sampling and partial AUC.

mod report;
mod roc;

pub use report::{
    aggregate_by_detector, aggregate_by_quality, quality_cells, read_records, roc_points, write_f1_heatmap,
    write_records, CellStats, DetectorSummary,
};
pub use roc::{auc, Pchip};

use crate::maps::TamperingMap;
use crate::synth::{GroundTruthMask, PixelMask};
use crate::Result;

/// Number of sweep thresholds.
pub const N_THRESHOLDS: usize = 39;

/// Minimum size of a kept connected component, in blocks.
pub const MIN_COMPONENT: usize = 4;

/// False-positive caps of the reported partial AUCs.
pub const AUC_CAPS: [f64; 3] = [0.05, 0.1, 0.2];

/// `k / 40` for `k = 1..=39`.
pub fn thresholds() -> [f64; N_THRESHOLDS] {
    std::array::from_fn(|k| (k + 1) as f64 / 40.0)
}

/// A block-level decision map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMap {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl BinaryMap {
    pub fn new(width: usize, height: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != width * height {
            return Err(crate::error::invalid(format!("{} cells for a {width}x{height} map", cells.len())));
        }
        Ok(Self { width, height, cells })
    }

    /// `score >= tau` per block.
    pub fn threshold(m: &TamperingMap, tau: f64) -> Self {
        Self { width: m.width(), height: m.height(), cells: m.scores().iter().map(|&s| s >= tau).collect() }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells[y * self.width + x]
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

/// The 39 binary maps of the sweep, ascending threshold.
pub fn threshold_sweep(m: &TamperingMap) -> Vec<BinaryMap> {
    thresholds().iter().map(|&t| BinaryMap::threshold(m, t)).collect()
}

/// Clears 8-connected components smaller than [`MIN_COMPONENT`] blocks.
pub fn clean_binary_map(b: &BinaryMap) -> BinaryMap {
    let (w, h) = b.dims();
    let mut out = b.clone();
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in 0..w * h {
        if !b.cells[start] || seen[start] {
            continue;
        }
        component.clear();
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            component.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if b.cells[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if component.len() < MIN_COMPONENT {
            for &i in &component {
                out.cells[i] = false;
            }
        }
    }
    out
}

/// Majority-rule reduction of a pixel mask to the block grid.
pub fn downsample_mask(mask: &PixelMask) -> Result<GroundTruthMask> {
    GroundTruthMask::from_pixel_mask(mask, 0.5)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    /// `tp / (tp + fn)`; 1 when the ground truth has no positives.
    pub fn tp_rate(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    /// `fp / (fp + tn)`; 0 when the ground truth has no negatives.
    pub fn fp_rate(&self) -> f64 {
        if self.fp + self.tn == 0 {
            0.0
        } else {
            self.fp as f64 / (self.fp + self.tn) as f64
        }
    }

    /// `2tp / (2tp + fp + fn)`; 0 when the denominator is 0.
    pub fn f1(&self) -> f64 {
        let d = 2 * self.tp + self.fp + self.fn_;
        if d == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / d as f64
        }
    }
}

/// Block-wise comparison; dimensions must match.
pub fn confusion(b: &BinaryMap, gt: &GroundTruthMask) -> Result<ConfusionCounts> {
    if b.dims() != gt.dims() {
        return Err(crate::error::invalid(format!("map {:?} vs ground truth {:?}", b.dims(), gt.dims())));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in b.cells().iter().zip(gt.cells()) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RocSample {
    pub threshold: f64,
    pub fp_rate: f64,
    pub tp_rate: f64,
    pub f1: f64,
}

/// Scores one binary map per sweep threshold.
pub fn evaluate_binary_maps(maps: &[BinaryMap], gt: &GroundTruthMask, cleanup: bool) -> Result<Vec<RocSample>> {
    maps.iter()
        .zip(thresholds())
        .map(|(b, threshold)| {
            let c = if cleanup { confusion(&clean_binary_map(b), gt)? } else { confusion(b, gt)? };
            Ok(RocSample { threshold, fp_rate: c.fp_rate(), tp_rate: c.tp_rate(), f1: c.f1() })
        })
        .collect()
}

/// Sweep, optional cleanup and confusion for one map.
pub fn evaluate_map(m: &TamperingMap, gt: &GroundTruthMask, cleanup: bool) -> Result<Vec<RocSample>> {
    evaluate_binary_maps(&threshold_sweep(m), gt, cleanup)
}

/// Per-case, per-detector evaluation result; one JSON line in the record store.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalRecord {
    pub case_id: String,
    pub detector: String,
    pub q1: u8,
    pub q2: u8,
    /// Ground truth has no tampered block; excluded from F1 aggregation.
    pub negative_control: bool,
    pub samples: Vec<RocSample>,
    pub max_f1: f64,
    pub auc_005: f64,
    pub auc_01: f64,
    pub auc_02: f64,
}

impl EvalRecord {
    pub fn new(case_id: &str, detector: &str, q1: u8, q2: u8, negative_control: bool, samples: Vec<RocSample>) -> Self {
        let max_f1 = samples.iter().map(|s| s.f1).fold(0.0, f64::max);
        let curve = Pchip::from_samples(&samples);
        let [a, b, c] = AUC_CAPS.map(|cap| auc(&curve, cap));
        Self {
            case_id: case_id.to_string(),
            detector: detector.to_string(),
            q1,
            q2,
            negative_control,
            samples,
            max_f1,
            auc_005: a,
            auc_01: b,
            auc_02: c,
        }
    }
}
