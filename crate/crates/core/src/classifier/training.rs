//! Labelled training windows cut from synthesized single and double
//! compressed fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::detect::fdf::{extract_features, FdfFeatureVector, FeatureLayout};
use crate::detect::FDF_WINDOWS;
use crate::error::{invalid, Result};
use crate::jpeg::{decode_to_pixels, encode, parse_jpeg, QualityFactor};
use crate::maps::WindowRect;
use crate::synth::fixtures::natural_image;
use crate::synth::QualityRange;
use crate::util::child_seed;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainingPlan {
    pub window: usize,
    pub layout: FeatureLayout,
    pub per_class: usize,
    /// Second quality of every fixture; `None` draws it per image from `grid`
    /// (oblivious training).
    pub target_q2: Option<u8>,
    /// First qualities are drawn from here, excluding the image's `q2`.
    pub grid: QualityRange,
    pub image_size: u32,
    pub windows_per_image: usize,
    pub seed: u64,
}

impl TrainingPlan {
    pub fn new(window: usize, layout: FeatureLayout, target_q2: Option<u8>, seed: u64) -> Self {
        Self {
            window,
            layout,
            per_class: 2000,
            target_q2,
            grid: QualityRange { min: 50, max: 100 },
            image_size: 256,
            windows_per_image: 16,
            seed,
        }
    }
}

fn draw_other(rng: &mut ChaCha8Rng, grid: QualityRange, q2: u8) -> Result<u8> {
    if grid.min == grid.max && grid.min == q2 {
        return Err(invalid(format!("quality grid {}..={} has no first quality other than {q2}", grid.min, grid.max)));
    }
    loop {
        let q = rng.gen_range(grid.min..=grid.max);
        if q != q2 {
            return Ok(q);
        }
    }
}

fn fixture_windows(plan: &TrainingPlan, index: u64, tampered: bool) -> Result<Vec<FdfFeatureVector>> {
    let seed = child_seed(plan.seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let img = natural_image(plan.image_size, plan.image_size, child_seed(seed, 1));
    let q2 = match plan.target_q2 {
        Some(q) => q,
        None => rng.gen_range(plan.grid.min..=plan.grid.max),
    };
    let bytes = if tampered {
        encode(&img, QualityFactor::new(q2)?)?
    } else {
        let q1 = draw_other(&mut rng, plan.grid, q2)?;
        let first = parse_jpeg(&encode(&img, QualityFactor::new(q1)?)?)?;
        encode(&decode_to_pixels(&first), QualityFactor::new(q2)?)?
    };
    let j = parse_jpeg(&bytes)?;
    let (gw, gh) = j.block_grid();
    let wb = plan.window / 8;
    (0..plan.windows_per_image)
        .map(|_| {
            let bx = rng.gen_range(0..=gw - wb);
            let by = rng.gen_range(0..=gh - wb);
            extract_features(&j, WindowRect::square(bx * 8, by * 8, plan.window), plan.layout)
        })
        .collect()
}

/// `per_class` tampered (singly compressed at `q2`) and `per_class`
/// authentic (compressed at a different `q1`, then at `q2`) windows,
/// interleaved. Deterministic given the plan.
pub fn generate_samples(plan: &TrainingPlan) -> Result<Vec<(FdfFeatureVector, bool)>> {
    if !FDF_WINDOWS.contains(&plan.window) {
        return Err(invalid(format!("window size {} not one of {FDF_WINDOWS:?}", plan.window)));
    }
    if (plan.image_size as usize) < plan.window {
        return Err(invalid(format!("fixture size {} smaller than window {}", plan.image_size, plan.window)));
    }
    if plan.per_class == 0 || plan.windows_per_image == 0 {
        return Err(invalid("training plan requests no samples"));
    }
    if plan.grid.min == 0 || plan.grid.max > 100 || plan.grid.min > plan.grid.max {
        return Err(invalid(format!("bad quality grid {}..={}", plan.grid.min, plan.grid.max)));
    }
    let images = plan.per_class.div_ceil(plan.windows_per_image);
    let per_image: Vec<Vec<(FdfFeatureVector, bool)>> = (0..2 * images as u64)
        .into_par_iter()
        .map(|k| {
            let tampered = k % 2 == 0;
            fixture_windows(plan, k, tampered).map(|ws| ws.into_iter().map(|f| (f, tampered)).collect())
        })
        .collect::<Result<_>>()?;
    let mut counts = [0usize; 2];
    let mut out = Vec::with_capacity(2 * plan.per_class);
    for s in per_image.into_iter().flatten() {
        let c = &mut counts[usize::from(s.1)];
        if *c < plan.per_class {
            *c += 1;
            out.push(s);
        }
    }
    Ok(out)
}
