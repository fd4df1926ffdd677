//! Binary classifiers over first-digit features: training, calibration,
//! model files and the per-quality registry.
//!
//! Label convention: `true` means the window is tampered (singly compressed),
//! and positive margins point that way.

mod linear;
mod registry;
pub mod svm;
mod training;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

pub use registry::{registry_key, select_classifier, ClassifierMode, ClassifierRegistry, MODEL_EXT, OBLIVIOUS_STEM};
pub use training::{generate_samples, TrainingPlan};

use crate::detect::fdf::{FdfFeatureVector, FeatureLayout, WindowScorer};
use crate::error::{invalid, Error, Result};
use crate::maps::{logistic_normalize, LogisticParams};
use crate::util::splitmix64;
use linear::LinearModel;
use svm::RbfSvm;

pub const MODEL_MAGIC: &[u8; 4] = b"FDFM";
const MODEL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    #[default]
    RbfSvm,
    Logistic,
}

impl ModelFamily {
    fn tag(self) -> u8 {
        match self {
            Self::RbfSvm => 1,
            Self::Logistic => 2,
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RbfSvm => "rbf-svm",
            Self::Logistic => "logistic",
        })
    }
}

impl FromStr for ModelFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rbf-svm" | "svm" => Ok(Self::RbfSvm),
            "logistic" => Ok(Self::Logistic),
            _ => Err(invalid(format!("unknown classifier family {s:?}"))),
        }
    }
}

/// Training knobs.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainSpec {
    pub family: ModelFamily,
    /// Box constraint (SVM) or inverse ridge strength (logistic).
    pub c: f64,
    /// RBF width on standardized features; `None` means `1 / dims`.
    pub gamma: Option<f64>,
    /// Fraction of each class held out for calibration.
    pub holdout: f64,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self { family: ModelFamily::RbfSvm, c: 1.0, gamma: None, holdout: 0.1, seed: 0, tolerance: 1e-3 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModelMeta {
    pub window: usize,
    /// Quality the model was trained for; `None` for an oblivious model.
    pub target_q2: Option<u8>,
    pub n_tampered: usize,
    pub n_authentic: usize,
    pub seed: u64,
    /// Free-form origin note, e.g. the hash of the producing config.
    #[serde(default)]
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &[f64], dims: usize, weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let mut mean = vec![0.0; dims];
        for (row, w) in x.chunks_exact(dims).zip(weights) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += w * v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= total);
        let mut var = vec![0.0; dims];
        for (row, w) in x.chunks_exact(dims).zip(weights) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += w * (v - m) * (v - m);
            }
        }
        let scale = var.iter().map(|v| if *v > 1e-24 { (v / total).sqrt() } else { 1.0 }).collect();
        Self { mean, scale }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Learned {
    Svm(RbfSvm),
    Linear(LinearModel),
}

/// A trained window classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierModel {
    layout: FeatureLayout,
    standardizer: Standardizer,
    learned: Learned,
    calibration: Option<LogisticParams>,
    pub meta: ModelMeta,
}

impl ClassifierModel {
    pub fn family(&self) -> ModelFamily {
        match self.learned {
            Learned::Svm(_) => ModelFamily::RbfSvm,
            Learned::Linear(_) => ModelFamily::Logistic,
        }
    }

    pub fn calibration(&self) -> Option<LogisticParams> {
        self.calibration
    }

    fn check_dims(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.layout.dims() {
            return Err(invalid(format!(
                "feature vector has {} values, model expects {}",
                values.len(),
                self.layout.dims()
            )));
        }
        Ok(())
    }

    fn raw_margin(&self, values: &[f64]) -> f64 {
        let z = self.standardizer.apply(values);
        match &self.learned {
            Learned::Svm(m) => m.decision(&z),
            Learned::Linear(m) => m.decision(&z),
        }
    }

    /// Signed distance-like response; positive means tampered.
    pub fn margin(&self, f: &FdfFeatureVector) -> Result<f64> {
        self.check_dims(&f.values)?;
        Ok(self.raw_margin(&f.values))
    }

    /// Calibrated score in `[0, 1]`; without calibration the margin goes
    /// through a unit-slope logistic.
    pub fn predict_score(&self, f: &FdfFeatureVector) -> Result<f64> {
        let m = self.margin(f)?;
        Ok(self.score_margin(m))
    }

    pub fn score_margin(&self, margin: f64) -> f64 {
        logistic_normalize(margin, self.calibration.unwrap_or(LogisticParams { phi1: 1.0, phi2: 0.0 }))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.push(self.family().tag());
        out.extend_from_slice(&(self.layout.n_modes as u32).to_le_bytes());
        out.extend_from_slice(&(self.layout.n_digits as u32).to_le_bytes());

        let mut blob = Vec::new();
        put_f64s(&mut blob, &self.standardizer.mean);
        put_f64s(&mut blob, &self.standardizer.scale);
        match &self.learned {
            Learned::Svm(m) => {
                put_f64s(&mut blob, &[m.gamma, m.rho]);
                blob.extend_from_slice(&(m.coef.len() as u64).to_le_bytes());
                put_f64s(&mut blob, &m.coef);
                put_f64s(&mut blob, &m.vectors);
            }
            Learned::Linear(m) => {
                put_f64s(&mut blob, &[m.bias]);
                put_f64s(&mut blob, &m.weights);
            }
        }
        out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
        out.extend_from_slice(&blob);

        match self.calibration {
            Some(c) => {
                out.push(1);
                put_f64s(&mut out, &[c.phi1, c.phi2]);
            }
            None => {
                out.push(0);
                put_f64s(&mut out, &[0.0, 0.0]);
            }
        }
        let meta = serde_json::to_vec(&self.meta).expect("metadata serializes");
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MODEL_MAGIC {
            return Err(Error::Malformed("not a classifier model file".into()));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::Malformed(format!("model version {version} not supported")));
        }
        let tag = r.take(1)?[0];
        let layout =
            FeatureLayout::new(r.u32()? as usize, r.u32()? as usize).map_err(|e| Error::Malformed(e.to_string()))?;
        let d = layout.dims();
        let blob_len = r.u64()? as usize;
        let blob_end = r
            .pos
            .checked_add(blob_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Malformed("truncated parameter blob".into()))?;
        let mut b = Reader { bytes: &bytes[..blob_end], pos: r.pos };
        let standardizer = Standardizer { mean: b.f64s(d)?, scale: b.f64s(d)? };
        let learned = match tag {
            1 => {
                let [gamma, rho] = <[f64; 2]>::try_from(b.f64s(2)?).expect("two values");
                let n = b.u64()? as usize;
                let coef = b.f64s(n)?;
                let vectors =
                    b.f64s(n.checked_mul(d).ok_or_else(|| Error::Malformed("support vector count overflows".into()))?)?;
                Learned::Svm(RbfSvm { gamma, rho, coef, vectors, dims: d })
            }
            2 => {
                let bias = b.f64s(1)?[0];
                Learned::Linear(LinearModel { bias, weights: b.f64s(d)? })
            }
            t => return Err(Error::Malformed(format!("unknown model family tag {t}"))),
        };
        if b.pos != blob_end {
            return Err(Error::Malformed("parameter blob length mismatch".into()));
        }
        r.pos = blob_end;
        let has_cal = r.take(1)?[0] == 1;
        let cal = r.f64s(2)?;
        let calibration = if has_cal {
            Some(LogisticParams::new(cal[0], cal[1]).map_err(|e| Error::Malformed(e.to_string()))?)
        } else {
            None
        };
        let meta_len = r.u32()? as usize;
        let meta: ModelMeta = serde_json::from_slice(r.take(meta_len)?).map_err(|e| Error::Malformed(e.to_string()))?;
        if r.pos != bytes.len() {
            return Err(Error::Malformed("trailing bytes after model".into()));
        }
        Ok(Self { layout, standardizer, learned, calibration, meta })
    }
}

impl WindowScorer for ClassifierModel {
    fn layout(&self) -> FeatureLayout {
        self.layout
    }

    fn score(&self, f: &FdfFeatureVector) -> Result<f64> {
        self.predict_score(f)
    }
}

fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Malformed(format!("model truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Malformed("length overflows".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

/// Distinct (features, label) pairs with their multiplicities, in order of
/// first appearance.
struct UniqueSet {
    x: Vec<f64>,
    labels: Vec<bool>,
    counts: Vec<f64>,
    keys: Vec<u64>,
}

fn feature_hash(values: &[f64], seed: u64) -> u64 {
    values.iter().fold(splitmix64(seed ^ 0x5eed), |h, v| splitmix64(h ^ v.to_bits()))
}

fn dedup(samples: &[(FdfFeatureVector, bool)], dims: usize, seed: u64) -> UniqueSet {
    let mut index: HashMap<(Vec<u64>, bool), usize> = HashMap::new();
    let mut set = UniqueSet { x: Vec::new(), labels: Vec::new(), counts: Vec::new(), keys: Vec::new() };
    for (f, label) in samples {
        let bits: Vec<u64> = f.values.iter().map(|v| v.to_bits()).collect();
        match index.get(&(bits.clone(), *label)) {
            Some(&i) => set.counts[i] += 1.0,
            None => {
                index.insert((bits, *label), set.labels.len());
                set.x.extend_from_slice(&f.values);
                set.labels.push(*label);
                set.counts.push(1.0);
                set.keys.push(feature_hash(&f.values, seed));
            }
        }
    }
    debug_assert_eq!(set.x.len(), set.labels.len() * dims);
    set
}

/// Per-sample weights that sum to `n / 2` within each class, `n` being the
/// number of distinct samples. Scaling every multiplicity leaves them unchanged.
fn balanced_weights(labels: &[bool], counts: &[f64]) -> Vec<f64> {
    let n = labels.len() as f64;
    let pos: f64 = labels.iter().zip(counts).filter(|(l, _)| **l).map(|(_, c)| c).sum();
    let neg: f64 = labels.iter().zip(counts).filter(|(l, _)| !**l).map(|(_, c)| c).sum();
    labels.iter().zip(counts).map(|(&l, &c)| c * n / (2.0 * if l { pos } else { neg })).collect()
}

/// Fits `p = logistic(a * f + b)` by Newton's method on smoothed targets.
/// `n_pos` / `n_neg` are distinct-sample counts used for target smoothing.
fn fit_platt(decisions: &[f64], labels: &[bool], weights: &[f64]) -> Option<LogisticParams> {
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let mean_w = weights.iter().sum::<f64>() / weights.len() as f64;
    let t: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();
    let w: Vec<f64> = weights.iter().map(|x| x / mean_w).collect();

    let loss = |a: f64, b: f64| -> f64 {
        decisions
            .iter()
            .zip(&t)
            .zip(&w)
            .map(|((&f, &ti), &wi)| {
                let z = a * f + b;
                // log(1 + e^z) - t z, stable for both signs
                let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
                wi * (softplus - ti * z)
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((n_pos + 1.0) / (n_neg + 1.0)).ln());
    let mut current = loss(a, b);
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 1e-12, 0.0, 1e-12);
        for ((&f, &ti), &wi) in decisions.iter().zip(&t).zip(&w) {
            let p = logistic_normalize(a * f + b, LogisticParams { phi1: 1.0, phi2: 0.0 });
            let r = wi * (p - ti);
            let s = wi * p * (1.0 - p);
            ga += r * f;
            gb += r;
            haa += s * f * f;
            hab += s * f;
            hbb += s;
        }
        if ga.abs() < 1e-9 && gb.abs() < 1e-9 {
            break;
        }
        let det = haa * hbb - hab * hab;
        let da = -(hbb * ga - hab * gb) / det;
        let db = -(-hab * ga + haa * gb) / det;
        let mut step = 1.0;
        let mut improved = false;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let l = loss(na, nb);
            if l < current + 1e-4 * step * (ga * da + gb * db) {
                a = na;
                b = nb;
                current = l;
                improved = true;
                break;
            }
            step /= 2.0;
        }
        if !improved {
            break;
        }
    }
    if a > 0.0 && a.is_finite() && b.is_finite() {
        LogisticParams::new(a, b / a).ok()
    } else {
        None
    }
}

/// Trains a classifier. Identical samples are merged into weights, the
/// calibration split is chosen by feature hash, and every step is
/// deterministic given `spec.seed`.
pub fn train_classifier(
    samples: &[(FdfFeatureVector, bool)],
    spec: &TrainSpec,
    mut meta: ModelMeta,
) -> Result<ClassifierModel> {
    let Some(first) = samples.first() else {
        return Err(invalid("no training samples"));
    };
    let layout = first.0.layout;
    let dims = layout.dims();
    for (f, _) in samples {
        if f.layout != layout || f.values.len() != dims {
            return Err(invalid("training samples have inconsistent feature layouts"));
        }
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite feature value"));
        }
    }
    if !(spec.c > 0.0 && spec.c.is_finite()) {
        return Err(invalid(format!("regularization constant must be positive, got {}", spec.c)));
    }
    if !(0.0..0.5).contains(&spec.holdout) {
        return Err(invalid(format!("holdout fraction {} outside [0, 0.5)", spec.holdout)));
    }
    meta.n_tampered = samples.iter().filter(|s| s.1).count();
    meta.n_authentic = samples.len() - meta.n_tampered;
    if meta.n_tampered == 0 || meta.n_authentic == 0 {
        return Err(invalid("training data must contain both classes"));
    }
    meta.seed = spec.seed;

    let set = dedup(samples, dims, spec.seed);
    // held-out calibration split: lowest hashes of each class
    let mut held = vec![false; set.labels.len()];
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..set.labels.len()).filter(|&i| set.labels[i] == class).collect();
        idx.sort_by_key(|&i| (set.keys[i], i));
        let k = (spec.holdout * idx.len() as f64).floor() as usize;
        for &i in idx.iter().take(k) {
            held[i] = true;
        }
    }
    let has_both_held = [true, false].iter().all(|&c| (0..held.len()).any(|i| held[i] && set.labels[i] == c));
    let train_idx: Vec<usize> = (0..held.len()).filter(|&i| !(has_both_held && held[i])).collect();
    if [true, false].iter().any(|&c| !train_idx.iter().any(|&i| set.labels[i] == c)) {
        return Err(invalid("training split lost a class"));
    }

    let x_train: Vec<f64> = train_idx.iter().flat_map(|&i| set.x[i * dims..(i + 1) * dims].iter().copied()).collect();
    let l_train: Vec<bool> = train_idx.iter().map(|&i| set.labels[i]).collect();
    let c_train: Vec<f64> = train_idx.iter().map(|&i| set.counts[i]).collect();
    let w_train = balanced_weights(&l_train, &c_train);
    let standardizer = Standardizer::fit(&x_train, dims, &c_train);
    let z: Vec<f64> = x_train.chunks_exact(dims).flat_map(|r| standardizer.apply(r)).collect();
    let y: Vec<f64> = l_train.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();

    let learned = match spec.family {
        ModelFamily::RbfSvm => {
            let gamma = spec.gamma.unwrap_or(1.0 / dims as f64);
            let c: Vec<f64> = w_train.iter().map(|w| spec.c * w).collect();
            Learned::Svm(svm::train_rbf(&z, dims, &y, &c, gamma, spec.tolerance)?)
        }
        ModelFamily::Logistic => Learned::Linear(linear::train_logistic(&z, dims, &y, &w_train, 1.0 / spec.c)?),
    };
    let mut model = ClassifierModel { layout, standardizer, learned, calibration: None, meta };
    if has_both_held {
        let idx: Vec<usize> = (0..held.len()).filter(|&i| held[i]).collect();
        let dec: Vec<f64> = idx.iter().map(|&i| model.raw_margin(&set.x[i * dims..(i + 1) * dims])).collect();
        let labels: Vec<bool> = idx.iter().map(|&i| set.labels[i]).collect();
        let counts: Vec<f64> = idx.iter().map(|&i| set.counts[i]).collect();
        model.calibration = fit_platt(&dec, &labels, &balanced_weights(&labels, &counts));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(n: usize, seed: u64) -> Vec<(FdfFeatureVector, bool)> {
        let layout = FeatureLayout::new(2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..2 * n)
            .map(|i| {
                let label = i % 2 == 0;
                let c = if label { 0.7 } else { 0.3 };
                let values = (0..4).map(|_| c + 0.05 * crate::util::gaussian(&mut rng)).collect();
                (FdfFeatureVector { layout, values }, label)
            })
            .collect()
    }

    fn probes(seed: u64) -> Vec<FdfFeatureVector> {
        let layout = FeatureLayout::new(2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..200)
            .map(|_| FdfFeatureVector { layout, values: (0..4).map(|_| rng.gen_range(0.0..1.0)).collect() })
            .collect()
    }

    fn accuracy(m: &ClassifierModel, data: &[(FdfFeatureVector, bool)]) -> f64 {
        let ok = data.iter().filter(|(f, l)| (m.margin(f).unwrap() > 0.0) == *l).count();
        ok as f64 / data.len() as f64
    }

    #[test]
    fn separable_blobs_are_learned() {
        let data = blobs(200, 1);
        for family in [ModelFamily::RbfSvm, ModelFamily::Logistic] {
            let m =
                train_classifier(&data, &TrainSpec { family, ..TrainSpec::default() }, ModelMeta::default()).unwrap();
            assert!(accuracy(&m, &data) >= 0.99, "{family}");
            assert!(m.calibration().is_some());
        }
    }

    #[test]
    fn flipped_labels_flip_scores() {
        let data = blobs(150, 2);
        let flipped: Vec<_> = data.iter().map(|(f, l)| (f.clone(), !l)).collect();
        for family in [ModelFamily::RbfSvm, ModelFamily::Logistic] {
            let spec = TrainSpec { family, ..TrainSpec::default() };
            let a = train_classifier(&data, &spec, ModelMeta::default()).unwrap();
            let b = train_classifier(&flipped, &spec, ModelMeta::default()).unwrap();
            for p in probes(3) {
                let (sa, sb) = (a.predict_score(&p).unwrap(), b.predict_score(&p).unwrap());
                assert!((sa + sb - 1.0).abs() < 1e-3, "{family}: {sa} vs {sb}");
            }
        }
    }

    #[test]
    fn duplication_does_not_change_the_model() {
        let data = blobs(120, 4);
        let doubled: Vec<_> = data.iter().chain(&data).cloned().collect();
        for family in [ModelFamily::RbfSvm, ModelFamily::Logistic] {
            let spec = TrainSpec { family, ..TrainSpec::default() };
            let a = train_classifier(&data, &spec, ModelMeta::default()).unwrap();
            let b = train_classifier(&doubled, &spec, ModelMeta::default()).unwrap();
            for p in probes(5) {
                assert!((a.margin(&p).unwrap() - b.margin(&p).unwrap()).abs() < 1e-6);
                assert!((a.predict_score(&p).unwrap() - b.predict_score(&p).unwrap()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = blobs(80, 6);
        let spec = TrainSpec::default();
        let a = train_classifier(&data, &spec, ModelMeta::default()).unwrap();
        let b = train_classifier(&data, &spec, ModelMeta::default()).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn bad_training_input() {
        let data = blobs(10, 7);
        let one_class: Vec<_> = data.iter().filter(|s| s.1).cloned().collect();
        assert!(matches!(
            train_classifier(&one_class, &TrainSpec::default(), ModelMeta::default()),
            Err(Error::InvalidArgument(_))
        ));
        let mut nan = data.clone();
        nan[0].0.values[1] = f64::NAN;
        assert!(matches!(
            train_classifier(&nan, &TrainSpec::default(), ModelMeta::default()),
            Err(Error::InvalidArgument(_))
        ));
        assert!(train_classifier(&[], &TrainSpec::default(), ModelMeta::default()).is_err());
    }

    #[test]
    fn uncalibrated_margin_goes_through_unit_logistic() {
        let data = blobs(40, 8);
        let mut m =
            train_classifier(&data, &TrainSpec { holdout: 0.0, ..TrainSpec::default() }, ModelMeta::default()).unwrap();
        assert!(m.calibration.is_none());
        assert_eq!(m.score_margin(0.0), 0.5);
        assert!((m.score_margin(4.0) - 0.982).abs() < 1e-3);
        m.calibration = Some(LogisticParams::new(2.0, 0.0).unwrap());
        assert!(m.score_margin(1.0) > m.score_margin(0.5));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = train_classifier(&blobs(20, 9), &TrainSpec::default(), ModelMeta::default()).unwrap();
        let f = FdfFeatureVector { layout: FeatureLayout::SINGLE_SCALE, values: vec![0.0; 27] };
        assert!(matches!(m.predict_score(&f), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn model_file_round_trip() {
        for family in [ModelFamily::RbfSvm, ModelFamily::Logistic] {
            let meta = ModelMeta { window: 64, target_q2: Some(90), ..ModelMeta::default() };
            let m = train_classifier(&blobs(30, 10), &TrainSpec { family, ..TrainSpec::default() }, meta).unwrap();
            let bytes = m.to_bytes();
            assert_eq!(&bytes[..4], MODEL_MAGIC);
            let back = ClassifierModel::from_bytes(&bytes).unwrap();
            assert_eq!(back, m);
            assert!(ClassifierModel::from_bytes(&bytes[..bytes.len() - 3]).is_err());
            let mut bad = bytes.clone();
            bad[8] = 9;
            assert!(matches!(ClassifierModel::from_bytes(&bad), Err(Error::Malformed(_))));
        }
    }
}
