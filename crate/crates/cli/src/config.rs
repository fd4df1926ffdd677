//! Run configuration: TOML file, `key.path=value` overrides and the
//! provenance hash.

use std::path::{Path, PathBuf};

use forgeloc::classifier::{ClassifierMode, ModelFamily};
use forgeloc::detect::{DetectorKind, FDF_WINDOWS};
use forgeloc::fusion::{FusionParams, GridMetric, ParamGrid, DEFAULT_MAX_ITERS};
use forgeloc::synth::FileSource;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Environment variable consulted when no seed is given on the command line.
pub const SEED_ENV: &str = "FORGELOC_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    pub out_dir: PathBuf,
    pub corpus: CorpusSection,
    pub detect: DetectSection,
    pub fusion: FusionSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub gridsearch: GridSection,
    pub report: ReportSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            threads: 0,
            out_dir: PathBuf::from("run"),
            corpus: CorpusSection::default(),
            detect: DetectSection::default(),
            fusion: FusionSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            gridsearch: GridSection::default(),
            report: ReportSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// Existing manifest to use instead of `<out_dir>/corpus/manifest.jsonl`.
    pub manifest: Option<PathBuf>,
    /// Raw bitmaps with masks.
    pub sources: Vec<FileSource>,
    /// Number of generated spliced sources added to `sources`.
    pub synthetic: usize,
    pub synthetic_size: u32,
    pub synthetic_color: bool,
    pub cases_per_source: usize,
    /// Explicit `(q1, q2)` pairs; when empty, pairs are drawn from
    /// `q_min..=q_max`.
    pub pairs: Vec<(u8, u8)>,
    pub q_min: u8,
    pub q_max: u8,
    pub block_threshold: f64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            manifest: None,
            sources: Vec::new(),
            synthetic: 0,
            synthetic_size: 256,
            synthetic_color: false,
            cases_per_source: 1,
            pairs: Vec::new(),
            q_min: 80,
            q_max: 100,
            block_threshold: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectSection {
    pub detectors: Vec<DetectorKind>,
    pub mode: ClassifierMode,
    pub stride: usize,
    /// Window sizes fused by `fdf-fuse`.
    pub fuse_windows: Vec<usize>,
}

impl Default for DetectSection {
    fn default() -> Self {
        Self {
            detectors: vec![DetectorKind::Icda],
            mode: ClassifierMode::Aware,
            stride: 8,
            fuse_windows: vec![16, 32, 48, 64],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    /// `fdf-f1` or `fdf-auc`; explicit parameters below override it.
    pub preset: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub rho: Option<f64>,
    pub max_iters: usize,
}

impl Default for FusionSection {
    fn default() -> Self {
        Self { preset: "fdf-f1".into(), alpha: None, beta: None, delta: None, rho: None, max_iters: DEFAULT_MAX_ITERS }
    }
}

impl FusionSection {
    pub fn params(&self) -> Result<FusionParams, CliError> {
        let p = FusionParams::preset(&self.preset).map_err(CliError::usage)?;
        FusionParams::new(
            self.alpha.unwrap_or(p.alpha),
            self.beta.unwrap_or(p.beta),
            self.delta.unwrap_or(p.delta),
            self.rho.unwrap_or(p.rho),
        )
        .map_err(CliError::usage)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Multi-scale window sizes to train.
    pub windows: Vec<usize>,
    /// Also train the single-scale detector.
    pub fdf_a: bool,
    /// Second qualities of the quality-aware models.
    pub qualities: Vec<u8>,
    pub oblivious: bool,
    pub per_class: usize,
    pub image_size: u32,
    pub windows_per_image: usize,
    /// Range of first (and, for oblivious models, second) qualities.
    pub q_min: u8,
    pub q_max: u8,
    pub family: ModelFamily,
    pub c: f64,
    pub gamma: Option<f64>,
    pub holdout: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            windows: vec![64],
            fdf_a: false,
            qualities: vec![90, 95],
            oblivious: true,
            per_class: 2000,
            image_size: 256,
            windows_per_image: 16,
            q_min: 50,
            q_max: 100,
            family: ModelFamily::RbfSvm,
            c: 1.0,
            gamma: None,
            holdout: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Detectors to evaluate; empty means the detect list.
    pub detectors: Vec<DetectorKind>,
    /// Connected-component cleanup of non-fused maps.
    pub cleanup: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { detectors: Vec::new(), cleanup: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Randomly chosen cases (all when fewer exist).
    pub cases: usize,
    /// Leading entries of `detect.fuse_windows` used as candidates.
    pub candidates: usize,
    pub metric: GridMetric,
    pub grid: ParamGrid,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { cases: 66, candidates: 4, metric: GridMetric::F1, grid: ParamGrid::standard() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Quality range of the heatmap.
    pub q_min: u8,
    pub q_max: u8,
    /// Pixels per heatmap cell.
    pub scale: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self { q_min: 50, q_max: 100, scale: 4 }
    }
}

impl RunConfig {
    /// Defaults, then the file, then `key.path=value` overrides in order.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut tree = toml::Value::try_from(Self::default()).expect("defaults serialize");
        if let Some(path) = file {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let user: toml::Table = text.parse().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            merge(&mut tree, toml::Value::Table(user));
        }
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let cfg: Self = tree.try_into().map_err(|e: toml::de::Error| CliError::Usage(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.fusion.params()?;
        for &w in self.detect.fuse_windows.iter().chain(&self.train.windows) {
            if !FDF_WINDOWS.contains(&w) {
                return Err(CliError::Usage(format!("window size {w} not one of {FDF_WINDOWS:?}")));
            }
        }
        if self.detect.stride == 0 || !self.detect.stride.is_multiple_of(8) {
            return Err(CliError::Usage(format!("stride {} is not a positive multiple of 8", self.detect.stride)));
        }
        Ok(())
    }

    /// Seed from the config or flag, else the environment.
    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Usage(format!("this command needs a seed (--seed or {SEED_ENV})")))
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    /// The thread count does not affect outputs and is left out.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(&Self { threads: 0, ..self.clone() }).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Provenance line embedded in output headers.
    pub fn header(&self) -> String {
        format!("forgeloc config {}", self.hash())
    }

    /// 32-bit tag stored in map files.
    pub fn map_tag(&self) -> u32 {
        u32::from_str_radix(&self.hash()[8..], 16).expect("hex digest")
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `a.b.c=value`; the value is read as a TOML literal and falls back to a
/// bare string.
fn apply_override(tree: &mut toml::Value, spec: &str) -> Result<(), CliError> {
    let (path, raw) =
        spec.split_once('=').ok_or_else(|| CliError::Usage(format!("override {spec:?} is not key=value")))?;
    let value = parse_literal(raw.trim());
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Usage(format!("bad override key {path:?}")));
    }
    let mut node = tree;
    for k in &keys[..keys.len() - 1] {
        let table =
            node.as_table_mut().ok_or_else(|| CliError::Usage(format!("override {path:?} descends into a value")))?;
        node = table.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table =
        node.as_table_mut().ok_or_else(|| CliError::Usage(format!("override {path:?} descends into a value")))?;
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, overrides: &[&str]) -> Result<RunConfig, CliError> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, text).unwrap();
        let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        RunConfig::load(Some(&path), &o)
    }

    #[test]
    fn file_then_overrides() {
        let c = load(
            "seed = 3\n[detect]\ndetectors = [\"bag\", \"fdf-32\"]\n",
            &["detect.stride=16", "fusion.preset=fdf-auc"],
        )
        .unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.detect.detectors, vec![DetectorKind::Bag, DetectorKind::FdfW(32)]);
        assert_eq!(c.detect.stride, 16);
        assert_eq!(c.fusion.params().unwrap(), FusionParams::FDF_F_AUC);
        assert_eq!(c.train, TrainSection::default());
    }

    #[test]
    fn explicit_fusion_values_override_preset() {
        let c = load("", &["fusion.beta=0.5"]).unwrap();
        assert_eq!(c.fusion.params().unwrap(), FusionParams { beta: 0.5, ..FusionParams::FDF_F_F1 });
    }

    #[test]
    fn unknown_keys_and_bad_values_are_usage_errors() {
        assert!(matches!(load("sed = 3\n", &[]), Err(CliError::Usage(_))));
        assert!(matches!(load("", &["detect.detectorz=[]"]), Err(CliError::Usage(_))));
        assert!(matches!(load("", &["detect.detectors=[\"fdf-7\"]"]), Err(CliError::Usage(_))));
        assert!(matches!(load("", &["fusion.rho=2.0"]), Err(CliError::Usage(_))));
        assert!(matches!(load("", &["nokey"]), Err(CliError::Usage(_))));
    }

    #[test]
    fn hash_ignores_threads_only() {
        let a = load("", &[]).unwrap();
        let b = load("", &["threads=8"]).unwrap();
        let c = load("", &["seed=1"]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn literals() {
        assert_eq!(parse_literal("3"), toml::Value::Integer(3));
        assert_eq!(parse_literal("[1, 2]"), toml::Value::Array(vec![1.into(), 2.into()]));
        assert_eq!(parse_literal("icda"), toml::Value::String("icda".into()));
    }
}
