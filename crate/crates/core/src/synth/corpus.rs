use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::fixtures::SourceTriple;
use super::{sample_quality_pair_in, synthesize_case, PixelMask, QualityRange, SynthOptions};
use crate::error::{invalid, Result};
use crate::imageio;
use crate::jpeg::{with_comment, PixelImage, QualityFactor};
use crate::util::{atomic_write, child_seed};

/// Anything that can provide an (original, tampered, mask) triple.
pub trait CaseSource: Sync {
    fn id(&self) -> &str;
    fn load(&self) -> Result<(PixelImage, PixelImage, PixelMask)>;
}

impl CaseSource for SourceTriple {
    fn id(&self) -> &str {
        &self.id
    }

    fn load(&self) -> Result<(PixelImage, PixelImage, PixelMask)> {
        Ok((self.original.clone(), self.tampered.clone(), self.mask.clone()))
    }
}

/// Source bitmaps on disk. The mask image marks replaced pixels with
/// non-zero luminance.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FileSource {
    pub id: String,
    pub original: PathBuf,
    pub tampered: PathBuf,
    pub mask: PathBuf,
}

impl CaseSource for FileSource {
    fn id(&self) -> &str {
        &self.id
    }

    fn load(&self) -> Result<(PixelImage, PixelImage, PixelMask)> {
        let original = imageio::read_pixels(&self.original)?;
        let mut tampered = imageio::read_pixels(&self.tampered)?;
        if tampered.layout() != original.layout() {
            // one of the two files was stored as grayscale
            if original.layout() == crate::jpeg::PixelLayout::Gray {
                tampered = tampered.to_gray();
            } else {
                return Err(invalid("tampered bitmap is grayscale while the original is colour"));
            }
        }
        let mask = imageio::read_mask(&self.mask)?;
        Ok((original, tampered, mask))
    }
}

/// How quality pairs are assigned to cases.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityPlan {
    /// `q1` uniform over the range, `q2` uniform over `q1..=max`.
    Uniform(QualityRange),
    /// Each case draws one of the listed `(q1, q2)` pairs uniformly.
    Pairs(Vec<(u8, u8)>),
}

impl Default for QualityPlan {
    fn default() -> Self {
        QualityPlan::Uniform(QualityRange::default())
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CorpusConfig {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub cases_per_source: usize,
    pub plan: QualityPlan,
    pub synth: SynthOptions,
    /// Provenance line written into the manifest, masks and JPEG comments.
    #[serde(default)]
    pub header: Option<String>,
}

/// One manifest line. Paths are relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ManifestRow {
    pub case_id: String,
    pub jpeg_path: String,
    pub mask_path: String,
    pub q1: u8,
    pub q2: u8,
    pub seed: u64,
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

fn draw_pair(plan: &QualityPlan, rng: &mut ChaCha8Rng) -> Result<(QualityFactor, QualityFactor)> {
    match plan {
        QualityPlan::Uniform(r) => {
            if r.min == 0 || r.min > r.max || r.max > 100 {
                return Err(invalid(format!("quality range {}..={} is invalid", r.min, r.max)));
            }
            Ok(sample_quality_pair_in(rng, *r))
        }
        QualityPlan::Pairs(pairs) => {
            let &(a, b) = pairs.choose(rng).ok_or_else(|| invalid("empty quality pair list"))?;
            Ok((QualityFactor::new(a)?, QualityFactor::new(b)?))
        }
    }
}

/// Generates `cases_per_source` forgeries per source and writes
/// `cases/<case_id>.jpg`, `cases/<case_id>.pbm` and `manifest.jsonl`.
///
/// Output depends only on the config and the sources. A source that cannot
/// be loaded or synthesized yields rows carrying an `error` and the run
/// continues. Existing case files are reused, so an interrupted run can be
/// restarted.
pub fn build_corpus<S: CaseSource>(config: &CorpusConfig, sources: &[S]) -> Result<Vec<ManifestRow>> {
    if let QualityPlan::Pairs(p) = &config.plan {
        for &(a, b) in p {
            if b < a {
                return Err(invalid(format!("quality pair ({a}, {b}) has q2 < q1")));
            }
            QualityFactor::new(a)?;
            QualityFactor::new(b)?;
        }
    }
    let case_dir = config.out_dir.join("cases");
    std::fs::create_dir_all(&case_dir)?;

    let rows: Vec<Vec<ManifestRow>> = sources
        .par_iter()
        .enumerate()
        .map(|(si, source)| {
            let loaded = source.load();
            (0..config.cases_per_source)
                .map(|k| {
                    let case_id = format!("{}-{:03}", source.id(), k);
                    let seed = child_seed(config.seed, (si as u64) << 32 | k as u64);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut row = ManifestRow {
                        jpeg_path: format!("cases/{case_id}.jpg"),
                        mask_path: format!("cases/{case_id}.pbm"),
                        case_id,
                        q1: 0,
                        q2: 0,
                        seed,
                        source_id: source.id().to_string(),
                        error: None,
                    };
                    let result = draw_pair(&config.plan, &mut rng).and_then(|(q1, q2)| {
                        row.q1 = q1.get();
                        row.q2 = q2.get();
                        let (original, tampered, mask) = loaded.as_ref().map_err(|e| invalid(e.to_string()))?;
                        let jpeg_path = config.out_dir.join(&row.jpeg_path);
                        let mask_path = config.out_dir.join(&row.mask_path);
                        if jpeg_path.exists() && mask_path.exists() {
                            return Ok(());
                        }
                        let case = synthesize_case(original, tampered, mask, q1, q2, &config.synth)?;
                        let (pbm, jpeg) = match &config.header {
                            Some(h) => (pbm_with_comment(&case.mask.to_pbm(), h), with_comment(&case.jpeg, h)?),
                            None => (case.mask.to_pbm(), case.jpeg),
                        };
                        atomic_write(&mask_path, &pbm)?;
                        atomic_write(&jpeg_path, &jpeg)?;
                        Ok(())
                    });
                    if let Err(e) = result {
                        row.error = Some(e.to_string());
                    }
                    row
                })
                .collect()
        })
        .collect();
    let rows: Vec<ManifestRow> = rows.into_iter().flatten().collect();
    let mut text = config.header.as_ref().map(|h| format!("# {h}\n")).unwrap_or_default();
    for row in &rows {
        text.push_str(&serde_json::to_string(row)?);
        text.push('\n');
    }
    atomic_write(&config.out_dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(rows)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = std::fs::read_to_string(path)?;
    text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).map(|l| Ok(serde_json::from_str(l)?)).collect()
}

/// Inserts `# text` after the PBM magic line.
fn pbm_with_comment(pbm: &[u8], text: &str) -> Vec<u8> {
    let mut out = pbm[..3].to_vec();
    out.extend_from_slice(format!("# {text}\n").as_bytes());
    out.extend_from_slice(&pbm[3..]);
    out
}

/// Resolves a manifest-relative path.
pub fn resolve(manifest: &Path, relative: &str) -> PathBuf {
    manifest.parent().unwrap_or_else(|| Path::new(".")).join(relative)
}

/// Number of successfully generated cases per `(q1, q2)` cell.
pub fn coverage(rows: &[ManifestRow]) -> BTreeMap<(u8, u8), usize> {
    let mut out = BTreeMap::new();
    for r in rows.iter().filter(|r| r.error.is_none()) {
        *out.entry((r.q1, r.q2)).or_insert(0) += 1;
    }
    out
}
