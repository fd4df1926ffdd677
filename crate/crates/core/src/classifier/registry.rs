//! Quality-aware and oblivious model lookup, stored as
//! `<root>/<key>/<q2|oblivious>.model`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::ClassifierModel;
use crate::detect::DetectorKind;
use crate::error::{invalid, Error, Result};
use crate::util::atomic_write;

pub const MODEL_EXT: &str = "model";
pub const OBLIVIOUS_STEM: &str = "oblivious";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierMode {
    #[default]
    Aware,
    Oblivious,
}

impl fmt::Display for ClassifierMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Aware => "aware",
            Self::Oblivious => "oblivious",
        })
    }
}

impl FromStr for ClassifierMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aware" => Ok(Self::Aware),
            "oblivious" => Ok(Self::Oblivious),
            _ => Err(invalid(format!("classifier mode must be aware or oblivious, got {s:?}"))),
        }
    }
}

/// Registry directory name for a classifier-backed detector: `a` for the
/// single-scale detector, the window size for the multi-scale ones.
pub fn registry_key(kind: DetectorKind) -> Option<String> {
    match kind {
        DetectorKind::FdfA => Some("a".into()),
        DetectorKind::FdfW(w) => Some(w.to_string()),
        _ => None,
    }
}

#[derive(Clone, Debug, Default)]
struct Entry {
    aware: BTreeMap<u8, ClassifierModel>,
    oblivious: Option<ClassifierModel>,
}

#[derive(Clone, Debug, Default)]
pub struct ClassifierRegistry {
    entries: BTreeMap<String, Entry>,
}

impl ClassifierRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Files the model under its metadata's target quality, or as the
    /// oblivious model when it has none.
    pub fn insert(&mut self, key: &str, model: ClassifierModel) {
        let e = self.entries.entry(key.to_string()).or_default();
        match model.meta.target_q2 {
            Some(q) => {
                e.aware.insert(q, model);
            }
            None => e.oblivious = Some(model),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn aware_qualities(&self, key: &str) -> Vec<u8> {
        self.entries.get(key).map(|e| e.aware.keys().copied().collect()).unwrap_or_default()
    }

    pub fn has_oblivious(&self, key: &str) -> bool {
        self.entries.get(key).is_some_and(|e| e.oblivious.is_some())
    }

    pub fn select(&self, key: &str, q2: u8, mode: ClassifierMode) -> Result<&ClassifierModel> {
        select_classifier(self, key, q2, mode)
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        for (key, e) in &self.entries {
            let dir = root.join(key);
            std::fs::create_dir_all(&dir)?;
            for (q, m) in &e.aware {
                atomic_write(&dir.join(format!("{q}.{MODEL_EXT}")), &m.to_bytes())?;
            }
            if let Some(m) = &e.oblivious {
                atomic_write(&dir.join(format!("{OBLIVIOUS_STEM}.{MODEL_EXT}")), &m.to_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads every `<key>/<stem>.model` below `root`. A missing root gives
    /// an empty registry.
    pub fn load(root: &Path) -> Result<Self> {
        let mut reg = Self::new();
        if !root.is_dir() {
            return Ok(reg);
        }
        let mut dirs: Vec<_> = std::fs::read_dir(root)?.collect::<std::io::Result<_>>()?;
        dirs.sort_by_key(|d| d.file_name());
        for d in dirs.into_iter().filter(|d| d.path().is_dir()) {
            let key = d.file_name().to_string_lossy().into_owned();
            let mut files: Vec<_> = std::fs::read_dir(d.path())?.collect::<std::io::Result<_>>()?;
            files.sort_by_key(|f| f.file_name());
            for f in files {
                let path = f.path();
                if path.extension().and_then(|e| e.to_str()) != Some(MODEL_EXT) {
                    continue;
                }
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                let mut model = ClassifierModel::from_bytes(&std::fs::read(&path)?)
                    .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
                model.meta.target_q2 = if stem == OBLIVIOUS_STEM {
                    None
                } else {
                    Some(
                        stem.parse()
                            .map_err(|_| Error::Malformed(format!("unexpected model file {}", path.display())))?,
                    )
                };
                reg.insert(&key, model);
            }
        }
        Ok(reg)
    }
}

/// Aware mode picks the model trained for the nearest quality, ties going
/// to the higher one; oblivious mode returns the single oblivious model.
pub fn select_classifier<'a>(
    r: &'a ClassifierRegistry,
    key: &str,
    q2: u8,
    mode: ClassifierMode,
) -> Result<&'a ClassifierModel> {
    let e = r.entries.get(key).ok_or_else(|| Error::NotFound(format!("no classifier for {key}")))?;
    match mode {
        ClassifierMode::Aware => e
            .aware
            .iter()
            .min_by_key(|(&q, _)| (q.abs_diff(q2), std::cmp::Reverse(q)))
            .map(|(_, m)| m)
            .ok_or_else(|| Error::NotFound(format!("no quality-aware classifier for {key}"))),
        ClassifierMode::Oblivious => {
            e.oblivious.as_ref().ok_or_else(|| Error::NotFound(format!("no oblivious classifier for {key}")))
        }
    }
}
