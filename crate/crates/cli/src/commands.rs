//! Subcommand bodies. Each unit of work (case, detector, model) is skipped
//! when its output exists, unless `--force` is given.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use forgeloc::classifier::{
    generate_samples, registry_key, train_classifier, ClassifierRegistry, ModelMeta, TrainSpec, TrainingPlan,
    MODEL_EXT, OBLIVIOUS_STEM,
};
use forgeloc::detect::fdf::FeatureLayout;
use forgeloc::detect::{run_detector, DetectorKind, DetectorSetup, FDF_A_WINDOW};
use forgeloc::eval::{
    aggregate_by_detector, aggregate_by_quality, evaluate_map, read_records, roc_points, write_f1_heatmap, EvalRecord,
};
use forgeloc::fusion::{fused_map, grid_search, GridCase};
use forgeloc::jpeg::{parse_jpeg, PixelImage, QuantizedJpeg};
use forgeloc::maps::TamperingMap;
use forgeloc::synth::fixtures::{synthetic_source, SourceTriple};
use forgeloc::synth::{
    build_corpus, coverage, read_manifest, resolve, CaseSource, CorpusConfig, FileSource, GroundTruthMask, ManifestRow,
    PixelMask, QualityPlan, QualityRange, SynthOptions, MANIFEST_FILE,
};
use forgeloc::util::child_seed;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{append_errors, append_timing, read_timing, with_header, write_file, ErrorRow, Layout, TimingRow};
use crate::CliError;

/// Units attempted and units that failed in one command.
#[derive(Debug, Default)]
pub struct Outcome {
    pub total: usize,
    pub failed: usize,
}

pub struct Context {
    pub cfg: RunConfig,
    pub force: bool,
    pub layout: Layout,
    pub header: String,
}

impl Context {
    pub fn new(cfg: RunConfig, force: bool) -> Self {
        let layout = Layout { root: cfg.out_dir.clone() };
        let header = cfg.header();
        Self { cfg, force, layout, header }
    }

    fn manifest_path(&self) -> PathBuf {
        self.cfg.corpus.manifest.clone().unwrap_or_else(|| self.layout.corpus_dir().join(MANIFEST_FILE))
    }

    /// Manifest rows that were generated without error.
    fn cases(&self) -> Result<(PathBuf, Vec<ManifestRow>), CliError> {
        let path = self.manifest_path();
        if !path.is_file() {
            return Err(CliError::Fatal(format!("manifest {} not found; run synth first", path.display())));
        }
        let rows = read_manifest(&path)?;
        Ok((path, rows.into_iter().filter(|r| r.error.is_none()).collect()))
    }

    fn skip(&self, path: &Path) -> bool {
        !self.force && path.exists()
    }

    fn errors(&self, command: &str, rows: &[ErrorRow]) -> Result<(), CliError> {
        append_errors(&self.layout.root, &self.header, command, rows)
    }
}

fn error_row(case_id: &str, detector: impl ToString, e: impl ToString) -> ErrorRow {
    ErrorRow { case_id: case_id.to_string(), detector: detector.to_string(), message: e.to_string() }
}

enum Source {
    File(FileSource),
    Synthetic(SourceTriple),
}

impl CaseSource for Source {
    fn id(&self) -> &str {
        match self {
            Self::File(s) => s.id(),
            Self::Synthetic(s) => s.id(),
        }
    }

    fn load(&self) -> forgeloc::Result<(PixelImage, PixelImage, PixelMask)> {
        match self {
            Self::File(s) => s.load(),
            Self::Synthetic(s) => s.load(),
        }
    }
}

pub fn synth(ctx: &Context) -> Result<Outcome, CliError> {
    let seed = ctx.cfg.require_seed()?;
    let c = &ctx.cfg.corpus;
    let mut sources: Vec<Source> = c.sources.iter().cloned().map(Source::File).collect();
    sources.extend((0..c.synthetic).map(|i| {
        let id = format!("syn{i:04}");
        Source::Synthetic(synthetic_source(
            id,
            c.synthetic_size,
            c.synthetic_size,
            child_seed(seed, i as u64),
            c.synthetic_color,
        ))
    }));
    if sources.is_empty() {
        return Err(CliError::Usage("no corpus sources (corpus.sources or corpus.synthetic)".into()));
    }
    let out_dir = ctx.layout.corpus_dir();
    if ctx.force && out_dir.join("cases").is_dir() {
        std::fs::remove_dir_all(out_dir.join("cases"))?;
    }
    let plan = if c.pairs.is_empty() {
        QualityPlan::Uniform(QualityRange { min: c.q_min, max: c.q_max })
    } else {
        QualityPlan::Pairs(c.pairs.clone())
    };
    let config = CorpusConfig {
        out_dir: out_dir.clone(),
        seed,
        cases_per_source: c.cases_per_source,
        plan,
        synth: SynthOptions { block_threshold: c.block_threshold, ..SynthOptions::default() },
        header: Some(ctx.header.clone()),
    };
    let rows = build_corpus(&config, &sources)?;
    let mut cov = String::from("q1,q2,cases\n");
    for ((q1, q2), n) in coverage(&rows) {
        cov.push_str(&format!("{q1},{q2},{n}\n"));
    }
    write_file(&out_dir.join("coverage.csv"), with_header(&ctx.header, &cov).as_bytes())?;
    let errors: Vec<ErrorRow> =
        rows.iter().filter_map(|r| r.error.as_ref().map(|e| error_row(&r.case_id, "-", e))).collect();
    ctx.errors("synth", &errors)?;
    println!("{} cases in {}", rows.len() - errors.len(), out_dir.join(MANIFEST_FILE).display());
    Ok(Outcome { total: rows.len(), failed: errors.len() })
}

pub fn train(ctx: &Context) -> Result<Outcome, CliError> {
    let seed = ctx.cfg.require_seed()?;
    let t = &ctx.cfg.train;
    let mut kinds: Vec<DetectorKind> = t.windows.iter().map(|&w| DetectorKind::FdfW(w)).collect();
    if t.fdf_a {
        kinds.push(DetectorKind::FdfA);
    }
    let mut targets: Vec<Option<u8>> = t.qualities.iter().copied().map(Some).collect();
    if t.oblivious {
        targets.push(None);
    }
    let spec = TrainSpec { family: t.family, c: t.c, gamma: t.gamma, holdout: t.holdout, seed, ..TrainSpec::default() };
    let mut outcome = Outcome::default();
    let mut errors = Vec::new();
    for kind in kinds {
        let key = registry_key(kind).expect("classifier-backed detector");
        let (window, layout) = match kind {
            DetectorKind::FdfA => (FDF_A_WINDOW, FeatureLayout::SINGLE_SCALE),
            DetectorKind::FdfW(w) => (w, FeatureLayout::MULTI_SCALE),
            _ => unreachable!(),
        };
        // all targets of one detector share their fixture images
        let fixture_seed = child_seed(seed, if kind == DetectorKind::FdfA { 1 << 20 } else { window as u64 });
        for &target in &targets {
            outcome.total += 1;
            let stem = target.map_or(OBLIVIOUS_STEM.to_string(), |q| q.to_string());
            let path = ctx.layout.models_dir().join(&key).join(format!("{stem}.{MODEL_EXT}"));
            if ctx.skip(&path) {
                continue;
            }
            let plan = TrainingPlan {
                per_class: t.per_class,
                grid: QualityRange { min: t.q_min, max: t.q_max },
                image_size: t.image_size,
                windows_per_image: t.windows_per_image,
                ..TrainingPlan::new(window, layout, target, fixture_seed)
            };
            let meta =
                ModelMeta { window, target_q2: target, seed, provenance: ctx.header.clone(), ..ModelMeta::default() };
            let start = Instant::now();
            let result = generate_samples(&plan)
                .and_then(|s| train_classifier(&s, &spec, meta))
                .map_err(CliError::from)
                .and_then(|m| write_file(&path, &m.to_bytes()));
            match result {
                Ok(()) => println!("{} ({:.1} s)", path.display(), start.elapsed().as_secs_f64()),
                Err(e) => {
                    outcome.failed += 1;
                    errors.push(error_row("-", format!("{kind}/{stem}"), e));
                }
            }
        }
    }
    ctx.errors("train", &errors)?;
    Ok(outcome)
}

fn load_jpeg(manifest: &Path, row: &ManifestRow) -> Result<QuantizedJpeg, CliError> {
    let bytes = std::fs::read(resolve(manifest, &row.jpeg_path))?;
    Ok(parse_jpeg(&bytes)?)
}

fn load_mask(manifest: &Path, row: &ManifestRow) -> Result<GroundTruthMask, CliError> {
    let bytes = std::fs::read(resolve(manifest, &row.mask_path))?;
    Ok(GroundTruthMask::from_pbm(&bytes)?)
}

fn load_map(ctx: &Context, kind: DetectorKind, case_id: &str) -> Result<TamperingMap, CliError> {
    let path = ctx.layout.map_path(kind, case_id);
    let bytes = std::fs::read(&path).map_err(|e| CliError::Fatal(format!("{}: {e}", path.display())))?;
    Ok(TamperingMap::from_bytes(&bytes, kind.to_string())?.0)
}

type UnitResult = Result<Option<TimingRow>, ErrorRow>;

/// Runs `per_case` over all cases in parallel and records timing and
/// error rows in case order.
fn run_cases(
    ctx: &Context,
    command: &str,
    rows: &[ManifestRow],
    per_case: impl Fn(&ManifestRow) -> Vec<UnitResult> + Sync + Send,
) -> Result<Outcome, CliError> {
    let results: Vec<Vec<UnitResult>> = rows.par_iter().map(&per_case).collect();
    let mut timing = Vec::new();
    let mut errors = Vec::new();
    let mut outcome = Outcome::default();
    for r in results.into_iter().flatten() {
        outcome.total += 1;
        match r {
            Ok(Some(t)) => timing.push(t),
            Ok(None) => {}
            Err(e) => errors.push(e),
        }
    }
    outcome.failed = errors.len();
    append_timing(&ctx.layout.root, &ctx.header, &timing)?;
    ctx.errors(command, &errors)?;
    println!("{command}: {} units, {} computed, {} failed", outcome.total, timing.len(), outcome.failed);
    Ok(outcome)
}

pub fn detect(ctx: &Context) -> Result<Outcome, CliError> {
    let (manifest, rows) = ctx.cases()?;
    let d = &ctx.cfg.detect;
    let registry = if d.detectors.iter().any(|k| k.needs_model()) {
        ClassifierRegistry::load(&ctx.layout.models_dir())?
    } else {
        ClassifierRegistry::new()
    };
    let setup = DetectorSetup {
        registry: Some(&registry),
        mode: d.mode,
        stride: d.stride,
        fuse_windows: d.fuse_windows.clone(),
        fusion: ctx.cfg.fusion.params()?,
        max_iters: ctx.cfg.fusion.max_iters,
    };
    let tag = ctx.cfg.map_tag();
    run_cases(ctx, "detect", &rows, |row| {
        let pending: Vec<DetectorKind> =
            d.detectors.iter().copied().filter(|&k| !ctx.skip(&ctx.layout.map_path(k, &row.case_id))).collect();
        let mut out: Vec<UnitResult> = (pending.len()..d.detectors.len()).map(|_| Ok(None)).collect();
        if pending.is_empty() {
            return out;
        }
        let jpeg = match load_jpeg(&manifest, row) {
            Ok(j) => j,
            Err(e) => {
                out.extend(pending.iter().map(|&k| Err(error_row(&row.case_id, k, &e))));
                return out;
            }
        };
        for kind in pending {
            let start = Instant::now();
            let result = run_detector(kind, &jpeg, &setup).map_err(CliError::from).and_then(|m| {
                let seconds = start.elapsed().as_secs_f64();
                write_file(&ctx.layout.map_path(kind, &row.case_id), &m.to_bytes(tag)).map(|()| seconds)
            });
            out.push(match result {
                Ok(seconds) => Ok(Some(TimingRow { case_id: row.case_id.clone(), detector: kind, seconds })),
                Err(e) => Err(error_row(&row.case_id, kind, e)),
            });
        }
        out
    })
}

pub fn fuse(ctx: &Context) -> Result<Outcome, CliError> {
    let (_, rows) = ctx.cases()?;
    let params = ctx.cfg.fusion.params()?;
    let windows = &ctx.cfg.detect.fuse_windows;
    if windows.is_empty() {
        return Err(CliError::Usage("detect.fuse_windows is empty".into()));
    }
    let tag = ctx.cfg.map_tag();
    run_cases(ctx, "fuse", &rows, |row| {
        let path = ctx.layout.map_path(DetectorKind::FdfFuse, &row.case_id);
        if ctx.skip(&path) {
            return vec![Ok(None)];
        }
        let start = Instant::now();
        let result = windows
            .iter()
            .map(|&w| load_map(ctx, DetectorKind::FdfW(w), &row.case_id))
            .collect::<Result<Vec<_>, _>>()
            .and_then(|maps| Ok(fused_map(&maps, &params, ctx.cfg.fusion.max_iters)?))
            .and_then(|m| {
                let seconds = start.elapsed().as_secs_f64();
                write_file(&path, &m.to_bytes(tag)).map(|()| seconds)
            });
        vec![match result {
            Ok(seconds) => {
                Ok(Some(TimingRow { case_id: row.case_id.clone(), detector: DetectorKind::FdfFuse, seconds }))
            }
            Err(e) => Err(error_row(&row.case_id, DetectorKind::FdfFuse, e)),
        }]
    })
}

fn eval_detectors(ctx: &Context) -> Vec<DetectorKind> {
    if ctx.cfg.eval.detectors.is_empty() {
        ctx.cfg.detect.detectors.clone()
    } else {
        ctx.cfg.eval.detectors.clone()
    }
}

fn evaluate_unit(
    ctx: &Context,
    manifest: &Path,
    row: &ManifestRow,
    kind: DetectorKind,
) -> Result<EvalRecord, CliError> {
    let map = load_map(ctx, kind, &row.case_id)?;
    let gt = load_mask(manifest, row)?;
    // fused maps are already spatially regularized
    let cleanup = ctx.cfg.eval.cleanup && kind != DetectorKind::FdfFuse;
    let samples = evaluate_map(&map, &gt, cleanup)?;
    let negative = !gt.cells().iter().any(|&c| c);
    Ok(EvalRecord::new(&row.case_id, &kind.to_string(), row.q1, row.q2, negative, samples))
}

fn read_record_file(path: &Path) -> Result<Vec<EvalRecord>, CliError> {
    let file = std::fs::File::open(path)?;
    Ok(read_records(std::io::BufReader::new(file))?)
}

pub fn eval(ctx: &Context) -> Result<Outcome, CliError> {
    let (manifest, rows) = ctx.cases()?;
    let detectors = eval_detectors(ctx);
    let outcome = run_cases(ctx, "eval", &rows, |row| {
        detectors
            .iter()
            .map(|&kind| {
                let path = ctx.layout.record_path(kind, &row.case_id);
                if ctx.skip(&path) {
                    return Ok(None);
                }
                evaluate_unit(ctx, &manifest, row, kind)
                    .and_then(|r| {
                        let line = serde_json::to_string(&r).map_err(CliError::fatal)?;
                        write_file(&path, with_header(&ctx.header, &format!("{line}\n")).as_bytes())
                    })
                    .map(|()| None)
                    .map_err(|e| error_row(&row.case_id, kind, e))
            })
            .collect()
    })?;
    // the combined store indexes whatever per-unit records exist
    let mut text = format!("# {}\n", ctx.header);
    let mut n = 0;
    for row in &rows {
        for &kind in &detectors {
            let path = ctx.layout.record_path(kind, &row.case_id);
            if path.is_file() {
                for r in read_record_file(&path)? {
                    text.push_str(&serde_json::to_string(&r).map_err(CliError::fatal)?);
                    text.push('\n');
                    n += 1;
                }
            }
        }
    }
    write_file(&ctx.layout.records_file(), text.as_bytes())?;
    println!("{n} records in {}", ctx.layout.records_file().display());
    Ok(outcome)
}

pub fn gridsearch(ctx: &Context) -> Result<Outcome, CliError> {
    let dir = ctx.layout.grid_dir();
    let ranked_path = dir.join("ranked.csv");
    if ctx.skip(&ranked_path) {
        println!("{} exists", ranked_path.display());
        return Ok(Outcome::default());
    }
    let g = &ctx.cfg.gridsearch;
    let windows = &ctx.cfg.detect.fuse_windows;
    if g.candidates == 0 || g.candidates > windows.len() {
        return Err(CliError::Usage(format!("gridsearch.candidates must be in 1..={}", windows.len())));
    }
    let (manifest, mut rows) = ctx.cases()?;
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(ctx.cfg.seed.unwrap_or(0)));
    rows.truncate(g.cases);
    let mut cases = Vec::new();
    let mut errors = Vec::new();
    for row in &rows {
        let loaded = windows[..g.candidates]
            .iter()
            .map(|&w| load_map(ctx, DetectorKind::FdfW(w), &row.case_id))
            .collect::<Result<Vec<_>, _>>()
            .and_then(|candidates| Ok(GridCase { candidates, mask: load_mask(&manifest, row)? }));
        match loaded {
            Ok(c) => cases.push(c),
            Err(e) => errors.push(error_row(&row.case_id, DetectorKind::FdfFuse, e)),
        }
    }
    ctx.errors("gridsearch", &errors)?;
    if cases.is_empty() {
        return Err(CliError::Fatal("no grid-search case has all candidate maps; run detect first".into()));
    }
    let result = grid_search(&g.grid, &cases, g.metric, ctx.cfg.fusion.max_iters)?;
    let mut ranked = Vec::new();
    result.write_csv(&mut ranked)?;
    let mut profiles = Vec::new();
    result.write_profiles_csv(&mut profiles)?;
    write_file(&dir.join("profiles.csv"), with_header(&ctx.header, &String::from_utf8_lossy(&profiles)).as_bytes())?;
    write_file(&ranked_path, with_header(&ctx.header, &String::from_utf8_lossy(&ranked)).as_bytes())?;
    let best = &result.ranked[0];
    println!(
        "best {} = {:.4} at alpha {} beta {} delta {} rho {} over {} cases",
        g.metric.name(),
        best.value,
        best.params.alpha,
        best.params.beta,
        best.params.delta,
        best.params.rho,
        cases.len()
    );
    Ok(Outcome { total: rows.len(), failed: errors.len() })
}

fn dir_size(path: &Path) -> u64 {
    std::fs::read_dir(path)
        .map(|it| {
            it.filter_map(|e| e.ok()).filter_map(|e| e.metadata().ok()).filter(|m| m.is_file()).map(|m| m.len()).sum()
        })
        .unwrap_or(0)
}

/// Bytes of model files a detector depends on.
fn storage_bytes(ctx: &Context, kind: DetectorKind) -> Option<u64> {
    let keys: Vec<String> = match kind {
        DetectorKind::FdfFuse => ctx.cfg.detect.fuse_windows.iter().map(|w| w.to_string()).collect(),
        k => registry_key(k).into_iter().collect(),
    };
    if keys.is_empty() {
        return None;
    }
    Some(keys.iter().map(|k| dir_size(&ctx.layout.models_dir().join(k))).sum())
}

pub fn report(ctx: &Context) -> Result<Outcome, CliError> {
    let dir = ctx.layout.report_dir();
    let summary_path = dir.join("summary.csv");
    if ctx.skip(&summary_path) {
        println!("{} exists", summary_path.display());
        return Ok(Outcome::default());
    }
    let records_file = ctx.layout.records_file();
    if !records_file.is_file() {
        return Err(CliError::Fatal(format!("{} not found; run eval first", records_file.display())));
    }
    let records = read_record_file(&records_file)?;
    let r = &ctx.cfg.report;
    if r.q_min == 0 || r.q_min > r.q_max || r.q_max > 100 || r.scale == 0 {
        return Err(CliError::Usage("report needs 1 <= q_min <= q_max <= 100 and scale >= 1".into()));
    }

    let mut seconds: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (_, det, s) in read_timing(&ctx.layout.root)? {
        let e = seconds.entry(det).or_default();
        e.0 += s;
        e.1 += 1;
    }

    let summaries = aggregate_by_detector(&records);
    let mut summary =
        String::from("detector,cases,mean_max_f1,mean_auc_005,mean_auc_01,mean_auc_02,mean_seconds,storage_mb\n");
    for (det, s) in &summaries {
        let secs = seconds.get(det).map_or(String::new(), |(t, n)| format!("{:.4}", t / *n as f64));
        let storage = det
            .parse::<DetectorKind>()
            .ok()
            .and_then(|k| storage_bytes(ctx, k))
            .map_or(String::new(), |b| format!("{:.3}", b as f64 / 1e6));
        summary.push_str(&format!(
            "{det},{},{:.4},{:.4},{:.4},{:.4},{secs},{storage}\n",
            s.cases, s.mean_max_f1, s.mean_auc_005, s.mean_auc_01, s.mean_auc_02
        ));
    }

    for det in summaries.keys() {
        let own: Vec<EvalRecord> = records.iter().filter(|x| &x.detector == det).cloned().collect();
        let cells = aggregate_by_quality(&own);
        let mut csv = String::from("q1,q2,cases,mean_max_f1\n");
        for ((q1, q2), c) in &cells {
            csv.push_str(&format!("{q1},{q2},{},{:.4}\n", c.count, c.mean_max_f1));
        }
        write_file(&dir.join(format!("cells_{det}.csv")), with_header(&ctx.header, &csv).as_bytes())?;

        let mut pgm = Vec::new();
        write_f1_heatmap(&cells, r.q_min, r.q_max, r.scale, &mut pgm)?;
        let mut tagged = b"P5\n".to_vec();
        tagged.extend_from_slice(format!("# {}\n", ctx.header).as_bytes());
        tagged.extend_from_slice(&pgm[3..]);
        write_file(&dir.join(format!("heatmap_{det}.pgm")), &tagged)?;

        let mut roc = String::from("threshold,fp_rate,tp_rate\n");
        for (t, fp, tp) in roc_points(&records, det) {
            roc.push_str(&format!("{t:.4},{fp:.6},{tp:.6}\n"));
        }
        write_file(&dir.join(format!("roc_{det}.csv")), with_header(&ctx.header, &roc).as_bytes())?;
    }
    write_file(&summary_path, with_header(&ctx.header, &summary).as_bytes())?;
    print!("{summary}");
    Ok(Outcome { total: summaries.len(), failed: 0 })
}

pub fn show_config(ctx: &Context) -> Result<Outcome, CliError> {
    let text = toml::to_string(&ctx.cfg).map_err(CliError::fatal)?;
    println!("# {}\n{text}", ctx.header);
    Ok(Outcome::default())
}
