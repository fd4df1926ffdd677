//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashMap;
use std::time::Instant;

use forgeloc::classifier::{generate_samples, train_classifier, ClassifierModel, ModelMeta, TrainSpec, TrainingPlan};
use forgeloc::detect::cda::{estimate_single_histogram, observed_histograms};
use forgeloc::detect::fdf::{extract_features, sliding_window_map, FeatureLayout};
use forgeloc::detect::{bag_map, icda_map, n_factor};
use forgeloc::eval::{evaluate_map, threshold_sweep, EvalRecord, N_THRESHOLDS};
use forgeloc::fusion::{fuse_em, fused_map, FusionParams};
use forgeloc::jpeg::{
    decode_to_pixels, emit, encode, parse_jpeg, quality_to_tables, quantize, ChromaSubsampling, QualityFactor,
    QuantTable, QuantizedJpeg,
};
use forgeloc::maps::{TamperingMap, WindowRect};
use forgeloc::synth::fixtures::{natural_image, natural_image_rgb, synthetic_source};
use forgeloc::synth::{synthesize_case, GroundTruthMask, SynthOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn q(v: u8) -> QualityFactor {
    QualityFactor::new(v).unwrap()
}

/// A forgery case: the parsed JPEG and its block ground truth.
struct Case {
    q1: u8,
    q2: u8,
    jpeg: QuantizedJpeg,
    mask: GroundTruthMask,
}

fn forgery(seed: u64, size: u32, q1: u8, q2: u8) -> Case {
    let src = synthetic_source(format!("a{seed}"), size, size, seed, false);
    let c = synthesize_case(&src.original, &src.tampered, &src.mask, q(q1), q(q2), &SynthOptions::default()).unwrap();
    Case { q1, q2, jpeg: parse_jpeg(&c.jpeg).unwrap(), mask: c.mask }
}

fn corpus(seed: u64, size: u32, pairs: &[(u8, u8)]) -> Vec<Case> {
    pairs.par_iter().enumerate().map(|(i, &(q1, q2))| forgery(seed + i as u64, size, q1, q2)).collect()
}

fn max_f1(m: &TamperingMap, c: &Case, cleanup: bool) -> f64 {
    EvalRecord::new("", "", c.q1, c.q2, false, evaluate_map(m, &c.mask, cleanup).unwrap()).max_f1
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fdf_model(window: usize, target_q2: Option<u8>, per_class: usize, seed: u64) -> ClassifierModel {
    let plan = TrainingPlan { per_class, ..TrainingPlan::new(window, FeatureLayout::MULTI_SCALE, target_q2, seed) };
    let meta = ModelMeta { window, target_q2, seed, ..ModelMeta::default() };
    train_classifier(&generate_samples(&plan).unwrap(), &TrainSpec { seed, ..TrainSpec::default() }, meta).unwrap()
}

/// Quality-aware FDF models keyed by second quality.
fn aware_models(window: usize, qualities: &[u8], per_class: usize, seed: u64) -> HashMap<u8, ClassifierModel> {
    qualities.iter().map(|&q2| (q2, fdf_model(window, Some(q2), per_class, seed))).collect()
}

type Verdict = (bool, String);

fn parser_oracle() -> Verdict {
    let start = Instant::now();
    let mut exact = 0;
    for i in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        let (w, h) = (rng.gen_range(8..200), rng.gen_range(8..200));
        let quality = rng.gen_range(1..=100);
        let p = if i % 4 == 0 { natural_image_rgb(w, h, i) } else { natural_image(w, h, i) };
        let (l, c) = quality_to_tables(q(quality));
        let j = quantize(&p, l, c, ChromaSubsampling::S444).unwrap();
        if parse_jpeg(&emit(&j).unwrap()).unwrap() == j {
            exact += 1;
        }
    }
    let hand = hand_block_matches();
    let secs = start.elapsed().as_secs_f64();
    (exact == 20 && hand && secs < 10.0, format!("{exact}/20 round trips, hand block {hand}, {secs:.2} s"))
}

/// One gray 8x8 block with an all-ones table and two minimal Huffman tables.
/// DC: code `0` -> category 3. AC: `00` -> run 0 size 1, `01` -> run 1
/// size 2, `10` -> EOB. Bits `0 101 | 00 0 | 01 11 | 10` pad with ones,
/// giving DC 5, AC[1] = -1 and AC[3] = 3 in zig-zag order.
fn hand_block_matches() -> bool {
    let mut s = vec![0xFF, 0xD8, 0xFF, 0xDB, 0x00, 0x43, 0x00];
    s.extend_from_slice(&[1u8; 64]);
    s.extend_from_slice(&[0xFF, 0xC0, 0x00, 0x0B, 8, 0, 8, 0, 8, 1, 1, 0x11, 0]);
    s.extend_from_slice(&[0xFF, 0xC4, 0x00, 0x14, 0x00, 1]);
    s.extend_from_slice(&[0u8; 15]);
    s.push(3);
    s.extend_from_slice(&[0xFF, 0xC4, 0x00, 0x16, 0x10, 0, 3]);
    s.extend_from_slice(&[0u8; 14]);
    s.extend_from_slice(&[0x01, 0x12, 0x00]);
    s.extend_from_slice(&[0xFF, 0xDA, 0x00, 0x08, 1, 1, 0x00, 0, 63, 0, 0x50, 0xF7, 0xFF, 0xD9]);
    let Ok(j) = parse_jpeg(&s) else { return false };
    let mut want = [0i16; 64];
    want[0] = 5;
    want[1] = -1;
    // zig-zag position 3 is row 2, column 0
    want[16] = 3;
    j.components()[0].block(0, 0) == &want && j.components()[0].table == QuantTable::from_zigzag([1; 64]).unwrap()
}

fn requantization_oracle() -> Verdict {
    let start = Instant::now();
    const U: i64 = 10_000;
    let mut mismatches = 0;
    let mut checked = 0u64;
    for s1 in 1..=16u16 {
        for s2 in 1..=16u16 {
            let lo = (-U as f64 * f64::from(s1) / f64::from(s2)).round() as i64;
            let hi = (U as f64 * f64::from(s1) / f64::from(s2)).round() as i64;
            let mut counts = vec![0u64; (hi - lo + 1) as usize];
            for u in -U..=U {
                let x = (u as f64 * f64::from(s1) / f64::from(s2)).round() as i64;
                counts[(x - lo) as usize] += 1;
            }
            // the outermost bins may have preimages beyond the enumerated range
            for x in lo + 1..hi {
                checked += 1;
                if n_factor(s1, s2, x as i32) != counts[(x - lo) as usize] {
                    mismatches += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (mismatches == 0 && secs < 60.0, format!("{checked} values, {mismatches} mismatches, {secs:.2} s"))
}

fn double_compression_signature() -> Verdict {
    let freqs: Vec<usize> = (1..=6).collect();
    let holes: Vec<usize> = (0..10u64)
        .into_par_iter()
        .map(|i| {
            let first = parse_jpeg(&encode(&natural_image(256, 256, 300 + i), q(80)).unwrap()).unwrap();
            let j = parse_jpeg(&encode(&decode_to_pixels(&first), q(95)).unwrap()).unwrap();
            let obs = observed_histograms(&j, &freqs);
            let est = estimate_single_histogram(&j, &freqs).unwrap();
            obs.iter().zip(&est).map(|(o, e)| o.iter().filter(|&(x, c)| c == 0 && e.count(x) > 30).count()).sum()
        })
        .collect();
    let passing = holes.iter().filter(|&&h| h >= 5).count();
    (passing == 10, format!("{passing}/10 fixtures with >= 5 empty bins, counts {holes:?}"))
}

fn metric_identities() -> Verdict {
    let gt = GroundTruthMask::new(16, 16, (0..256).map(|i| (i % 16) < 6 && i / 16 > 3).collect()).unwrap();
    let chance = TamperingMap::uniform(16, 16, 0.5, "chance").unwrap();
    let c = EvalRecord::new("", "", 0, 0, false, evaluate_map(&chance, &gt, false).unwrap());
    let chance_ok = (c.auc_01 - 0.05).abs() <= 1e-3;

    let perfect =
        TamperingMap::new(16, 16, gt.cells().iter().map(|&g| if g { 1.0 } else { 0.0 }).collect(), "p").unwrap();
    let p = EvalRecord::new("", "", 0, 0, false, evaluate_map(&perfect, &gt, true).unwrap());
    let perfect_ok = p.max_f1 == 1.0 && p.auc_005 == 1.0 && p.auc_01 == 1.0 && p.auc_02 == 1.0;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    for _ in 0..100 {
        let (w, h) = (rng.gen_range(2..20), rng.gen_range(2..20));
        let m = TamperingMap::new(w, h, (0..w * h).map(|_| rng.gen_range(0.0..=1.0)).collect(), "r").unwrap();
        let g = GroundTruthMask::new(w, h, (0..w * h).map(|_| rng.gen_bool(0.3)).collect()).unwrap();
        let sweep = threshold_sweep(&m);
        for pair in sweep.windows(2) {
            if pair[1].cells().iter().zip(pair[0].cells()).any(|(&hi, &lo)| hi && !lo) {
                violations += 1;
            }
        }
        for cleanup in [false, true] {
            let s = evaluate_map(&m, &g, cleanup).unwrap();
            assert_eq!(s.len(), N_THRESHOLDS);
            violations += s.windows(2).filter(|w| w[1].fp_rate > w[0].fp_rate || w[1].tp_rate > w[0].tp_rate).count();
        }
    }
    (
        chance_ok && perfect_ok && violations == 0,
        format!(
            "chance AUC_0.1 {:.6}, perfect F1 {} AUC {}, {violations} nesting/monotonicity violations",
            c.auc_01, p.max_f1, p.auc_01
        ),
    )
}

fn fusion_degeneracies() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let random_map = |rng: &mut ChaCha8Rng, w: usize, h: usize| {
        TamperingMap::new(w, h, (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect(), "r").unwrap()
    };
    let plain = FusionParams { alpha: 0.0, beta: 0.0, delta: 0.0, rho: 0.0 };

    let mut threshold_mismatch = 0;
    for _ in 0..20 {
        let m = random_map(&mut rng, 17, 13);
        let r = fuse_em(std::slice::from_ref(&m), &plain, 20).unwrap();
        let want: Vec<bool> = m.scores().iter().map(|&s| s >= 0.5).collect();
        threshold_mismatch += usize::from(r.decision.cells() != want.as_slice());
    }

    let mut energy_increases = 0;
    for i in 0..50 {
        let (w, h) = (rng.gen_range(4..24), rng.gen_range(4..24));
        let n = rng.gen_range(1..5);
        let maps: Vec<TamperingMap> = (0..n).map(|_| random_map(&mut rng, w, h)).collect();
        let p = FusionParams {
            alpha: rng.gen_range(-1.5..1.5),
            beta: rng.gen_range(0.0..2.25),
            delta: rng.gen_range(0.0..0.15),
            rho: if i % 2 == 0 { 0.0 } else { 0.05 },
        };
        let r = fuse_em(&maps, &p, 20).unwrap();
        for sweeps in &r.energy {
            energy_increases += sweeps.windows(2).filter(|e| e[1] > e[0] + 1e-9 * e[0].abs().max(1.0)).count();
        }
    }

    let mut asymmetric = 0;
    for _ in 0..10 {
        let m = random_map(&mut rng, 12, 12);
        for p in [plain, FusionParams::FDF_F_F1, FusionParams::FDF_F_AUC] {
            let one = fuse_em(std::slice::from_ref(&m), &p, 20).unwrap();
            let three = fuse_em(&[m.clone(), m.clone(), m.clone()], &p, 20).unwrap();
            let equal_weights = three.weights.iter().all(|&w| w == three.weights[0]);
            asymmetric += usize::from(one.decision != three.decision || !equal_weights);
        }
    }
    (
        threshold_mismatch == 0 && energy_increases == 0 && asymmetric == 0,
        format!("{threshold_mismatch} threshold mismatches, {energy_increases} energy increases, {asymmetric} asymmetric fusions"),
    )
}

fn easy_region_benchmark() -> Verdict {
    let start = Instant::now();
    let pairs: Vec<(u8, u8)> = (0..40).map(|i| ([80, 85][i % 2], [95, 98][(i / 2) % 2])).collect();
    let cases = corpus(6000, 256, &pairs);
    let scores: Vec<(f64, f64)> = cases
        .par_iter()
        .map(|c| (max_f1(&icda_map(&c.jpeg, 15).unwrap(), c, true), max_f1(&bag_map(&c.jpeg).unwrap(), c, true)))
        .collect();
    let icda = mean(&scores.iter().map(|s| s.0).collect::<Vec<_>>());
    let bag = mean(&scores.iter().map(|s| s.1).collect::<Vec<_>>());
    let secs = start.elapsed().as_secs_f64();
    (icda >= 0.5 && bag <= icda && secs < 600.0, format!("I-CDA {icda:.3}, BAG {bag:.3}, {secs:.1} s"))
}

/// Cases at q1 = 85: thirty on the diagonal band, thirty on the far band.
fn scope_corpus() -> Vec<Case> {
    let pairs: Vec<(u8, u8)> =
        (0..60).map(|i| (85, if i < 30 { [85, 86, 87][i % 3] } else { [95, 98][i % 2] })).collect();
    corpus(7000, 256, &pairs)
}

fn fdf_scores(cases: &[Case], models: &HashMap<u8, ClassifierModel>) -> Vec<f64> {
    cases
        .par_iter()
        .map(|c| max_f1(&sliding_window_map(&c.jpeg, 64, 8, &models[&c.q2], "fdf-64").unwrap(), c, true))
        .collect()
}

fn reliability_scope(cases: &[Case], aware: &HashMap<u8, ClassifierModel>) -> Verdict {
    let f1 = fdf_scores(cases, aware);
    let (mut diag, mut far) = (Vec::new(), Vec::new());
    for (c, s) in cases.iter().zip(&f1) {
        if c.q2 - c.q1 <= 2 {
            diag.push(*s)
        } else {
            far.push(*s)
        }
    }
    let (d, f) = (mean(&diag), mean(&far));
    (
        f - d >= 0.15,
        format!("far band {f:.3} ({} cases), diagonal band {d:.3} ({} cases), gap {:.3}", far.len(), diag.len(), f - d),
    )
}

fn aware_vs_oblivious(cases: &[Case], aware: &HashMap<u8, ClassifierModel>, oblivious: &ClassifierModel) -> Verdict {
    let a = mean(&fdf_scores(cases, aware));
    let everywhere: HashMap<u8, ClassifierModel> = aware.keys().map(|&k| (k, oblivious.clone())).collect();
    let o = mean(&fdf_scores(cases, &everywhere));
    (a >= o, format!("aware {a:.3}, oblivious {o:.3} over {} held-out cases", cases.len()))
}

fn fusion_benefit() -> Verdict {
    let windows = [16usize, 32, 48, 64];
    let models: Vec<HashMap<u8, ClassifierModel>> =
        windows.iter().map(|&w| aware_models(w, &[90, 95], 1000, 900 + w as u64)).collect();
    let pairs: Vec<(u8, u8)> = (0..24).map(|i| ([80, 85][i % 2], [90, 95][(i / 2) % 2])).collect();
    let cases = corpus(8000, 256, &pairs);
    let per_case: Vec<(Vec<f64>, f64)> = cases
        .par_iter()
        .map(|c| {
            let maps: Vec<TamperingMap> = windows
                .iter()
                .zip(&models)
                .map(|(&w, m)| sliding_window_map(&c.jpeg, w, 8, &m[&c.q2], "fdf").unwrap())
                .collect();
            let singles = maps.iter().map(|m| max_f1(m, c, true)).collect();
            let fused = fused_map(&maps, &FusionParams::FDF_F_F1, 20).unwrap();
            (singles, max_f1(&fused, c, false))
        })
        .collect();
    let single_means: Vec<f64> =
        (0..windows.len()).map(|k| mean(&per_case.iter().map(|r| r.0[k]).collect::<Vec<_>>())).collect();
    let (best_k, best) =
        single_means.iter().copied().enumerate().fold((0, f64::MIN), |a, (k, v)| if v > a.1 { (k, v) } else { a });
    let fused = mean(&per_case.iter().map(|r| r.1).collect::<Vec<_>>());
    (
        fused >= best - 0.02,
        format!("fused {fused:.3}, best single fdf-{} {best:.3}, singles {single_means:.3?}", windows[best_k]),
    )
}

fn benford_property() -> Verdict {
    let monotone = (0..10u64)
        .filter(|&i| {
            let quality = 55 + 5 * i as u8;
            let j = parse_jpeg(&encode(&natural_image(256, 256, 500 + i), q(quality)).unwrap()).unwrap();
            let f = extract_features(&j, WindowRect::square(0, 0, 256), FeatureLayout::MULTI_SCALE).unwrap();
            let d = f.mode(0);
            d[0] >= d[1] && d[1] >= d[2] && d[2] >= d[3]
        })
        .count();
    (monotone >= 9, format!("{monotone}/10 fixtures non-increasing over digits 1-4"))
}

fn main() {
    let mut all = true;
    let mut run = |n: usize, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let (pass, detail) = f();
        all &= pass;
        println!(
            "criterion {n:2} {:<28} {}  {detail} [{:.1} s]",
            name,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    };
    run(1, "parser oracle", &mut parser_oracle);
    run(2, "requantization oracle", &mut requantization_oracle);
    run(3, "double-compression signature", &mut double_compression_signature);
    run(4, "metric identities", &mut metric_identities);
    run(5, "fusion degeneracies", &mut fusion_degeneracies);
    run(6, "easy-region benchmark", &mut easy_region_benchmark);

    let scope = scope_corpus();
    let aware = aware_models(64, &[85, 86, 87, 95, 98], 2000, 77);
    run(7, "reliability scope", &mut || reliability_scope(&scope, &aware));
    run(8, "aware vs oblivious", &mut || {
        let oblivious = fdf_model(64, None, 2000, 77);
        aware_vs_oblivious(&scope, &aware, &oblivious)
    });
    run(9, "fusion benefit", &mut fusion_benefit);
    run(10, "first-digit decay", &mut benford_property);
    if !all {
        std::process::exit(1);
    }
}
