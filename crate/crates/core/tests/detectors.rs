use forgeloc::classifier::{generate_samples, train_classifier, ModelMeta, TrainSpec, TrainingPlan};
use forgeloc::detect::cda::{chi_square_distance, estimate_single_histogram, observed_histograms};
use forgeloc::detect::fdf::{extract_features, sliding_window_map, FeatureLayout};
use forgeloc::detect::{bag_map, bgcda_map, cda_map, icda_map};
use forgeloc::jpeg::{encode, parse_jpeg, QualityFactor, QuantizedJpeg};
use forgeloc::maps::{TamperingMap, WindowRect};
use forgeloc::synth::fixtures::{natural_image, synthetic_source};
use forgeloc::synth::{synthesize_case, GroundTruthMask, QualityRange, SynthOptions};

fn q(v: u8) -> QualityFactor {
    QualityFactor::new(v).unwrap()
}

fn forged(seed: u64, size: u32, q1: u8, q2: u8) -> (QuantizedJpeg, GroundTruthMask) {
    let src = synthetic_source("t", size, size, seed, false);
    let c = synthesize_case(&src.original, &src.tampered, &src.mask, q(q1), q(q2), &SynthOptions::default()).unwrap();
    (parse_jpeg(&c.jpeg).unwrap(), c.mask)
}

fn region_means(m: &TamperingMap, gt: &GroundTruthMask) -> (f64, f64) {
    let (mut t, mut nt, mut a, mut na) = (0.0, 0.0, 0.0, 0.0);
    for (&s, &g) in m.scores().iter().zip(gt.cells()) {
        if g {
            t += s;
            nt += 1.0;
        } else {
            a += s;
            na += 1.0;
        }
    }
    (t / nt, a / na)
}

#[test]
fn single_estimate_matches_singly_compressed_histograms() {
    let freqs: Vec<usize> = (1..=6).collect();
    for seed in 0..3 {
        let j = parse_jpeg(&encode(&natural_image(256, 256, 40 + seed), q(95)).unwrap()).unwrap();
        let obs = observed_histograms(&j, &freqs);
        let est = estimate_single_histogram(&j, &freqs).unwrap();
        for (o, e) in obs.iter().zip(&est) {
            assert!(chi_square_distance(o, e) < 0.1, "seed {seed} freq {}: {}", o.freq(), chi_square_distance(o, e));
        }
    }
}

#[test]
fn double_compression_leaves_empty_bins() {
    let freqs: Vec<usize> = (1..=6).collect();
    let img = natural_image(256, 256, 77);
    let first = parse_jpeg(&encode(&img, q(80)).unwrap()).unwrap();
    let twice = encode(&forgeloc::jpeg::decode_to_pixels(&first), q(95)).unwrap();
    let j = parse_jpeg(&twice).unwrap();
    let obs = observed_histograms(&j, &freqs);
    let est = estimate_single_histogram(&j, &freqs).unwrap();
    let mut holes = 0;
    for (o, e) in obs.iter().zip(&est) {
        assert!(chi_square_distance(o, e) > 0.2);
        holes += o.iter().filter(|&(x, c)| c == 0 && e.count(x) > 30).count();
    }
    assert!(holes >= 5, "{holes}");
}

#[test]
fn histogram_detectors_separate_regions() {
    let (j, gt) = forged(11, 256, 80, 95);
    for m in [cda_map(&j, 15).unwrap(), icda_map(&j, 15).unwrap(), bgcda_map(&j, 6).unwrap(), bag_map(&j).unwrap()] {
        let (t, a) = region_means(&m, &gt);
        assert!(t > a, "{}: tampered {t} authentic {a}", m.detector());
    }
}

#[test]
fn trained_fdf_model_separates_regions() {
    let mut plan = TrainingPlan::new(64, FeatureLayout::MULTI_SCALE, Some(95), 3);
    plan.per_class = 400;
    plan.grid = QualityRange { min: 60, max: 100 };
    let model =
        train_classifier(&generate_samples(&plan).unwrap(), &TrainSpec::default(), ModelMeta::default()).unwrap();
    for seed in [21, 22] {
        let (j, gt) = forged(seed, 256, 80, 95);
        let m = sliding_window_map(&j, 64, 8, &model, "fdf-64").unwrap();
        let (t, a) = region_means(&m, &gt);
        assert!(t > a + 0.1, "tampered {t} authentic {a}");
        assert!(m.scores().iter().all(|s| (0.0..=1.0).contains(s)));
    }
}

#[test]
fn first_digits_decay_in_low_modes() {
    let j = parse_jpeg(&encode(&natural_image(256, 256, 5), q(90)).unwrap()).unwrap();
    let f =
        extract_features(&j, WindowRect { x: 0, y: 0, width: 256, height: 256 }, FeatureLayout::MULTI_SCALE).unwrap();
    for m in 0..3 {
        let d = f.mode(m);
        assert!(d[0] > d[1] && d[1] > d[2], "mode {}: {d:?}", m + 1);
    }
}

#[test]
fn features_ignore_block_order_within_window() {
    let mut j = parse_jpeg(&encode(&natural_image(64, 64, 6), q(85)).unwrap()).unwrap();
    let rect = WindowRect::square(0, 0, 64);
    let before = extract_features(&j, rect, FeatureLayout::MULTI_SCALE).unwrap();
    let luma = &mut j.components_mut()[0];
    for (a, b) in [((0, 0), (7, 7)), ((3, 1), (2, 6)), ((5, 5), (0, 4))] {
        let ba = *luma.block(a.0, a.1);
        let bb = *luma.block(b.0, b.1);
        *luma.block_mut(a.0, a.1) = bb;
        *luma.block_mut(b.0, b.1) = ba;
    }
    assert_eq!(extract_features(&j, rect, FeatureLayout::MULTI_SCALE).unwrap(), before);
}
