use forgeloc::eval::{auc, clean_binary_map, confusion, evaluate_map, threshold_sweep, EvalRecord, Pchip, RocSample};
use forgeloc::maps::TamperingMap;
use forgeloc::synth::GroundTruthMask;
use proptest::prelude::*;

fn map_and_mask() -> impl Strategy<Value = (TamperingMap, GroundTruthMask)> {
    (2usize..12, 2usize..12).prop_flat_map(|(w, h)| {
        (proptest::collection::vec(0.0f64..=1.0, w * h), proptest::collection::vec(any::<bool>(), w * h))
            .prop_map(move |(s, g)| (TamperingMap::new(w, h, s, "p").unwrap(), GroundTruthMask::new(w, h, g).unwrap()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn thresholds_nest((m, _) in map_and_mask()) {
        let sweep = threshold_sweep(&m);
        for pair in sweep.windows(2) {
            for (hi, lo) in pair[1].cells().iter().zip(pair[0].cells()) {
                prop_assert!(!hi || *lo);
            }
        }
    }

    #[test]
    fn roc_rates_fall_with_threshold((m, gt) in map_and_mask(), cleanup in any::<bool>()) {
        let s = evaluate_map(&m, &gt, cleanup).unwrap();
        // cleaned maps still nest: a kept component sits inside a kept
        // component of every lower threshold
        for w in s.windows(2) {
            prop_assert!(w[1].fp_rate <= w[0].fp_rate && w[1].tp_rate <= w[0].tp_rate);
        }
        let r = EvalRecord::new("c", "p", 80, 90, false, s);
        for a in [r.auc_005, r.auc_01, r.auc_02] {
            prop_assert!((0.0..=1.0).contains(&a));
        }
        prop_assert!(r.samples.iter().all(|x| x.f1 <= r.max_f1));
    }

    #[test]
    fn cleanup_never_adds_false_positives((m, gt) in map_and_mask(), k in 0usize..39) {
        let b = &threshold_sweep(&m)[k];
        let before = confusion(b, &gt).unwrap();
        let after = confusion(&clean_binary_map(b), &gt).unwrap();
        prop_assert!(after.fp <= before.fp);
        prop_assert!(after.tp + after.fp <= before.tp + before.fp);
    }

    #[test]
    fn evaluation_is_pure((m, gt) in map_and_mask()) {
        prop_assert_eq!(evaluate_map(&m, &gt, true).unwrap(), evaluate_map(&m, &gt, true).unwrap());
    }
}

#[test]
fn constant_map_scores_chance() {
    let gt = GroundTruthMask::new(10, 10, (0..100).map(|i| i % 3 == 0).collect()).unwrap();
    let m = TamperingMap::uniform(10, 10, 0.5, "c").unwrap();
    let r = EvalRecord::new("c", "c", 80, 90, false, evaluate_map(&m, &gt, false).unwrap());
    assert!((r.auc_01 - 0.05).abs() < 1e-6);
    assert!((r.auc_02 - 0.1).abs() < 1e-6);
}

#[test]
fn chance_curve_closed_form() {
    let samples: Vec<RocSample> = (1..40)
        .map(|k| k as f64 / 40.0)
        .map(|t| RocSample { threshold: t, fp_rate: 1.0 - t, tp_rate: 1.0 - t, f1: 0.0 })
        .collect();
    let c = Pchip::from_samples(&samples);
    assert!((auc(&c, 0.1) - 0.05).abs() < 1e-9);
    assert!((auc(&c, 0.05) - 0.025).abs() < 1e-9);
}
