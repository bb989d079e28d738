mod common;

use std::collections::BTreeMap;

use common::*;
use faultrepair::config::RunConfig;
use faultrepair::datamodel::{split_dataset, Label, LabelSpace, SplitMode, SplitRatio, StateSet};
use faultrepair::evaluation::{performance, run_trials};
use faultrepair::localization::TaskDistribution;
use faultrepair::repair::allocate;
use faultrepair::slicing::slice_direction;
use faultrepair::{PredictionRecord, Sample};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn samples(n: usize) -> Vec<Sample> {
    (0..n)
        .map(|i| Sample {
            index: i * 2,
            features: vec![i as f64],
            label: Label::Discrete(i % 3),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn split_is_a_partition(n in 10usize..2000, seed in any::<u64>(), shuffled in any::<bool>()) {
        let data = samples(n);
        let mode = if shuffled { SplitMode::Shuffled } else { SplitMode::Contiguous };
        let s = split_dataset(&data, SplitRatio::default(), seed, mode).unwrap();
        let sizes = s.sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        for (size, r) in sizes.iter().zip([0.6, 0.2, 0.1, 0.1]) {
            prop_assert!((*size as f64 - n as f64 * r).abs() <= 1.0);
        }
        let mut all: Vec<usize> = [&s.train, &s.observe, &s.acquire, &s.test]
            .iter()
            .flat_map(|p| p.iter().map(|x| x.index))
            .collect();
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), n);
        for part in [&s.train, &s.observe, &s.acquire, &s.test] {
            prop_assert!(part.windows(2).all(|w| w[0].index < w[1].index));
        }
    }

    #[test]
    fn allocation_respects_capacity(
        n in 0usize..600,
        cells in prop::collection::vec((0.0f64..1.0, 0usize..200), 1..6),
    ) {
        let weights: Vec<f64> = cells.iter().map(|c| c.0).collect();
        let sizes: Vec<usize> = cells.iter().map(|c| c.1).collect();
        prop_assume!(weights.iter().sum::<f64>() > 0.0);
        let a = allocate(n, &weights, &sizes);
        prop_assert_eq!(a.iter().sum::<usize>(), n.min(sizes.iter().sum()));
        for (x, s) in a.iter().zip(&sizes) {
            prop_assert!(x <= s);
        }
    }

    #[test]
    fn floored_distribution_is_a_distribution(
        weights in prop::collection::vec(0u32..50, 2..6),
        fraction in 0.0f64..=1.0,
    ) {
        prop_assume!(weights.iter().any(|&w| w > 0));
        let map: BTreeMap<String, f64> = weights.iter().enumerate().map(|(i, &w)| (format!("t{i}"), w as f64)).collect();
        let k = weights.len() as f64;
        let floor = fraction / k;
        let d = TaskDistribution::from_weights(map).unwrap().with_floor(floor).unwrap();
        let total: f64 = d.probabilities.values().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for p in d.probabilities.values() {
            prop_assert!(*p >= floor - 1e-15);
        }
    }

    #[test]
    fn direction_rotates_with_displacement(angle in 0.0f64..360.0, r in 0.5f64..5.0) {
        let a = angle.to_radians();
        let cur = [r * a.cos(), r * a.sin()];
        let label = slice_direction(Some(&[0.0, 0.0][..]), &cur, 0.1, 8).unwrap();
        let names = ["E", "NE", "N", "NW", "W", "SW", "S", "SE"];
        let bin = names.iter().position(|n| *n == label).unwrap();
        let centre = bin as f64 * 45.0;
        let off = ((angle - centre + 540.0) % 360.0) - 180.0;
        prop_assert!(off.abs() <= 22.5 + 1e-9);
    }
}

#[test]
fn random_guessing_accuracy_is_a_third() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let stream: Vec<PredictionRecord> = (0..10_000)
        .map(|i| PredictionRecord {
            index: i,
            input: vec![],
            output: Label::Discrete(rng.random_range(0..3)),
            truth: Some(Label::Discrete(i % 3)),
        })
        .collect();
    assert!((performance(&stream).unwrap() - 1.0 / 3.0).abs() < 0.02);
}

#[test]
fn csv_source_needs_declared_states() {
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(repo_root().join("configs/skewed.json")).unwrap()).unwrap();
    v["dataset"] = serde_json::json!({"csv": {"path": "data.csv"}});
    let err = RunConfig::from_json(&v.to_string()).unwrap().resolve().unwrap_err().to_string();
    assert!(err.contains("needs `states`"), "{err}");
    // every state reference fails separately
    assert!(err.contains("train_thinning"), "{err}");
}

#[test]
fn continuous_pipeline_end_to_end() {
    let mut cfg = RunConfig::from_path(&repo_root().join("configs/cursor.json")).unwrap();
    cfg.trials = 3;
    let exp = cfg.resolve().unwrap();
    assert_eq!(exp.delta_err, Some(0.03));
    let data = exp.load_dataset(&repo_root()).unwrap();
    assert!(matches!(data.space, LabelSpace::Continuous { dim: 2 }));
    let (report, artifacts) = run_trials(&exp, &data, 1).unwrap();
    assert_eq!(report.metric, "mse");
    assert_eq!(report.outcomes.len(), 3);
    for (o, a) in report.outcomes.iter().zip(&artifacts) {
        let t = o.report().expect("trial succeeded");
        let a = a.as_ref().unwrap();
        assert_eq!(t.observe_events, a.events.len());
        // observation events never leak into the test part
        assert!(a.events.iter().all(|e| a.slices.iter().any(|s| s.index == e.end)));
        for m in std::iter::once(&t.baseline).chain(t.strategies.iter().map(|s| &s.metrics)) {
            assert_eq!(m.summed, m.counts.values().sum::<usize>());
            assert!(m.performance >= 0.0);
            for p in m.precision.values().flatten() {
                assert!((0.0..=1.0).contains(p));
            }
        }
        let families: Vec<&str> = t.localization.entries.iter().map(|e| e.family.as_str()).collect();
        assert!(families.contains(&"direction") && families.contains(&"quadrant"));
    }
}

#[test]
fn states_resolve_by_name() {
    let s = StateSet::new(["Rest", "LeftFist", "RightFist"]).unwrap();
    assert_eq!(s.id("RightFist").unwrap(), 2);
    assert!(s.id("Sideways").is_err());
}
