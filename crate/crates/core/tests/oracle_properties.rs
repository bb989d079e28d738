mod common;

use common::*;
use faultrepair::datamodel::Label;
use faultrepair::heuristics::{apply_corrections, HeuristicConfig};
use faultrepair::oracles::{run_oracles, FaultType, OracleEngine};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn discrete_streaming_matches_brute_force(
        seed in any::<u64>(),
        len in 1usize..400,
        states in 2usize..5,
        p in 0.05f64..0.9,
        window in 2usize..16,
        k in 2usize..8,
    ) {
        let stream = discrete_stream(seed, len, states, p);
        let cfg = discrete_config(states, &[(0, 1), (1, 0)], window, k);
        let enabled = set(&[FaultType::IllegalTransition, FaultType::TemporalInconsistencyDiscrete]);
        let events = run_oracles(&stream, &cfg, &enabled).unwrap();
        prop_assert_eq!(triples(&events), brute_force(&stream, &cfg, &enabled));
    }

    #[test]
    fn continuous_streaming_matches_brute_force(
        seed in any::<u64>(),
        len in 1usize..400,
        window in 2usize..16,
        tv in 0.1f64..3.0,
        step in 0.05f64..0.8,
    ) {
        let stream = continuous_stream(seed, len);
        let cfg = continuous_config(window, tv, step);
        let enabled = set(&[
            FaultType::TemporalInconsistencyContinuous,
            FaultType::RapidMotion,
            FaultType::OutOfBounds,
        ]);
        let events = run_oracles(&stream, &cfg, &enabled).unwrap();
        prop_assert_eq!(triples(&events), brute_force(&stream, &cfg, &enabled));
    }

    #[test]
    fn corrections_only_touch_recorded_positions(
        seed in any::<u64>(),
        len in 2usize..300,
        p in 0.05f64..0.9,
        window in 2usize..12,
        k in 2usize..6,
    ) {
        let stream = discrete_stream(seed, len, 3, p);
        let cfg = discrete_config(3, &[(1, 2), (2, 1)], window, k);
        let enabled = set(&[FaultType::IllegalTransition, FaultType::TemporalInconsistencyDiscrete]);
        let events = run_oracles(&stream, &cfg, &enabled).unwrap();
        let (fixed, records) = apply_corrections(&stream, &events, &cfg, &enabled, &HeuristicConfig::default()).unwrap();
        prop_assert_eq!(fixed.len(), stream.len());
        let mut recorded = vec![false; len];
        for r in &records {
            recorded[r.position] = true;
            prop_assert_eq!(&stream[r.position].output, &r.original);
            prop_assert_eq!(&fixed[r.position].output, &r.corrected);
            prop_assert_ne!(&r.original, &r.corrected);
        }
        for t in 0..len {
            prop_assert_eq!(fixed[t].index, stream[t].index);
            if !recorded[t] {
                prop_assert_eq!(&fixed[t].output, &stream[t].output);
            }
            // an unflagged position only changes when its predecessor did
            let flagged = events.iter().any(|e| e.covers(stream[t].index) && e.end == stream[t].index);
            if recorded[t] && !flagged {
                prop_assert!(t > 0 && recorded[t - 1]);
            }
        }
        let again = run_oracles(&fixed, &cfg, &set(&[FaultType::IllegalTransition])).unwrap();
        prop_assert!(again.is_empty());
    }

    #[test]
    fn engine_rejects_out_of_order(seed in any::<u64>(), len in 3usize..50, at in 1usize..50) {
        let mut stream = discrete_stream(seed, len, 3, 0.3);
        let at = at % (len - 1) + 1;
        stream[at].index = stream[at - 1].index;
        let cfg = discrete_config(3, &[], 4, 2);
        let mut engine = OracleEngine::new(&cfg, &set(&[FaultType::TemporalInconsistencyDiscrete])).unwrap();
        let mut failed = false;
        for r in &stream {
            if engine.push(r).is_err() {
                failed = true;
                break;
            }
        }
        prop_assert!(failed);
    }
}

#[test]
fn continuous_corrections_stay_in_bounds_and_slow() {
    for seed in 0..50 {
        let stream = continuous_stream(seed, 300);
        let cfg = continuous_config(6, 0.8, 0.3);
        let enabled = set(&[
            FaultType::OutOfBounds,
            FaultType::RapidMotion,
            FaultType::TemporalInconsistencyContinuous,
        ]);
        let events = run_oracles(&stream, &cfg, &enabled).unwrap();
        let (fixed, _) = apply_corrections(&stream, &events, &cfg, &enabled, &HeuristicConfig::default()).unwrap();
        let again = run_oracles(&fixed, &cfg, &set(&[FaultType::OutOfBounds, FaultType::RapidMotion])).unwrap();
        assert!(again.is_empty(), "seed {seed}: {again:?}");
        for r in &fixed {
            assert!(matches!(r.output, Label::Continuous(_)));
        }
    }
}
