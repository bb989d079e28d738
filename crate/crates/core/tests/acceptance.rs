//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use common::*;
use faultrepair::config::{Experiment, RunConfig};
use faultrepair::datamodel::largest_remainder;
use faultrepair::evaluation::{run_trials, ExperimentReport, StreamMetrics, TrialArtifacts, TrialReport};
use faultrepair::heuristics::{apply_corrections, HeuristicConfig};
use faultrepair::localization::{chi_square_survival, chi_squared_test, group_by_family, localize, IndependenceOutcome};
use faultrepair::oracles::{run_oracles, FaultEvent, FaultType};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let mut mismatches = 0;
    for seed in 0..100u64 {
        let d = discrete_stream(seed, 1000, 4, 0.1 + 0.008 * seed as f64);
        let cfg = discrete_config(4, &[(0, 3), (3, 0)], 10, 4);
        let en = set(&[FaultType::IllegalTransition, FaultType::TemporalInconsistencyDiscrete]);
        mismatches += (triples(&run_oracles(&d, &cfg, &en).unwrap()) != brute_force(&d, &cfg, &en)) as usize;

        let c = continuous_stream(seed, 1000);
        let cfg = continuous_config(10, 0.9, 0.3);
        let en = set(&[FaultType::TemporalInconsistencyContinuous]);
        mismatches += (triples(&run_oracles(&c, &cfg, &en).unwrap()) != brute_force(&c, &cfg, &en)) as usize;
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        mismatches == 0 && secs < 10.0,
        format!("200 streams x 1000, {mismatches} mismatches, {secs:.2} s"),
    )
}

fn recheck_guarantee() -> Verdict {
    let mut residual = 0;
    let mut touched_unrecorded = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..1000u64 {
        let window = rng.random_range(3..12);
        let (stream, cfg, en, recheck) = if i % 2 == 0 {
            let s = discrete_stream(i, 300, 3, rng.random_range(0.05..0.8));
            let cfg = discrete_config(3, &[(1, 2), (2, 1)], window, rng.random_range(2..window));
            let en = set(&[FaultType::IllegalTransition, FaultType::TemporalInconsistencyDiscrete]);
            (s, cfg, en, set(&[FaultType::IllegalTransition]))
        } else {
            let s = continuous_stream(i, 300);
            let cfg = continuous_config(window, rng.random_range(0.3..2.0), rng.random_range(0.1..0.6));
            let en = set(&[
                FaultType::OutOfBounds,
                FaultType::RapidMotion,
                FaultType::TemporalInconsistencyContinuous,
            ]);
            (s, cfg, en, set(&[FaultType::OutOfBounds]))
        };
        let events = run_oracles(&stream, &cfg, &en).unwrap();
        let (fixed, records) = apply_corrections(&stream, &events, &cfg, &en, &HeuristicConfig::default()).unwrap();
        residual += run_oracles(&fixed, &cfg, &recheck).unwrap().len();
        let recorded: Vec<usize> = records.iter().map(|r| r.position).collect();
        for t in 0..stream.len() {
            if !recorded.contains(&t) && fixed[t] != stream[t] {
                touched_unrecorded += 1;
            }
        }
    }
    verdict(
        residual == 0 && touched_unrecorded == 0,
        format!("1000 streams, {residual} residual events, {touched_unrecorded} unrecorded changes"),
    )
}

fn chi_square_correctness() -> Verdict {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for x in [0.0, 1.0, 2.0, 5.0, 10.0] {
        let e = (chi_square_survival(x, 2.0).unwrap() - (-x / 2.0f64).exp()).abs();
        worst = worst.max(e);
        ok &= e < 1e-12;
    }
    let (stat, p) = match chi_squared_test(&[vec![10, 20], vec![20, 10]]).unwrap() {
        IndependenceOutcome::Tested(r) => (r.statistic, r.p_value),
        _ => (f64::NAN, f64::NAN),
    };
    let oracle = chi_square_tail_numeric(stat, 1.0);
    ok &= (stat - 20.0 / 3.0).abs() < 1e-9 && (p - 0.00982).abs() < 1e-4 && (p - oracle).abs() < 1e-4;
    let proportional = [vec![vec![1, 2], vec![2, 4]], vec![vec![3, 6, 9], vec![1, 2, 3]], vec![vec![5, 10], vec![5, 10], vec![15, 30]]];
    for t in &proportional {
        match chi_squared_test(t).unwrap() {
            IndependenceOutcome::Tested(r) => ok &= r.statistic == 0.0,
            _ => ok = false,
        }
    }
    verdict(
        ok,
        format!("df2 max err {worst:.1e}, chi2 {stat:.9}, p {p:.5} (integration {oracle:.5}), proportional = 0"),
    )
}

fn skewed() -> Experiment {
    RunConfig::from_path(&repo_root().join("configs/skewed.json")).unwrap().resolve().unwrap()
}

fn trials(report: &ExperimentReport) -> Vec<&TrialReport> {
    report.outcomes.iter().filter_map(|o| o.report()).collect()
}

fn localization_sensitivity(report: &ExperimentReport, artifacts: &[Option<TrialArtifacts>]) -> Verdict {
    // IllegalTransition involves LeftFist/RightFist only and the thinned
    // RightFist task carries the highest fault rate.
    let mut rejected = 0;
    let mut concentrated = 0;
    for t in trials(report) {
        let entry = t
            .localization
            .entries
            .iter()
            .find(|e| e.fault_type == FaultType::IllegalTransition && e.family == "task")
            .unwrap();
        rejected += entry.test.rejects(0.05) as usize;
        let rate = |row: &str| {
            let i = entry.table.rows.iter().position(|r| r == row).unwrap();
            let [p, a] = entry.table.counts[i];
            p as f64 / (p + a).max(1) as f64
        };
        concentrated += (rate("RightFist") > rate("LeftFist") && rate("RightFist") > rate("Rest")) as usize;
    }

    let mut null_rejections = 0;
    let mut null_runs = 0;
    for a in artifacts.iter().flatten() {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed ^ 0xA5A5);
        let events: Vec<FaultEvent> = a
            .slices
            .iter()
            .filter(|s| s.family == "task" && rng.random_bool(0.05))
            .map(|s| FaultEvent {
                fault_type: FaultType::IllegalTransition,
                start: s.index,
                end: s.index,
                oracle_id: "injected".into(),
                detail: String::new(),
            })
            .collect();
        let fam = group_by_family(&a.slices, &BTreeMap::new());
        let r = localize(&events, &fam, &set(&[FaultType::IllegalTransition]), None, 0.0).unwrap();
        null_rejections += r.entries[0].test.rejects(0.05) as usize;
        null_runs += 1;
    }
    verdict(
        rejected >= 9 && concentrated >= 9 && null_runs == 10 && null_rejections <= 2,
        format!(
            "skewed rejects {rejected}/10 (RightFist highest rate {concentrated}/10), null rejects {null_rejections}/{null_runs}"
        ),
    )
}

fn metrics<'a>(t: &'a TrialReport, name: &str) -> &'a StreamMetrics {
    if name == "baseline" {
        return &t.baseline;
    }
    &t.strategies.iter().find(|s| s.strategy.name() == name).unwrap().metrics
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn repair_efficacy(report: &ExperimentReport, secs: f64) -> Verdict {
    let ts = trials(report);
    let summed = |n: &str| mean(ts.iter().map(|t| metrics(t, n).summed as f64));
    let acc = |n: &str| mean(ts.iter().map(|t| metrics(t, n).performance));
    let rel = mean(ts.iter().map(|t| {
        let b = metrics(t, "baseline").summed as f64;
        (metrics(t, "fault_based").summed as f64 - b) / b
    }));
    let (fb, nat, base) = (summed("fault_based"), summed("natural"), summed("baseline"));
    let acc_drop = acc("baseline") - acc("fault_based");
    verdict(
        ts.len() == 10 && rel <= -0.25 && fb <= nat && acc_drop <= 0.01 && secs < 120.0,
        format!(
            "faults baseline {base:.1}, fault_based {fb:.1} ({:+.1}%), natural {nat:.1}; accuracy {:.4} -> {:.4}; {secs:.1} s",
            rel * 100.0,
            acc("baseline"),
            acc("fault_based")
        ),
    )
}

fn ablation(report: &ExperimentReport) -> Verdict {
    let ts = trials(report);
    let co = mean(ts.iter().map(|t| metrics(t, "corrected_only").summed as f64));
    let fb = mean(ts.iter().map(|t| metrics(t, "fault_based").summed as f64));
    verdict(co >= fb, format!("corrected_only {co:.1} vs fault_based {fb:.1}"))
}

fn protocol(report: &ExperimentReport, exp: &Experiment) -> Verdict {
    let ts = trials(report);
    let n = match &exp.config.dataset {
        faultrepair::config::DatasetSource::SyntheticDiscrete(s) => s.length,
        _ => unreachable!(),
    };
    let ratio = [6.0, 2.0, 1.0, 1.0];
    let mut ok = ts.len() == 10 && report.outcomes.len() == 10 && report.trials == 10;
    let mut worst: f64 = 0.0;
    for t in &ts {
        for (size, r) in t.split_sizes.iter().zip(ratio) {
            let dev = (*size as f64 - n as f64 * r / 10.0).abs();
            worst = worst.max(dev);
        }
        ok &= t.split_sizes.to_vec() == largest_remainder(n, &ratio);
        let mut all = vec![&t.baseline];
        all.extend(t.strategies.iter().map(|s| &s.metrics));
        for m in all {
            ok &= m.summed == m.counts.values().sum::<usize>();
            ok &= m.frequency == m.summed as f64 / m.test_length as f64;
        }
    }
    ok &= worst <= 1.0;
    for (name, agg) in &report.aggregates {
        let m = mean(ts.iter().map(|t| metrics(t, name).summed as f64));
        ok &= (agg.summed.mean - m).abs() <= 1e-12;
    }
    verdict(ok, format!("{} trials, max split deviation {worst} samples, summed identity checked", ts.len()))
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(repo_root().join("configs/skewed.json")).unwrap()).unwrap();
    cfg["trials"] = 3.into();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    faultrepair::cli::cmd_run(&path, None, Some(&a), 1, None).unwrap();
    faultrepair::cli::cmd_run(&path, None, Some(&b), 3, None).unwrap();
    let same = std::fs::read(a.join("experiment.json")).unwrap() == std::fs::read(b.join("experiment.json")).unwrap();
    verdict(same, "3-trial run, sequential vs parallel, experiment.json compared byte for byte".into())
}

fn main() {
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    results.push(("1 oracle streaming equals brute force", oracle_equivalence()));
    results.push(("2 corrected streams re-check clean", recheck_guarantee()));
    results.push(("3 chi-squared correctness", chi_square_correctness()));

    let exp = skewed();
    let dataset = exp.load_dataset(&repo_root()).unwrap();
    let start = Instant::now();
    let (report, artifacts) = run_trials(&exp, &dataset, 1).unwrap();
    let secs = start.elapsed().as_secs_f64();
    results.push(("4 localization sensitivity", localization_sensitivity(&report, &artifacts)));
    results.push(("5 repair efficacy", repair_efficacy(&report, secs)));
    results.push(("6 corrected-only ablation", ablation(&report)));
    results.push(("7 protocol fidelity", protocol(&report, &exp)));
    results.push(("8 determinism", determinism()));

    let mut failed = 0;
    for (name, v) in &results {
        println!("criterion {name}: {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += !v.pass as usize;
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
