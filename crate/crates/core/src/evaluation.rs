//! Metrics and the multi-trial experiment runner.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DistributionSource, Experiment};
use crate::datamodel::{discard_fraction, make_stream, split_dataset, thin_state, Dataset, Label, PredictionRecord};
use crate::decoders::FittedDecoder;
use crate::error::{Error, Result};
use crate::heuristics::{apply_corrections, CorrectionRecord};
use crate::localization::{group_by_family, localize, LocalizationReport, TaskDistribution};
use crate::oracles::{count_by_type, run_oracles, FaultEvent, FaultType};
use crate::repair::{acquisition_tasks, execute_repair, AcquisitionPlan, RepairInputs, Strategy};
use crate::scalar::Scalar;
use crate::slicing::{assign_slices, SliceAssignment};
use crate::special::student_t_two_sided;

/// Summed event count over all types divided by the stream length.
pub fn fault_frequency(events: usize, len: usize) -> Result<f64> {
    if len == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(events as f64 / len as f64)
}

fn truth_at<T>(stream: &[PredictionRecord<T>], pos: usize) -> Result<&Label<T>> {
    stream[pos].truth.as_ref().ok_or(Error::MissingTruth(pos))
}

fn is_error<T: Scalar>(output: &Label<T>, truth: &Label<T>, delta_err: T) -> Result<bool> {
    match (output, truth) {
        (Label::Discrete(a), Label::Discrete(b)) => Ok(a != b),
        (Label::Continuous(a), Label::Continuous(b)) => {
            if a.len() != b.len() {
                return Err(Error::LabelKind(format!("output dim {} vs truth dim {}", a.len(), b.len())));
            }
            Ok(crate::scalar::euclidean(a, b) > delta_err)
        }
        _ => Err(Error::LabelKind("output and truth differ in kind".into())),
    }
}

/// Share of events whose range covers at least one wrong prediction;
/// `None` when there are no events.
pub fn oracle_precision<T: Scalar>(
    events: &[FaultEvent],
    stream: &[PredictionRecord<T>],
    delta_err: T,
) -> Result<Option<f64>> {
    if events.is_empty() {
        return Ok(None);
    }
    let mut hits = 0usize;
    for e in events {
        let lo = stream.partition_point(|r| r.index < e.start);
        let hi = stream.partition_point(|r| r.index <= e.end);
        if lo >= hi {
            return Err(Error::EventOutOfRange {
                start: e.start,
                end: e.end,
                len: stream.len(),
            });
        }
        let mut hit = false;
        for pos in lo..hi {
            if is_error(&stream[pos].output, truth_at(stream, pos)?, delta_err)? {
                hit = true;
                break;
            }
        }
        hits += hit as usize;
    }
    Ok(Some(hits as f64 / events.len() as f64))
}

/// Accuracy for discrete streams, per-dimension MSE for continuous ones.
pub fn performance<T: Scalar>(stream: &[PredictionRecord<T>]) -> Result<f64> {
    if stream.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let discrete = stream[0].output.is_discrete();
    let mut total = 0.0;
    for (pos, r) in stream.iter().enumerate() {
        let truth = truth_at(stream, pos)?;
        if r.output.is_discrete() != discrete || !r.output.same_kind(truth) {
            return Err(Error::LabelKind(format!("mixed label kinds at position {pos}")));
        }
        total += match (&r.output, truth) {
            (Label::Discrete(a), Label::Discrete(b)) => (a == b) as u8 as f64,
            (Label::Continuous(a), Label::Continuous(b)) => {
                if a.len() != b.len() || a.is_empty() {
                    return Err(Error::LabelKind(format!("dimension mismatch at position {pos}")));
                }
                let sq: f64 = a.iter().zip(b).map(|(&x, &y)| (x - y).to_f64_lossy().powi(2)).sum();
                sq / a.len() as f64
            }
            _ => unreachable!(),
        };
    }
    Ok(total / stream.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Efficacy {
    pub before: f64,
    pub after: f64,
}

/// Performance of the raw outputs and of the corrected outputs.
pub fn heuristic_efficacy<T: Scalar>(raw: &[PredictionRecord<T>], corrected: &[PredictionRecord<T>]) -> Result<Efficacy> {
    if raw.len() != corrected.len() {
        return Err(Error::InvalidArgument(format!(
            "raw stream has {} records, corrected {}",
            raw.len(),
            corrected.len()
        )));
    }
    Ok(Efficacy {
        before: performance(raw)?,
        after: performance(corrected)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    /// Infinite for zero-variance, non-zero-mean differences (JSON `null`).
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
    pub mean_difference: f64,
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!("paired samples of length {} and {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidArgument("paired t-test needs at least 2 pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, df, p_value: 1.0, mean_difference: 0.0 }
        } else {
            TTest { t: f64::INFINITY.copysign(mean), df, p_value: 0.0, mean_difference: mean }
        });
    }
    let t = mean / (var / n as f64).sqrt();
    Ok(TTest {
        t,
        df,
        p_value: student_t_two_sided(t, df as f64)?,
        mean_difference: mean,
    })
}

/// Test-set metrics of one decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamMetrics {
    pub counts: BTreeMap<FaultType, usize>,
    pub summed: usize,
    pub frequency: f64,
    pub performance: f64,
    /// `null` for types with no events.
    pub precision: BTreeMap<FaultType, Option<f64>>,
    pub test_length: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: Strategy,
    /// Differs from `strategy` when fault-based acquisition fell back.
    pub executed: Strategy,
    pub acquired: usize,
    pub distribution: Option<TaskDistribution>,
    pub metrics: StreamMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    /// train / observe / acquire / test sizes before thinning.
    pub split_sizes: [usize; 4],
    pub train_size: usize,
    pub observe_events: usize,
    pub corrections: usize,
    /// Heuristics applied to the baseline's test stream.
    pub heuristic_efficacy: Efficacy,
    pub baseline: StreamMetrics,
    pub strategies: Vec<StrategyReport>,
    pub localization: LocalizationReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrialOutcome {
    Ok(Box<TrialReport>),
    Failed { trial: usize, seed: u64, error: String },
}

impl TrialOutcome {
    pub fn report(&self) -> Option<&TrialReport> {
        match self {
            TrialOutcome::Ok(r) => Some(r),
            TrialOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single trial.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub summed: Summary,
    pub frequency: Summary,
    pub performance: Summary,
    pub counts: BTreeMap<FaultType, Summary>,
}

/// Strategy versus baseline (or another strategy) over the shared trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    /// Mean of `(a - b) / b` on the summed fault count, over trials with b > 0.
    pub relative_fault_change: Option<f64>,
    pub summed: TTest,
    pub performance: TTest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub trials: usize,
    pub master_seed: u64,
    /// `accuracy` or `mse`.
    pub metric: String,
    pub outcomes: Vec<TrialOutcome>,
    /// Keyed by `baseline` and strategy names, over successful trials.
    pub aggregates: BTreeMap<String, Aggregate>,
    pub comparisons: Vec<Comparison>,
}

/// Sidecar data of one trial.
#[derive(Clone, Debug)]
pub struct TrialArtifacts {
    pub trial: usize,
    pub seed: u64,
    pub events: Vec<FaultEvent>,
    pub corrections: Vec<CorrectionRecord<f64>>,
    pub slices: Vec<SliceAssignment>,
}

pub fn trial_seed(master: u64, trial: usize) -> u64 {
    master.wrapping_add(trial as u64)
}

/// Derived stream seed for one pipeline stage.
pub fn sub_seed(trial_seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = (trial_seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_DISCARD: u64 = 1;
const TAG_SPLIT: u64 = 2;
const TAG_THIN: u64 = 3;
const TAG_ACQUIRE: u64 = 4;

fn evaluate(exp: &Experiment, decoder: &FittedDecoder<f64>, test: &[crate::datamodel::Sample<f64>]) -> Result<(StreamMetrics, Vec<PredictionRecord<f64>>, Vec<FaultEvent>)> {
    let stream = make_stream(test, decoder)?;
    let events = run_oracles(&stream, &exp.oracle, &exp.enabled)?;
    let counts = count_by_type(&events, &exp.enabled);
    let summed = counts.values().sum();
    let delta = exp.delta_err.unwrap_or(0.0);
    let mut precision = BTreeMap::new();
    for &t in &exp.enabled {
        let evs: Vec<FaultEvent> = events.iter().filter(|e| e.fault_type == t).cloned().collect();
        precision.insert(t, oracle_precision(&evs, &stream, delta)?);
    }
    let metrics = StreamMetrics {
        counts,
        summed,
        frequency: fault_frequency(summed, stream.len())?,
        performance: performance(&stream)?,
        precision,
        test_length: stream.len(),
    };
    Ok((metrics, stream, events))
}

/// Runs one trial end to end.
pub fn run_trial(exp: &Experiment, dataset: &Dataset<f64>, trial: usize) -> Result<(TrialReport, TrialArtifacts)> {
    let cfg = &exp.config;
    let seed = trial_seed(cfg.seed, trial);
    let states = exp.states.as_ref();

    let kept = discard_fraction(&dataset.samples, cfg.discard_fraction, sub_seed(seed, TAG_DISCARD))?;
    let split = split_dataset(&kept, cfg.split.ratio, sub_seed(seed, TAG_SPLIT), cfg.split.mode)?;
    let train = match exp.thinning {
        Some((state, keep)) => thin_state(&split.train, state, keep, sub_seed(seed, TAG_THIN))?,
        None => split.train.clone(),
    };
    let baseline = cfg.decoder.fit(&train, &dataset.space)?;

    let observe = make_stream(&split.observe, &baseline)?;
    let events = run_oracles(&observe, &exp.oracle, &exp.enabled)?;
    let (corrected, corrections) = apply_corrections(&observe, &events, &exp.oracle, &exp.enabled, &exp.heuristics)?;

    let mut labels = BTreeMap::new();
    for f in &cfg.slices {
        labels.insert(f.id().to_string(), f.labels(states)?);
    }
    let slices = assign_slices(&corrected, &cfg.slices, states)?;
    let raw_slices = assign_slices(&observe, &cfg.slices, states)?;
    let report = localize(&events, &group_by_family(&slices, &labels), &exp.enabled, Some(&exp.task_family), cfg.acquisition.floor)?;
    let raw_report = localize(&events, &group_by_family(&raw_slices, &labels), &exp.enabled, Some(&exp.task_family), cfg.acquisition.floor)?;
    let key = match cfg.acquisition.distribution {
        DistributionSource::Pooled => "pooled".to_string(),
        DistributionSource::Type(t) => t.to_string(),
    };
    let pick = |r: &LocalizationReport| r.task_distributions.get(&key).cloned().flatten();
    let corrected_dist = pick(&report);
    let raw_dist = pick(&raw_report);

    let family = cfg
        .slices
        .iter()
        .find(|f| f.id() == exp.task_family)
        .ok_or_else(|| Error::Config(format!("task family `{}` missing", exp.task_family)))?;
    let tasks = acquisition_tasks(&split.acquire, family, states)?;
    let inputs = RepairInputs {
        acquisition_tasks: &tasks,
        corrected_distribution: corrected_dist.as_ref(),
        raw_distribution: raw_dist.as_ref(),
        observe: &observe,
        corrections: &corrections,
    };

    let (base_metrics, base_stream, base_events) = evaluate(exp, &baseline, &split.test)?;
    let (base_corrected, _) = apply_corrections(&base_stream, &base_events, &exp.oracle, &exp.enabled, &exp.heuristics)?;
    let efficacy = heuristic_efficacy(&base_stream, &base_corrected)?;

    let mut strategies = Vec::new();
    for &strategy in &cfg.acquisition.strategies {
        let plan = AcquisitionPlan {
            strategy,
            n: cfg.acquisition.n,
            distribution: None,
            seed: sub_seed(seed, TAG_ACQUIRE),
        };
        let outcome = execute_repair(&baseline, &plan, &train, &split.acquire, &inputs)?;
        let (metrics, _, _) = evaluate(exp, &outcome.decoder, &split.test)?;
        strategies.push(StrategyReport {
            strategy,
            executed: outcome.executed,
            acquired: outcome.acquired.len(),
            distribution: outcome.distribution,
            metrics,
        });
    }

    let trial_report = TrialReport {
        trial,
        seed,
        split_sizes: split.sizes(),
        train_size: train.len(),
        observe_events: events.len(),
        corrections: corrections.len(),
        heuristic_efficacy: efficacy,
        baseline: base_metrics,
        strategies,
        localization: report,
    };
    let artifacts = TrialArtifacts {
        trial,
        seed,
        events,
        corrections,
        slices,
    };
    Ok((trial_report, artifacts))
}

fn aggregate(metrics: &[&StreamMetrics]) -> Option<Aggregate> {
    let col = |f: &dyn Fn(&StreamMetrics) -> f64| metrics.iter().map(|m| f(m)).collect::<Vec<f64>>();
    let mut counts = BTreeMap::new();
    if let Some(first) = metrics.first() {
        for &t in first.counts.keys() {
            counts.insert(t, Summary::of(&col(&|m| m.counts.get(&t).copied().unwrap_or(0) as f64))?);
        }
    }
    Some(Aggregate {
        summed: Summary::of(&col(&|m| m.summed as f64))?,
        frequency: Summary::of(&col(&|m| m.frequency))?,
        performance: Summary::of(&col(&|m| m.performance))?,
        counts,
    })
}

fn compare(a_name: &str, a: &[&StreamMetrics], b_name: &str, b: &[&StreamMetrics]) -> Result<Comparison> {
    let summed = |v: &[&StreamMetrics]| v.iter().map(|m| m.summed as f64).collect::<Vec<_>>();
    let perf = |v: &[&StreamMetrics]| v.iter().map(|m| m.performance).collect::<Vec<_>>();
    let rel: Vec<f64> = a
        .iter()
        .zip(b)
        .filter(|(_, y)| y.summed > 0)
        .map(|(x, y)| (x.summed as f64 - y.summed as f64) / y.summed as f64)
        .collect();
    Ok(Comparison {
        a: a_name.to_string(),
        b: b_name.to_string(),
        relative_fault_change: Summary::of(&rel).map(|s| s.mean),
        summed: paired_t_test(&summed(a), &summed(b))?,
        performance: paired_t_test(&perf(a), &perf(b))?,
    })
}

/// Builds aggregates and comparisons from trial outcomes.
pub fn summarize(exp: &Experiment, outcomes: Vec<TrialOutcome>) -> Result<ExperimentReport> {
    let cfg = &exp.config;
    let ok: Vec<&TrialReport> = outcomes.iter().filter_map(TrialOutcome::report).collect();
    let mut series: Vec<(String, Vec<&StreamMetrics>)> = vec![("baseline".into(), ok.iter().map(|r| &r.baseline).collect())];
    for (i, s) in cfg.acquisition.strategies.iter().enumerate() {
        series.push((s.name().to_string(), ok.iter().map(|r| &r.strategies[i].metrics).collect()));
    }
    let mut aggregates = BTreeMap::new();
    for (name, m) in &series {
        if let Some(a) = aggregate(m) {
            aggregates.insert(name.clone(), a);
        }
    }
    let mut comparisons = Vec::new();
    if ok.len() >= 2 {
        for (name, m) in &series[1..] {
            comparisons.push(compare(name, m, "baseline", &series[0].1)?);
        }
        let find = |s: Strategy| series.iter().find(|(n, _)| n == s.name());
        if let Some((fb, fbm)) = find(Strategy::FaultBased) {
            for other in [Strategy::Natural, Strategy::CorrectedOnly, Strategy::FaultBasedNoHeuristics] {
                if let Some((on, om)) = find(other) {
                    comparisons.push(compare(fb, fbm, on, om)?);
                }
            }
        }
    }
    Ok(ExperimentReport {
        trials: cfg.trials,
        master_seed: cfg.seed,
        metric: if cfg.decoder.is_discrete() { "accuracy" } else { "mse" }.to_string(),
        outcomes,
        aggregates,
        comparisons,
    })
}

/// Runs all configured trials, optionally on `threads` worker threads, and
/// merges them in trial order.
pub fn run_trials(exp: &Experiment, dataset: &Dataset<f64>, threads: usize) -> Result<(ExperimentReport, Vec<Option<TrialArtifacts>>)> {
    let one = |i: usize| match run_trial(exp, dataset, i) {
        Ok((r, a)) => (TrialOutcome::Ok(Box::new(r)), Some(a)),
        Err(e) => {
            log::error!("trial {i} failed: {e}");
            (
                TrialOutcome::Failed {
                    trial: i,
                    seed: trial_seed(exp.config.seed, i),
                    error: e.to_string(),
                },
                None,
            )
        }
    };
    let results: Vec<(TrialOutcome, Option<TrialArtifacts>)> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        pool.install(|| (0..exp.config.trials).into_par_iter().map(one).collect())
    } else {
        (0..exp.config.trials).map(one).collect()
    };
    let (outcomes, artifacts): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok((summarize(exp, outcomes)?, artifacts))
}
