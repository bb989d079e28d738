//! Data acquisition strategies and decoder retraining.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::{largest_remainder, PredictionRecord, Sample, StateSet};
use crate::decoders::FittedDecoder;
use crate::error::{Error, Result};
use crate::heuristics::CorrectionRecord;
use crate::localization::TaskDistribution;
use crate::scalar::Scalar;
use crate::slicing::{slice_stream, SliceFamily};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Acquire by the task distribution of faults on corrected outputs.
    FaultBased,
    /// Acquire uniformly, following the natural task frequencies.
    Natural,
    /// Retrain on the heuristically corrected observations alone.
    CorrectedOnly,
    /// Acquire by the task distribution of faults on raw outputs.
    FaultBasedNoHeuristics,
}

impl Strategy {
    pub fn needs_distribution(self) -> bool {
        matches!(self, Strategy::FaultBased | Strategy::FaultBasedNoHeuristics)
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::FaultBased => "fault_based",
            Strategy::Natural => "natural",
            Strategy::CorrectedOnly => "corrected_only",
            Strategy::FaultBasedNoHeuristics => "fault_based_no_heuristics",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [
            Strategy::FaultBased,
            Strategy::Natural,
            Strategy::CorrectedOnly,
            Strategy::FaultBasedNoHeuristics,
        ]
        .into_iter()
        .find(|x| x.name() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionPlan {
    pub strategy: Strategy,
    pub n: usize,
    pub distribution: Option<TaskDistribution>,
    pub seed: u64,
}

impl AcquisitionPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 && self.strategy != Strategy::CorrectedOnly {
            return Err(Error::Config(format!("{}: n must be > 0", self.strategy.name())));
        }
        Ok(())
    }
}

/// Splits `n` over buckets by `weights`, never exceeding a bucket's size.
/// Demand a full bucket cannot meet goes to buckets with spare capacity in
/// proportion to that capacity. The total is `min(n, Σ sizes)`.
pub fn allocate(n: usize, weights: &[f64], sizes: &[usize]) -> Vec<usize> {
    let total = n.min(sizes.iter().sum());
    let mut alloc: Vec<usize> = largest_remainder(total, weights)
        .into_iter()
        .zip(sizes)
        .map(|(a, &s)| a.min(s))
        .collect();
    loop {
        let deficit = total - alloc.iter().sum::<usize>();
        if deficit == 0 {
            return alloc;
        }
        let spare: Vec<f64> = alloc.iter().zip(sizes).map(|(&a, &s)| (s - a) as f64).collect();
        let extra = largest_remainder(deficit, &spare);
        for ((a, e), &s) in alloc.iter_mut().zip(extra).zip(sizes) {
            *a = (*a + e).min(s);
        }
    }
}

/// Task label of every acquisition sample, from its ground truth.
pub fn acquisition_tasks<T: Scalar>(
    samples: &[Sample<T>],
    family: &SliceFamily<T>,
    states: Option<&StateSet>,
) -> Result<Vec<String>> {
    let truth_stream: Vec<PredictionRecord<T>> = samples
        .iter()
        .map(|s| PredictionRecord {
            index: s.index,
            input: s.features.clone(),
            output: s.label.clone(),
            truth: Some(s.label.clone()),
        })
        .collect();
    slice_stream(&truth_stream, family, states)
}

fn sorted_by_index<T: Scalar>(mut v: Vec<Sample<T>>) -> Vec<Sample<T>> {
    v.sort_by_key(|s| s.index);
    v
}

/// Samples `min(n, |samples|)` items with per-task counts set by
/// [`allocate`] and uniform sampling without replacement inside each task.
pub fn sample_by_distribution<T: Scalar>(
    samples: &[Sample<T>],
    tasks: &[String],
    distribution: &TaskDistribution,
    n: usize,
    seed: u64,
) -> Result<Vec<Sample<T>>> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if tasks.len() != samples.len() {
        return Err(Error::InvalidArgument("one task label per acquisition sample required".into()));
    }
    let mut buckets: BTreeMap<&str, Vec<usize>> =
        distribution.probabilities.keys().map(|k| (k.as_str(), Vec::new())).collect();
    for (i, t) in tasks.iter().enumerate() {
        buckets.entry(t.as_str()).or_default().push(i);
    }
    let names: Vec<&str> = buckets.keys().copied().collect();
    let weights: Vec<f64> = names.iter().map(|t| distribution.get(t)).collect();
    let sizes: Vec<usize> = names.iter().map(|t| buckets[t].len()).collect();
    let counts = allocate(n, &weights, &sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(counts.iter().sum());
    for (name, k) in names.iter().zip(counts) {
        let bucket = &buckets[name];
        for j in index::sample(&mut rng, bucket.len(), k) {
            out.push(samples[bucket[j]].clone());
        }
    }
    Ok(sorted_by_index(out))
}

/// Uniform sample without replacement of `min(n, |samples|)` items.
pub fn sample_natural<T: Scalar>(samples: &[Sample<T>], n: usize, seed: u64) -> Result<Vec<Sample<T>>> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = n.min(samples.len());
    Ok(sorted_by_index(
        index::sample(&mut rng, samples.len(), k).into_iter().map(|i| samples[i].clone()).collect(),
    ))
}

/// One training sample per correction: the observed input labelled with the
/// corrected output.
pub fn corrected_only_dataset<T: Scalar>(
    observe: &[PredictionRecord<T>],
    corrections: &[CorrectionRecord<T>],
) -> Result<Vec<Sample<T>>> {
    if corrections.is_empty() {
        return Err(Error::NoFaults);
    }
    corrections
        .iter()
        .map(|c| {
            let r = observe
                .get(c.position)
                .filter(|r| r.index == c.index)
                .ok_or(Error::EventOutOfRange {
                    start: c.index,
                    end: c.index,
                    len: observe.len(),
                })?;
            Ok(Sample {
                index: r.index,
                features: r.input.clone(),
                label: c.corrected.clone(),
            })
        })
        .collect()
}

/// What a strategy may draw on besides the train and acquisition parts.
pub struct RepairInputs<'a, T: Scalar> {
    /// Ground-truth task of each acquisition sample.
    pub acquisition_tasks: &'a [String],
    /// Fault task distribution on corrected outputs.
    pub corrected_distribution: Option<&'a TaskDistribution>,
    /// Fault task distribution on raw outputs.
    pub raw_distribution: Option<&'a TaskDistribution>,
    pub observe: &'a [PredictionRecord<T>],
    pub corrections: &'a [CorrectionRecord<T>],
}

#[derive(Clone, Debug)]
pub struct RepairOutcome<T: Scalar> {
    pub decoder: FittedDecoder<T>,
    /// Strategy actually executed (differs after a fallback).
    pub executed: Strategy,
    pub distribution: Option<TaskDistribution>,
    pub acquired: Vec<Sample<T>>,
}

/// Acquires data per `plan` and retrains `baseline` with its retrain mode.
pub fn execute_repair<T: Scalar>(
    baseline: &FittedDecoder<T>,
    plan: &AcquisitionPlan,
    train: &[Sample<T>],
    acquisition: &[Sample<T>],
    inputs: &RepairInputs<'_, T>,
) -> Result<RepairOutcome<T>> {
    plan.validate()?;
    let natural = |executed: Strategy| -> Result<RepairOutcome<T>> {
        let acquired = sample_natural(acquisition, plan.n, plan.seed)?;
        Ok(RepairOutcome {
            decoder: baseline.retrain(&acquired, train)?,
            executed,
            distribution: None,
            acquired,
        })
    };
    match plan.strategy {
        Strategy::Natural => natural(Strategy::Natural),
        Strategy::FaultBased | Strategy::FaultBasedNoHeuristics => {
            let dist = plan.distribution.as_ref().or(if plan.strategy == Strategy::FaultBased {
                inputs.corrected_distribution
            } else {
                inputs.raw_distribution
            });
            let Some(dist) = dist else {
                log::warn!("{}: no faults observed, acquiring naturally", plan.strategy.name());
                return natural(Strategy::Natural);
            };
            let acquired = sample_by_distribution(acquisition, inputs.acquisition_tasks, dist, plan.n, plan.seed)?;
            Ok(RepairOutcome {
                decoder: baseline.retrain(&acquired, train)?,
                executed: plan.strategy,
                distribution: Some(dist.clone()),
                acquired,
            })
        }
        Strategy::CorrectedOnly => {
            let acquired = corrected_only_dataset(inputs.observe, inputs.corrections)?;
            Ok(RepairOutcome {
                decoder: baseline.retrain(&acquired, train)?,
                executed: Strategy::CorrectedOnly,
                distribution: None,
                acquired,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::Label;
    use crate::oracles::FaultType;

    fn samples(tasks: &[(usize, usize)]) -> (Vec<Sample<f64>>, Vec<String>) {
        let mut s = Vec::new();
        let mut t = Vec::new();
        for &(state, count) in tasks {
            for _ in 0..count {
                s.push(Sample {
                    index: s.len(),
                    features: vec![state as f64],
                    label: Label::Discrete(state),
                });
                t.push(["A", "B", "C"][state].to_string());
            }
        }
        (s, t)
    }

    fn dist(pairs: &[(&str, f64)]) -> TaskDistribution {
        TaskDistribution::from_weights(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()).unwrap()
    }

    #[test]
    fn allocation_largest_remainder() {
        assert_eq!(allocate(10, &[0.8, 0.2], &[100, 100]), vec![8, 2]);
        assert_eq!(allocate(10, &[1.0, 0.0, 0.0], &[3, 60, 37]), vec![3, 4, 3]);
        assert_eq!(allocate(500, &[0.5, 0.5], &[10, 20]), vec![10, 20]);
    }

    #[test]
    fn by_distribution_counts() {
        let (s, t) = samples(&[(0, 50), (1, 50)]);
        let got = sample_by_distribution(&s, &t, &dist(&[("A", 0.8), ("B", 0.2)]), 10, 1).unwrap();
        assert_eq!(got.iter().filter(|x| x.label == Label::Discrete(0)).count(), 8);
        assert_eq!(got.len(), 10);
        let again = sample_by_distribution(&s, &t, &dist(&[("A", 0.8), ("B", 0.2)]), 10, 1).unwrap();
        assert_eq!(got, again);
    }

    #[test]
    fn exhausted_bucket_reallocates() {
        let (s, t) = samples(&[(0, 3), (1, 60), (2, 37)]);
        let got = sample_by_distribution(&s, &t, &dist(&[("A", 1.0)]), 10, 2).unwrap();
        let count = |k| got.iter().filter(|x| x.label == Label::Discrete(k)).count();
        assert_eq!((count(0), count(1), count(2)), (3, 4, 3));
    }

    #[test]
    fn natural_sampling() {
        let (s, _) = samples(&[(0, 20)]);
        assert_eq!(sample_natural(&s, 50, 0).unwrap(), s);
        let got = sample_natural(&s, 7, 0).unwrap();
        let mut idx: Vec<_> = got.iter().map(|x| x.index).collect();
        idx.dedup();
        assert_eq!(idx.len(), 7);
        assert!(sample_natural::<f64>(&[], 3, 0).is_err());
    }

    #[test]
    fn corrected_only_uses_corrected_labels() {
        let observe: Vec<PredictionRecord<f64>> = (0..10)
            .map(|i| PredictionRecord {
                index: 100 + i,
                input: vec![i as f64],
                output: Label::Discrete(1),
                truth: None,
            })
            .collect();
        let corrections: Vec<_> = (0..7)
            .map(|p| CorrectionRecord {
                position: p,
                index: 100 + p,
                original: Label::Discrete(1),
                corrected: Label::Discrete(0),
                fault_type: FaultType::IllegalTransition,
                applied: vec![FaultType::IllegalTransition],
            })
            .collect();
        let d = corrected_only_dataset(&observe, &corrections).unwrap();
        assert_eq!(d.len(), 7);
        assert!(d.iter().all(|s| s.label == Label::Discrete(0)));
        assert!(corrected_only_dataset(&observe, &[]).is_err());
    }
}
