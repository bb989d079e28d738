//! Corrective heuristics mapping flagged outputs to plausible ones.
//!
//! Corrections run in stream order and see the already-corrected history.
//! When one position is flagged by several fault types the fixed precedence
//! is OutOfBounds, IllegalTransition, MultimodalInconsistency, RapidMotion,
//! then the windowed families.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::datamodel::{Label, PredictionRecord};
use crate::decoders::Vigilance;
use crate::error::{Error, Result};
use crate::oracles::{AuxiliaryOracle, Bounds, FaultEvent, FaultType, FaultTypeSet, LegalityMatrix, OracleConfig};
use crate::scalar::{euclidean, Scalar};

/// One changed output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CorrectionRecord<T> {
    /// Stream position.
    pub position: usize,
    /// Sample index of the execution.
    pub index: usize,
    pub original: Label<T>,
    pub corrected: Label<T>,
    /// First heuristic that changed the value.
    pub fault_type: FaultType,
    /// Every heuristic that fired at this position, in application order.
    pub applied: Vec<FaultType>,
}

/// Designated states for the multimodal heuristic. Missing entries default
/// to the lowest state id with the matching vigilance.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicConfig {
    pub wake_state: Option<usize>,
    pub sleep_state: Option<usize>,
}

impl HeuristicConfig {
    fn designated(&self, aux: &AuxiliaryOracle, v: Vigilance) -> Result<usize> {
        let chosen = match v {
            Vigilance::Awake => self.wake_state,
            Vigilance::Asleep => self.sleep_state,
        };
        let state = match chosen {
            Some(s) => s,
            None => aux
                .state_map
                .iter()
                .position(|&m| m == v)
                .ok_or_else(|| Error::OracleConfig(format!("no state maps to {v:?}")))?,
        };
        if aux.vigilance_of(state)? != v {
            return Err(Error::OracleConfig(format!("designated state {state} is not {v:?}")));
        }
        Ok(state)
    }
}

/// Returns the previous corrected state.
pub fn correct_illegal_transition(prev_corrected: usize) -> usize {
    prev_corrected
}

/// Modal state of `window`; ties go to the tied state seen most recently.
pub fn correct_flicker(window: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, usize, usize)> = None; // (count, last position, state)
    for (pos, &s) in window.iter().enumerate() {
        let count = window.iter().filter(|&&x| x == s).count();
        let last = window.iter().rposition(|&x| x == s).expect("present");
        if pos != last {
            continue;
        }
        if best.is_none_or(|(c, l, _)| (count, last) > (c, l)) {
            best = Some((count, last, s));
        }
    }
    best.map(|(_, _, s)| s)
}

/// Euclidean projection onto the box.
pub fn correct_out_of_bounds<T: Scalar>(cur: &[T], bounds: &Bounds<T>) -> Vec<T> {
    cur.iter()
        .zip(bounds.lo.iter().zip(&bounds.hi))
        .map(|(&x, (&l, &h))| x.max(l).min(h))
        .collect()
}

/// Moves from `prev` toward `cur` by exactly `tau`. The returned step is
/// never longer than `tau` after rounding.
pub fn correct_rapid_motion<T: Scalar>(prev: &[T], cur: &[T], tau: T) -> Vec<T> {
    let d = euclidean(cur, prev);
    if !(d > tau) {
        return cur.to_vec();
    }
    let mut scale = tau / d;
    let shrink = T::one() - T::lit(4.0) * T::epsilon();
    loop {
        let out: Vec<T> = prev.iter().zip(cur).map(|(&p, &c)| p + scale * (c - p)).collect();
        if euclidean(&out, prev) <= tau {
            return out;
        }
        scale *= shrink;
    }
}

/// Aux-consistent replacement for a decoded state.
pub fn correct_multimodal(
    verdict: Vigilance,
    prev_corrected: Option<usize>,
    aux: &AuxiliaryOracle,
    config: &HeuristicConfig,
) -> Result<usize> {
    match verdict {
        Vigilance::Awake => config.designated(aux, Vigilance::Awake),
        Vigilance::Asleep => match prev_corrected {
            Some(p) if aux.vigilance_of(p)? == Vigilance::Asleep => Ok(p),
            _ => config.designated(aux, Vigilance::Asleep),
        },
    }
}

fn mean_vector<T: Scalar>(rows: &[&[T]]) -> Vec<T> {
    let n = T::from_usize_lossy(rows.len());
    (0..rows[0].len())
        .map(|j| rows.iter().map(|r| r[j]).fold(T::zero(), |a, x| a + x) / n)
        .collect()
}

struct Flags {
    flicker: Vec<bool>,
    variation: Vec<bool>,
}

/// Stream position of the execution with sample index `index`.
pub fn position_of<T>(stream: &[PredictionRecord<T>], index: usize) -> Option<usize> {
    stream.binary_search_by_key(&index, |r| r.index).ok()
}

/// Checks that every event range lies inside the stream and ends on one of
/// its executions.
pub fn check_event_ranges<T>(stream: &[PredictionRecord<T>], events: &[FaultEvent]) -> Result<()> {
    let (first, last) = match (stream.first(), stream.last()) {
        (Some(f), Some(l)) => (f.index, l.index),
        _ => (1, 0),
    };
    for e in events {
        if e.start > e.end || e.start < first || e.end > last || position_of(stream, e.end).is_none() {
            return Err(Error::EventOutOfRange {
                start: e.start,
                end: e.end,
                len: stream.len(),
            });
        }
    }
    Ok(())
}

fn windowed_flags<T>(stream: &[PredictionRecord<T>], events: &[FaultEvent]) -> Result<Flags> {
    check_event_ranges(stream, events)?;
    let mut flags = Flags {
        flicker: vec![false; stream.len()],
        variation: vec![false; stream.len()],
    };
    for e in events {
        let t = position_of(stream, e.end).expect("checked");
        match e.fault_type {
            FaultType::TemporalInconsistencyDiscrete => flags.flicker[t] = true,
            FaultType::TemporalInconsistencyContinuous => flags.variation[t] = true,
            _ => {}
        }
    }
    Ok(flags)
}

/// Applies the heuristics of the enabled fault types to `stream`.
///
/// Pointwise and transition checks are evaluated against the corrected
/// history, so an unflagged output that becomes illegal (or too large a
/// step) only because its predecessor was corrected is corrected as well.
/// Windowed heuristics fire only at positions where their oracle fired.
pub fn apply_corrections<T: Scalar>(
    stream: &[PredictionRecord<T>],
    events: &[FaultEvent],
    oracle: &OracleConfig<T>,
    enabled: &FaultTypeSet,
    config: &HeuristicConfig,
) -> Result<(Vec<PredictionRecord<T>>, Vec<CorrectionRecord<T>>)> {
    oracle.check_enabled(enabled)?;
    let flags = windowed_flags(stream, events)?;
    let on = |t: FaultType| enabled.contains(&t);
    let legality: Option<&LegalityMatrix> = oracle.legality.as_ref().filter(|_| on(FaultType::IllegalTransition));
    let aux = oracle.aux.as_ref().filter(|_| on(FaultType::MultimodalInconsistency));
    let bounds = oracle.bounds.as_ref().filter(|_| on(FaultType::OutOfBounds));
    let step = oracle.step_threshold.filter(|_| on(FaultType::RapidMotion));
    let w = oracle.window;

    let mut out: Vec<PredictionRecord<T>> = Vec::with_capacity(stream.len());
    let mut records = Vec::new();
    for (t, rec) in stream.iter().enumerate() {
        let mut applied = Vec::new();
        let prev = out.last().map(|r| &r.output);
        let value = match &rec.output {
            Label::Discrete(raw) => {
                let prev = prev.map(|p| p.as_state().ok_or_else(|| Error::LabelKind("mixed stream".into()))).transpose()?;
                let mut s = *raw;
                let legal = |a: usize, b: usize| -> Result<bool> {
                    legality.map_or(Ok(true), |m| m.is_legal(a, b))
                };
                if let (Some(p), Some(_)) = (prev, legality) {
                    if !legal(p, s)? {
                        s = correct_illegal_transition(p);
                        applied.push(FaultType::IllegalTransition);
                    }
                }
                if let Some(aux) = aux {
                    let verdict = aux.classifier.predict(&rec.input)?;
                    if aux.vigilance_of(s)? != verdict {
                        s = correct_multimodal(verdict, prev, aux, config)?;
                        applied.push(FaultType::MultimodalInconsistency);
                    }
                }
                if flags.flicker[t] {
                    let from = out.len().saturating_sub(w - 1);
                    let mut window: Vec<usize> = out[from..].iter().filter_map(|r| r.output.as_state()).collect();
                    window.push(s);
                    s = correct_flicker(&window).expect("window non-empty");
                    applied.push(FaultType::TemporalInconsistencyDiscrete);
                }
                if let Some(p) = prev {
                    if !legal(p, s)? {
                        s = p;
                        if !applied.contains(&FaultType::IllegalTransition) {
                            applied.push(FaultType::IllegalTransition);
                        }
                    }
                }
                Label::Discrete(s)
            }
            Label::Continuous(raw) => {
                let prev = prev.map(|p| p.as_vector().ok_or_else(|| Error::LabelKind("mixed stream".into()))).transpose()?;
                let mut v = raw.clone();
                if let Some(b) = bounds {
                    if v.len() != b.dim() {
                        return Err(Error::DimensionMismatch {
                            index: rec.index,
                            expected: b.dim(),
                            got: v.len(),
                        });
                    }
                    if !b.contains(&v) {
                        v = correct_out_of_bounds(&v, b);
                        applied.push(FaultType::OutOfBounds);
                    }
                }
                let limit = |v: Vec<T>, applied: &mut Vec<FaultType>| -> Vec<T> {
                    match (prev, step) {
                        (Some(p), Some(tau)) if euclidean(&v, p) > tau => {
                            if !applied.contains(&FaultType::RapidMotion) {
                                applied.push(FaultType::RapidMotion);
                            }
                            let moved = correct_rapid_motion(p, &v, tau);
                            match bounds {
                                Some(b) => correct_out_of_bounds(&moved, b),
                                None => moved,
                            }
                        }
                        _ => v,
                    }
                };
                v = limit(v, &mut applied);
                if flags.variation[t] {
                    let from = out.len().saturating_sub(w - 1);
                    let mut rows: Vec<&[T]> = out[from..].iter().filter_map(|r| r.output.as_vector()).collect();
                    rows.push(&v);
                    let mut smoothed = mean_vector(&rows);
                    if let Some(b) = bounds {
                        smoothed = correct_out_of_bounds(&smoothed, b);
                    }
                    applied.push(FaultType::TemporalInconsistencyContinuous);
                    v = limit(smoothed, &mut applied);
                }
                Label::Continuous(v)
            }
        };
        if value != rec.output {
            records.push(CorrectionRecord {
                position: t,
                index: rec.index,
                original: rec.output.clone(),
                corrected: value.clone(),
                fault_type: applied[0],
                applied,
            });
        }
        out.push(PredictionRecord {
            output: value,
            ..rec.clone()
        });
    }
    Ok((out, records))
}

pub fn write_corrections_jsonl<T: Scalar, W: Write>(records: &[CorrectionRecord<T>], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
