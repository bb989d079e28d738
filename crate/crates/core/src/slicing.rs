//! Slice functions: every execution gets exactly one label per family.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::datamodel::{Label, PredictionRecord, StateSet};
use crate::error::{Error, Result};
use crate::oracles::{classify_activity, Activity, ActivityThresholds, Bounds};
use crate::scalar::{euclidean, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceKind {
    Input,
    Output,
}

/// A slice family and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum SliceFamily<T> {
    /// Discrete output class as task.
    Task,
    /// Compass direction of the output step, or `Stationary`.
    Direction {
        #[serde(default = "default_bins")]
        bins: usize,
        min_speed: T,
    },
    /// Quadrant of the output relative to the bounds midpoint.
    Quadrant { bounds: Bounds<T> },
    /// Hypo/normal/hyper activity of the raw input.
    InputActivity { thresholds: ActivityThresholds<T> },
}

fn default_bins() -> usize {
    8
}

const COMPASS8: [&str; 8] = ["E", "NE", "N", "NW", "W", "SW", "S", "SE"];
const COMPASS4: [&str; 4] = ["E", "N", "W", "S"];
pub const STATIONARY: &str = "Stationary";

impl<T: Scalar> SliceFamily<T> {
    pub fn id(&self) -> &'static str {
        match self {
            SliceFamily::Task => "task",
            SliceFamily::Direction { .. } => "direction",
            SliceFamily::Quadrant { .. } => "quadrant",
            SliceFamily::InputActivity { .. } => "input_activity",
        }
    }

    pub fn kind(&self) -> SliceKind {
        match self {
            SliceFamily::InputActivity { .. } => SliceKind::Input,
            _ => SliceKind::Output,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SliceFamily::Task => Ok(()),
            SliceFamily::Direction { bins, min_speed } => {
                if *bins != 4 && *bins != 8 {
                    return Err(Error::SliceConfig(format!("direction bins must be 4 or 8, got {bins}")));
                }
                if !(*min_speed >= T::zero()) {
                    return Err(Error::SliceConfig("min_speed must be >= 0".into()));
                }
                Ok(())
            }
            SliceFamily::Quadrant { bounds } => {
                if bounds.dim() != 2 {
                    return Err(Error::SliceConfig("quadrant slicing needs 2-D bounds".into()));
                }
                bounds.validate().map_err(|e| Error::SliceConfig(e.to_string()))
            }
            SliceFamily::InputActivity { thresholds } => {
                if !(thresholds.lo < thresholds.hi) {
                    return Err(Error::SliceConfig("activity thresholds need lo < hi".into()));
                }
                Ok(())
            }
        }
    }

    /// Every label the family can produce.
    pub fn labels(&self, states: Option<&StateSet>) -> Result<Vec<String>> {
        Ok(match self {
            SliceFamily::Task => states
                .ok_or_else(|| Error::SliceConfig("task slicing needs a state set".into()))?
                .names()
                .to_vec(),
            SliceFamily::Direction { bins, .. } => {
                let names: &[&str] = if *bins == 4 { &COMPASS4 } else { &COMPASS8 };
                std::iter::once(STATIONARY).chain(names.iter().copied()).map(String::from).collect()
            }
            SliceFamily::Quadrant { .. } => ["NE", "NW", "SE", "SW"].map(String::from).to_vec(),
            SliceFamily::InputActivity { .. } => ["Hypo", "Normal", "Hyper"].map(String::from).to_vec(),
        })
    }
}

/// Maps a discrete output to its task (the state name).
pub fn slice_discrete_output<'a, T: Scalar>(output: &Label<T>, states: &'a StateSet) -> Result<&'a str> {
    let s = output
        .as_state()
        .ok_or_else(|| Error::LabelKind("task slicing needs discrete outputs".into()))?;
    states.name(s)
}

/// Bin of an angle in degrees. Bins are centred on multiples of
/// `360 / bins` and half-open on their upper edge.
pub fn direction_bin(angle_deg: f64, bins: usize) -> usize {
    let width = 360.0 / bins as f64;
    let a = angle_deg.rem_euclid(360.0);
    let b = ((a + width / 2.0) / width).floor() as usize;
    b % bins
}

/// Compass direction of `cur − prev`, or `Stationary` when the step is
/// shorter than `min_speed`, zero, or there is no previous output.
pub fn slice_direction<T: Scalar>(prev: Option<&[T]>, cur: &[T], min_speed: T, bins: usize) -> Result<&'static str> {
    let Some(prev) = prev else {
        return Ok(STATIONARY);
    };
    if prev.len() != 2 || cur.len() != 2 {
        return Err(Error::DimensionMismatch {
            index: 0,
            expected: 2,
            got: if prev.len() != 2 { prev.len() } else { cur.len() },
        });
    }
    let dist = euclidean(cur, prev);
    if dist < min_speed || dist == T::zero() {
        return Ok(STATIONARY);
    }
    let dx = (cur[0] - prev[0]).to_f64_lossy();
    let dy = (cur[1] - prev[1]).to_f64_lossy();
    let angle = dy.atan2(dx).to_degrees();
    let b = direction_bin(angle, bins);
    Ok(if bins == 4 { COMPASS4[b] } else { COMPASS8[b] })
}

/// Quadrant relative to the bounds midpoint; midlines go to the upper half.
pub fn slice_quadrant<T: Scalar>(cur: &[T], bounds: &Bounds<T>) -> Result<&'static str> {
    if cur.len() != 2 || bounds.dim() != 2 {
        return Err(Error::DimensionMismatch {
            index: 0,
            expected: 2,
            got: cur.len(),
        });
    }
    let mid = bounds.midpoint();
    let east = cur[0] >= mid[0];
    let north = cur[1] >= mid[1];
    Ok(match (north, east) {
        (true, true) => "NE",
        (true, false) => "NW",
        (false, true) => "SE",
        (false, false) => "SW",
    })
}

pub fn slice_input_activity<T: Scalar>(features: &[T], thresholds: &ActivityThresholds<T>) -> &'static str {
    match classify_activity(features, thresholds) {
        Activity::Hypo => "Hypo",
        Activity::Normal => "Normal",
        Activity::Hyper => "Hyper",
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceAssignment {
    pub index: usize,
    pub family: String,
    pub label: String,
}

/// Labels one family over a stream. Output families read `output`, input
/// families read `input`.
pub fn slice_stream<T: Scalar>(
    stream: &[PredictionRecord<T>],
    family: &SliceFamily<T>,
    states: Option<&StateSet>,
) -> Result<Vec<String>> {
    let mut prev: Option<&[T]> = None;
    let mut out = Vec::with_capacity(stream.len());
    for r in stream {
        let label = match family {
            SliceFamily::Task => {
                let states = states.ok_or_else(|| Error::SliceConfig("task slicing needs a state set".into()))?;
                slice_discrete_output(&r.output, states)?.to_string()
            }
            SliceFamily::Direction { bins, min_speed } => {
                let cur = r
                    .output
                    .as_vector()
                    .ok_or_else(|| Error::LabelKind("direction slicing needs continuous outputs".into()))?;
                let l = slice_direction(prev, cur, *min_speed, *bins).map_err(|e| match e {
                    Error::DimensionMismatch { expected, got, .. } => Error::DimensionMismatch {
                        index: r.index,
                        expected,
                        got,
                    },
                    e => e,
                })?;
                prev = Some(cur);
                l.to_string()
            }
            SliceFamily::Quadrant { bounds } => {
                let cur = r
                    .output
                    .as_vector()
                    .ok_or_else(|| Error::LabelKind("quadrant slicing needs continuous outputs".into()))?;
                slice_quadrant(cur, bounds)?.to_string()
            }
            SliceFamily::InputActivity { thresholds } => slice_input_activity(&r.input, thresholds).to_string(),
        };
        out.push(label);
    }
    Ok(out)
}

/// One assignment per (execution, family), grouped by execution.
pub fn assign_slices<T: Scalar>(
    stream: &[PredictionRecord<T>],
    families: &[SliceFamily<T>],
    states: Option<&StateSet>,
) -> Result<Vec<SliceAssignment>> {
    let per_family = families
        .iter()
        .map(|f| slice_stream(stream, f, states))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(stream.len() * families.len());
    for (t, r) in stream.iter().enumerate() {
        for (f, labels) in families.iter().zip(&per_family) {
            out.push(SliceAssignment {
                index: r.index,
                family: f.id().to_string(),
                label: labels[t].clone(),
            });
        }
    }
    Ok(out)
}

pub fn write_slices_csv<W: Write>(assignments: &[SliceAssignment], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["index", "family", "label"])?;
    for a in assignments {
        wr.write_record([a.index.to_string().as_str(), &a.family, &a.label])?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads `index,family,label` rows; errors name the offending line.
pub fn read_slices_csv<R: Read>(r: R, source: &str) -> Result<Vec<SliceAssignment>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = rd.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["index", "family", "label"] {
        return Err(Error::Parse {
            path: source.to_string(),
            line: 1,
            message: "expected header `index,family,label`".into(),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let parse_err = |message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        if rec.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, found {}", rec.len())));
        }
        let index = rec[0]
            .trim()
            .parse::<usize>()
            .map_err(|e| parse_err(format!("bad index `{}`: {e}", &rec[0])))?;
        out.push(SliceAssignment {
            index,
            family: rec[1].to_string(),
            label: rec[2].to_string(),
        });
    }
    Ok(out)
}
