//! Stateful partial test oracles over a stream of decoder executions.
//!
//! Every oracle is causal: an event is emitted at the execution where the
//! violation becomes observable and only looks at that execution and its
//! predecessors. Event ranges are inclusive sample-index ranges; `end` is the
//! index of the execution at which the oracle fired.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::datamodel::{Label, PredictionRecord};
use crate::decoders::{AuxiliaryBinaryClassifier, Vigilance};
use crate::error::{Error, Result};
use crate::scalar::{euclidean, mean, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultType {
    IllegalTransition,
    TemporalInconsistencyDiscrete,
    TemporalInconsistencyContinuous,
    RapidMotion,
    OutOfBounds,
    MultimodalInconsistency,
    InputArtifact,
}

/// Fault taxonomy categories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultCategory {
    InputValidation,
    TemporalValidation,
    Consistency,
    DomainKnowledge,
}

/// Which output kind an oracle needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputRequirement {
    Discrete,
    Continuous,
    Any,
}

impl FaultType {
    pub const ALL: [FaultType; 7] = [
        FaultType::IllegalTransition,
        FaultType::TemporalInconsistencyDiscrete,
        FaultType::TemporalInconsistencyContinuous,
        FaultType::RapidMotion,
        FaultType::OutOfBounds,
        FaultType::MultimodalInconsistency,
        FaultType::InputArtifact,
    ];

    pub fn category(self) -> FaultCategory {
        match self {
            FaultType::IllegalTransition
            | FaultType::TemporalInconsistencyDiscrete
            | FaultType::TemporalInconsistencyContinuous
            | FaultType::RapidMotion => FaultCategory::TemporalValidation,
            FaultType::OutOfBounds => FaultCategory::DomainKnowledge,
            FaultType::MultimodalInconsistency => FaultCategory::Consistency,
            FaultType::InputArtifact => FaultCategory::InputValidation,
        }
    }

    pub fn requirement(self) -> OutputRequirement {
        match self {
            FaultType::IllegalTransition
            | FaultType::TemporalInconsistencyDiscrete
            | FaultType::MultimodalInconsistency => OutputRequirement::Discrete,
            FaultType::TemporalInconsistencyContinuous
            | FaultType::RapidMotion
            | FaultType::OutOfBounds => OutputRequirement::Continuous,
            FaultType::InputArtifact => OutputRequirement::Any,
        }
    }

    pub fn oracle_id(self) -> &'static str {
        match self {
            FaultType::IllegalTransition => "illegal_transition",
            FaultType::TemporalInconsistencyDiscrete => "flicker",
            FaultType::TemporalInconsistencyContinuous => "total_variation",
            FaultType::RapidMotion => "rapid_motion",
            FaultType::OutOfBounds => "out_of_bounds",
            FaultType::MultimodalInconsistency => "multimodal",
            FaultType::InputArtifact => "input_artifact",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        FaultType::ALL
            .into_iter()
            .find(|t| format!("{t:?}") == name || t.oracle_id() == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown fault type `{name}`")))
    }
}

impl fmt::Display for FaultType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub type FaultTypeSet = BTreeSet<FaultType>;

/// A detected fault over sample indices `[start, end]` (inclusive).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultEvent {
    #[serde(rename = "type")]
    pub fault_type: FaultType,
    pub start: usize,
    pub end: usize,
    pub oracle_id: String,
    pub detail: String,
}

impl FaultEvent {
    fn new(fault_type: FaultType, start: usize, end: usize, detail: String) -> Self {
        Self {
            fault_type,
            start,
            end,
            oracle_id: fault_type.oracle_id().to_string(),
            detail,
        }
    }

    pub fn covers(&self, index: usize) -> bool {
        (self.start..=self.end).contains(&index)
    }
}

/// Allowed `prev → cur` transitions over a state set, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<bool>>", into = "Vec<Vec<bool>>")]
pub struct LegalityMatrix {
    states: usize,
    allowed: Vec<bool>,
}

impl LegalityMatrix {
    /// Every transition legal.
    pub fn full(states: usize) -> Self {
        Self {
            states,
            allowed: vec![true; states * states],
        }
    }

    /// All transitions legal except the listed `(prev, cur)` pairs.
    pub fn forbidding(states: usize, forbidden: &[(usize, usize)]) -> Result<Self> {
        let mut m = Self::full(states);
        for &(a, b) in forbidden {
            if a >= states || b >= states {
                return Err(Error::StateOutOfRange(a.max(b)));
            }
            if a == b {
                return Err(Error::OracleConfig(format!(
                    "self-transition of state {a} must stay legal"
                )));
            }
            m.allowed[a * states + b] = false;
        }
        Ok(m)
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn is_legal(&self, prev: usize, cur: usize) -> Result<bool> {
        if prev >= self.states {
            return Err(Error::StateOutOfRange(prev));
        }
        if cur >= self.states {
            return Err(Error::StateOutOfRange(cur));
        }
        Ok(self.allowed[prev * self.states + cur])
    }

    /// Legal successors of `state`, in id order.
    pub fn successors(&self, state: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.states).filter(move |&c| self.allowed[state * self.states + c])
    }
}

impl TryFrom<Vec<Vec<bool>>> for LegalityMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<bool>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::OracleConfig("legality matrix must be square and non-empty".into()));
        }
        if (0..n).any(|i| !rows[i][i]) {
            return Err(Error::OracleConfig("legality diagonal must be true".into()));
        }
        Ok(Self {
            states: n,
            allowed: rows.into_iter().flatten().collect(),
        })
    }
}

impl From<LegalityMatrix> for Vec<Vec<bool>> {
    fn from(m: LegalityMatrix) -> Self {
        m.allowed.chunks(m.states).map(<[bool]>::to_vec).collect()
    }
}

/// Closed per-dimension box `[lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Bounds<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Scalar> Bounds<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        let b = Self { lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lo: vec![T::zero(); dim],
            hi: vec![T::one(); dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() || self.lo.is_empty() {
            return Err(Error::OracleConfig("bounds need equal, non-zero lo/hi lengths".into()));
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| !(l < h)) {
            return Err(Error::OracleConfig("bounds need lo < hi in every dimension".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, v: &[T]) -> bool {
        v.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&x, (&l, &h))| x >= l && x <= h)
    }

    pub fn midpoint(&self) -> Vec<T> {
        let two = T::lit(2.0);
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| (l + h) / two).collect()
    }
}

/// Hypo/hyperactivity thresholds on the mean input feature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ActivityThresholds<T> {
    pub lo: T,
    pub hi: T,
}

/// Auxiliary classifier plus the awake/asleep meaning of each decoder state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryOracle {
    pub classifier: AuxiliaryBinaryClassifier,
    /// Indexed by state id.
    pub state_map: Vec<Vigilance>,
}

impl AuxiliaryOracle {
    pub fn vigilance_of(&self, state: usize) -> Result<Vigilance> {
        self.state_map
            .get(state)
            .copied()
            .ok_or(Error::StateOutOfRange(state))
    }
}

/// Thresholds and relations shared by all oracles of one stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OracleConfig<T> {
    pub legality: Option<LegalityMatrix>,
    /// Window length `W` for the windowed oracles.
    pub window: usize,
    /// Flicker threshold `k`: minimum adjacent state changes in a window.
    pub flicker_threshold: usize,
    /// Total-variation threshold over a window of continuous outputs.
    pub tv_threshold: Option<T>,
    /// Per-step distance threshold.
    pub step_threshold: Option<T>,
    pub bounds: Option<Bounds<T>>,
    pub aux: Option<AuxiliaryOracle>,
    pub activity: Option<ActivityThresholds<T>>,
}

impl<T: Scalar> Default for OracleConfig<T> {
    fn default() -> Self {
        Self {
            legality: None,
            window: 10,
            flicker_threshold: 4,
            tv_threshold: None,
            step_threshold: None,
            bounds: None,
            aux: None,
            activity: None,
        }
    }
}

impl<T: Scalar> OracleConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::OracleConfig(format!("window {} < 2", self.window)));
        }
        if self.flicker_threshold < 2 {
            return Err(Error::OracleConfig(format!(
                "flicker threshold {} < 2",
                self.flicker_threshold
            )));
        }
        for (name, t) in [("tv_threshold", self.tv_threshold), ("step_threshold", self.step_threshold)] {
            if let Some(t) = t {
                if !(t > T::zero()) {
                    return Err(Error::OracleConfig(format!("{name} must be > 0")));
                }
            }
        }
        if let Some(b) = &self.bounds {
            b.validate()?;
        }
        if let Some(a) = &self.activity {
            if !(a.lo < a.hi) {
                return Err(Error::OracleConfig("activity thresholds need lo < hi".into()));
            }
        }
        if let (Some(aux), Some(leg)) = (&self.aux, &self.legality) {
            if aux.state_map.len() != leg.states() {
                return Err(Error::OracleConfig(
                    "auxiliary state map must cover every state".into(),
                ));
            }
        }
        Ok(())
    }

    /// Checks that every enabled oracle has what it needs.
    pub fn check_enabled(&self, enabled: &FaultTypeSet) -> Result<()> {
        self.validate()?;
        for &t in enabled {
            let missing = match t {
                FaultType::IllegalTransition => self.legality.is_none(),
                FaultType::TemporalInconsistencyDiscrete => false,
                FaultType::TemporalInconsistencyContinuous => self.tv_threshold.is_none(),
                FaultType::RapidMotion => self.step_threshold.is_none(),
                FaultType::OutOfBounds => self.bounds.is_none(),
                FaultType::MultimodalInconsistency => self.aux.is_none(),
                FaultType::InputArtifact => self.activity.is_none(),
            };
            if missing {
                return Err(Error::OracleConfig(format!("{t} enabled but not configured")));
            }
        }
        Ok(())
    }
}

fn state_of<T: Scalar>(label: &Label<T>) -> Result<usize> {
    label
        .as_state()
        .ok_or_else(|| Error::LabelKind("oracle needs discrete outputs".into()))
}

fn vector_of<T: Scalar>(label: &Label<T>) -> Result<&[T]> {
    label
        .as_vector()
        .ok_or_else(|| Error::LabelKind("oracle needs continuous outputs".into()))
}

// ---------------------------------------------------------------------------
// Single-step checks
// ---------------------------------------------------------------------------

/// Fault iff `prev → cur` is not a legal transition. `span` is the pair of
/// sample indices `(previous, current)`.
pub fn illegal_transition_step<T: Scalar>(
    span: (usize, usize),
    prev: &Label<T>,
    cur: &Label<T>,
    legality: &LegalityMatrix,
) -> Result<Option<FaultEvent>> {
    let (p, c) = (state_of(prev)?, state_of(cur)?);
    if legality.is_legal(p, c)? {
        return Ok(None);
    }
    Ok(Some(FaultEvent::new(
        FaultType::IllegalTransition,
        span.0,
        span.1,
        format!("illegal transition {p} -> {c}"),
    )))
}

/// Number of adjacent positions holding different values.
pub fn count_changes<S: PartialEq>(window: &[S]) -> usize {
    window.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Fault iff the last `w` states contain at least `k` adjacent changes.
/// Returns `None` while fewer than `w` states are available. `span` is the
/// index range of those `w` executions.
pub fn temporal_inconsistency_discrete_step(
    span: (usize, usize),
    window: &[usize],
    w: usize,
    k: usize,
) -> Option<FaultEvent> {
    if window.len() < w {
        return None;
    }
    let changes = count_changes(&window[window.len() - w..]);
    (changes >= k).then(|| {
        FaultEvent::new(
            FaultType::TemporalInconsistencyDiscrete,
            span.0,
            span.1,
            format!("{changes} state changes in window of {w}"),
        )
    })
}

/// Sum of consecutive Euclidean step lengths.
pub fn total_variation<T: Scalar>(window: &[Vec<T>]) -> T {
    window.windows(2).map(|p| euclidean(&p[1], &p[0])).fold(T::zero(), |a, d| a + d)
}

/// Fault iff the total variation of the last `w` outputs exceeds `tau`.
pub fn temporal_inconsistency_continuous_step<T: Scalar>(
    span: (usize, usize),
    window: &[Vec<T>],
    w: usize,
    tau: T,
) -> Option<FaultEvent> {
    if window.len() < w {
        return None;
    }
    let tv = total_variation(&window[window.len() - w..]);
    (tv > tau).then(|| {
        FaultEvent::new(
            FaultType::TemporalInconsistencyContinuous,
            span.0,
            span.1,
            format!("total variation {tv} > {tau}"),
        )
    })
}

/// Fault iff `‖cur − prev‖ > tau`. `span` is `(previous, current)` index.
pub fn rapid_motion_step<T: Scalar>(span: (usize, usize), prev: &[T], cur: &[T], tau: T) -> Result<Option<FaultEvent>> {
    if prev.len() != cur.len() {
        return Err(Error::DimensionMismatch {
            index: span.1,
            expected: prev.len(),
            got: cur.len(),
        });
    }
    let d = euclidean(cur, prev);
    Ok((d > tau).then(|| {
        FaultEvent::new(
            FaultType::RapidMotion,
            span.0,
            span.1,
            format!("step {d} > {tau}"),
        )
    }))
}

/// Fault iff any coordinate lies outside its closed interval.
pub fn out_of_bounds_step<T: Scalar>(t: usize, cur: &[T], bounds: &Bounds<T>) -> Option<FaultEvent> {
    (cur.len() != bounds.dim() || !bounds.contains(cur)).then(|| {
        FaultEvent::new(
            FaultType::OutOfBounds,
            t,
            t,
            format!("position {cur:?} outside bounds"),
        )
    })
}

/// Fault iff the decoded state's vigilance disagrees with the auxiliary
/// classifier.
pub fn multimodal_inconsistency_step<T: Scalar>(
    t: usize,
    decoded: &Label<T>,
    aux_input: &[T],
    aux: &AuxiliaryOracle,
) -> Result<Option<FaultEvent>> {
    let state = state_of(decoded)?;
    let expected = aux.vigilance_of(state)?;
    let observed = aux.classifier.predict(aux_input)?;
    Ok((expected != observed).then(|| {
        FaultEvent::new(
            FaultType::MultimodalInconsistency,
            t,
            t,
            format!("state {state} is {expected:?} but auxiliary says {observed:?}"),
        )
    }))
}

/// Activity class of an input bin by its mean feature value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Activity {
    Hypo,
    Normal,
    Hyper,
}

pub fn classify_activity<T: Scalar>(features: &[T], thresholds: &ActivityThresholds<T>) -> Activity {
    let m = mean(features);
    if m < thresholds.lo {
        Activity::Hypo
    } else if m > thresholds.hi {
        Activity::Hyper
    } else {
        Activity::Normal
    }
}

/// Fault iff the mean input lies strictly below `lo` or above `hi`.
pub fn input_artifact_step<T: Scalar>(
    t: usize,
    features: &[T],
    thresholds: &ActivityThresholds<T>,
) -> Option<FaultEvent> {
    match classify_activity(features, thresholds) {
        Activity::Normal => None,
        a => Some(FaultEvent::new(
            FaultType::InputArtifact,
            t,
            t,
            format!("{}activity", if a == Activity::Hypo { "hypo" } else { "hyper" }),
        )),
    }
}

// ---------------------------------------------------------------------------
// Streaming engine
// ---------------------------------------------------------------------------

/// Incremental flicker counter over the last `w` states.
#[derive(Clone, Debug)]
struct FlickerState {
    w: usize,
    states: VecDeque<usize>,
    changes: usize,
}

impl FlickerState {
    fn push(&mut self, s: usize) {
        if let Some(&last) = self.states.back() {
            self.changes += usize::from(last != s);
        }
        self.states.push_back(s);
        if self.states.len() > self.w {
            let old = self.states.pop_front().expect("non-empty");
            self.changes -= usize::from(old != self.states[0]);
        }
    }
}

/// Step lengths of the last `w − 1` transitions.
#[derive(Clone, Debug)]
struct VariationState<T> {
    w: usize,
    seen: usize,
    steps: VecDeque<T>,
}

impl<T: Scalar> VariationState<T> {
    fn push(&mut self, step: Option<T>) {
        self.seen += 1;
        if let Some(d) = step {
            self.steps.push_back(d);
            if self.steps.len() > self.w - 1 {
                self.steps.pop_front();
            }
        }
    }

    fn total(&self) -> Option<T> {
        (self.seen >= self.w).then(|| self.steps.iter().fold(T::zero(), |a, &d| a + d))
    }
}

/// Runs the enabled oracles over a stream one execution at a time.
pub struct OracleEngine<'a, T: Scalar> {
    config: &'a OracleConfig<T>,
    enabled: FaultTypeSet,
    position: usize,
    last_index: Option<usize>,
    /// Indices of the most recent `W` executions.
    recent: VecDeque<usize>,
    prev_output: Option<Label<T>>,
    flicker: FlickerState,
    variation: VariationState<T>,
}

impl<'a, T: Scalar> OracleEngine<'a, T> {
    pub fn new(config: &'a OracleConfig<T>, enabled: &FaultTypeSet) -> Result<Self> {
        config.check_enabled(enabled)?;
        Ok(Self {
            config,
            enabled: enabled.clone(),
            position: 0,
            last_index: None,
            recent: VecDeque::with_capacity(config.window + 1),
            prev_output: None,
            flicker: FlickerState {
                w: config.window,
                states: VecDeque::with_capacity(config.window + 1),
                changes: 0,
            },
            variation: VariationState {
                w: config.window,
                seen: 0,
                steps: VecDeque::with_capacity(config.window),
            },
        })
    }

    fn on(&self, t: FaultType) -> bool {
        self.enabled.contains(&t)
    }

    /// Feeds one execution; returns the events firing at it, in
    /// [`FaultType::ALL`] order.
    pub fn push(&mut self, record: &PredictionRecord<T>) -> Result<Vec<FaultEvent>> {
        let t = self.position;
        if let Some(prev) = self.last_index {
            if record.index <= prev {
                return Err(Error::OutOfOrder {
                    position: t,
                    index: record.index,
                    previous: prev,
                });
            }
        }
        for ft in &self.enabled {
            let ok = match ft.requirement() {
                OutputRequirement::Discrete => record.output.is_discrete(),
                OutputRequirement::Continuous => !record.output.is_discrete(),
                OutputRequirement::Any => true,
            };
            if !ok {
                return Err(Error::LabelKind(format!(
                    "{ft} cannot run on this output kind (position {t})"
                )));
            }
        }
        let cfg = self.config;
        let mut events = Vec::new();
        let cur = &record.output;
        let i = record.index;
        self.recent.push_back(i);
        if self.recent.len() > cfg.window {
            self.recent.pop_front();
        }
        let window_start = self.recent[0];
        let pair = (self.last_index.unwrap_or(i), i);

        if self.on(FaultType::IllegalTransition) {
            if let Some(prev) = &self.prev_output {
                let legality = cfg.legality.as_ref().expect("checked");
                events.extend(illegal_transition_step(pair, prev, cur, legality)?);
            }
        }
        if self.on(FaultType::TemporalInconsistencyDiscrete) {
            self.flicker.push(state_of(cur)?);
            if self.flicker.states.len() == self.flicker.w && self.flicker.changes >= cfg.flicker_threshold {
                events.push(FaultEvent::new(
                    FaultType::TemporalInconsistencyDiscrete,
                    window_start,
                    i,
                    format!("{} state changes in window of {}", self.flicker.changes, cfg.window),
                ));
            }
        }
        if self.on(FaultType::TemporalInconsistencyContinuous) {
            let v = vector_of(cur)?;
            let step = match &self.prev_output {
                Some(p) => Some(euclidean(v, vector_of(p)?)),
                None => None,
            };
            self.variation.push(step);
            let tau = cfg.tv_threshold.expect("checked");
            if let Some(tv) = self.variation.total() {
                if tv > tau {
                    events.push(FaultEvent::new(
                        FaultType::TemporalInconsistencyContinuous,
                        window_start,
                        i,
                        format!("total variation {tv} > {tau}"),
                    ));
                }
            }
        }
        if self.on(FaultType::RapidMotion) {
            if let Some(prev) = &self.prev_output {
                let tau = cfg.step_threshold.expect("checked");
                events.extend(rapid_motion_step(pair, vector_of(prev)?, vector_of(cur)?, tau)?);
            }
        }
        if self.on(FaultType::OutOfBounds) {
            let bounds = cfg.bounds.as_ref().expect("checked");
            events.extend(out_of_bounds_step(i, vector_of(cur)?, bounds));
        }
        if self.on(FaultType::MultimodalInconsistency) {
            let aux = cfg.aux.as_ref().expect("checked");
            events.extend(multimodal_inconsistency_step(i, cur, &record.input, aux)?);
        }
        if self.on(FaultType::InputArtifact) {
            let th = cfg.activity.as_ref().expect("checked");
            events.extend(input_artifact_step(i, &record.input, th));
        }

        self.prev_output = Some(cur.clone());
        self.last_index = Some(record.index);
        self.position += 1;
        Ok(events)
    }
}

/// Runs the enabled oracles over a whole stream. Events are ordered by end
/// index, then by fault type.
pub fn run_oracles<T: Scalar>(
    stream: &[PredictionRecord<T>],
    config: &OracleConfig<T>,
    enabled: &FaultTypeSet,
) -> Result<Vec<FaultEvent>> {
    let mut engine = OracleEngine::new(config, enabled)?;
    let mut out = Vec::new();
    for r in stream {
        out.extend(engine.push(r)?);
    }
    Ok(out)
}

/// Number of events per fault type; every type in `types` gets an entry.
pub fn count_by_type<'a>(
    events: impl IntoIterator<Item = &'a FaultEvent>,
    types: &FaultTypeSet,
) -> std::collections::BTreeMap<FaultType, usize> {
    let mut counts: std::collections::BTreeMap<FaultType, usize> = types.iter().map(|&t| (t, 0)).collect();
    for e in events {
        *counts.entry(e.fault_type).or_default() += 1;
    }
    counts
}

pub fn write_events_jsonl<W: Write>(events: &[FaultEvent], mut w: W) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads one event per non-blank line; errors name the offending line.
pub fn read_events_jsonl<R: BufRead>(r: R, source: &str) -> Result<Vec<FaultEvent>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: FaultEvent = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: source.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if e.start > e.end {
            return Err(Error::Parse {
                path: source.to_string(),
                line: i + 1,
                message: format!("start {} > end {}", e.start, e.end),
            });
        }
        out.push(e);
    }
    Ok(out)
}
