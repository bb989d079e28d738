//! Experiment configuration: one JSON document describing the data source,
//! decoder, oracles, heuristics, slices, acquisition plans and trials.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datamodel::{read_csv, Dataset, LabelSpace, SplitMode, SplitRatio, StateSet};
use crate::decoders::{AuxiliaryBinaryClassifier, DecoderSpec, Vigilance};
use crate::error::{Error, Result};
use crate::heuristics::HeuristicConfig;
use crate::oracles::{ActivityThresholds, AuxiliaryOracle, Bounds, FaultType, FaultTypeSet, LegalityMatrix, OracleConfig};
use crate::repair::Strategy;
use crate::slicing::{SliceFamily, SliceKind};
use crate::synthgen::{gen_continuous, gen_discrete, ContinuousScenario, DiscreteScenario, Generated};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    SyntheticDiscrete(DiscreteScenario),
    SyntheticContinuous(ContinuousScenario),
    Csv {
        path: PathBuf,
        /// Declared state set for discrete data; order defines state ids.
        #[serde(default)]
        states: Option<Vec<String>>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default)]
    pub ratio: SplitRatio,
    #[serde(default)]
    pub mode: SplitMode,
}

/// Keeps only a fraction of one state's samples in the training part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thinning {
    pub state: String,
    pub keep: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxConfig {
    pub classifier: AuxiliaryBinaryClassifier,
    /// State name → vigilance; must cover every state.
    pub state_map: BTreeMap<String, Vigilance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub enabled: Vec<FaultType>,
    /// Forbidden `[from, to]` state-name pairs.
    #[serde(default)]
    pub forbidden_transitions: Vec<(String, String)>,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_flicker")]
    pub flicker_threshold: usize,
    #[serde(default)]
    pub tv_threshold: Option<f64>,
    #[serde(default)]
    pub step_threshold: Option<f64>,
    #[serde(default)]
    pub bounds: Option<Bounds<f64>>,
    #[serde(default)]
    pub aux: Option<AuxConfig>,
    #[serde(default)]
    pub activity: Option<ActivityThresholds<f64>>,
}

fn default_window() -> usize {
    10
}
fn default_flicker() -> usize {
    4
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeuristicSection {
    #[serde(default)]
    pub wake_state: Option<String>,
    #[serde(default)]
    pub sleep_state: Option<String>,
}

/// Which fault events drive the acquisition distribution.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionSource {
    /// All enabled fault types combined.
    #[default]
    Pooled,
    Type(FaultType),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionSection {
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub floor: f64,
    #[serde(default)]
    pub distribution: DistributionSource,
}

fn default_n() -> usize {
    500
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    /// Error radius for continuous precision; defaults to half the step
    /// threshold.
    #[serde(default)]
    pub delta_err: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub discard_fraction: f64,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub train_thinning: Option<Thinning>,
    pub decoder: DecoderSpec,
    pub oracles: OracleSection,
    #[serde(default)]
    pub heuristics: HeuristicSection,
    pub slices: Vec<SliceFamily<f64>>,
    /// Output slice family whose labels are the acquisition tasks.
    #[serde(default)]
    pub task_family: Option<String>,
    pub acquisition: AcquisitionSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_trials() -> usize {
    10
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Everything a trial needs, with names resolved to ids.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: RunConfig,
    pub states: Option<StateSet>,
    pub oracle: OracleConfig<f64>,
    pub enabled: FaultTypeSet,
    pub heuristics: HeuristicConfig,
    pub thinning: Option<(usize, f64)>,
    pub task_family: String,
    pub delta_err: Option<f64>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::Config(format!("{}: {j}", path.display())),
            e => e,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Declared state set of a discrete source, without loading data.
    pub fn declared_states(&self) -> Result<Option<StateSet>> {
        match &self.dataset {
            DatasetSource::SyntheticDiscrete(s) => s.state_set().map(Some),
            DatasetSource::SyntheticContinuous(_) => Ok(None),
            DatasetSource::Csv { states, .. } => states.as_ref().map(|s| StateSet::new(s.iter().cloned())).transpose(),
        }
    }

    fn is_discrete(&self) -> bool {
        self.decoder.is_discrete()
    }

    /// Validates every section and resolves names; all problems are
    /// reported together, one per line.
    pub fn resolve(&self) -> Result<Experiment> {
        let mut errs: Vec<String> = Vec::new();
        let states = match self.declared_states() {
            Ok(s) => s,
            Err(e) => {
                errs.push(format!("dataset: {e}"));
                None
            }
        };
        let discrete = self.is_discrete();
        match &self.dataset {
            DatasetSource::SyntheticDiscrete(s) => {
                if let Err(e) = s.validate() {
                    errs.push(format!("dataset: {e}"));
                }
                if !discrete {
                    errs.push("decoder: discrete dataset needs a discrete decoder".into());
                }
            }
            DatasetSource::SyntheticContinuous(s) => {
                if let Err(e) = s.validate() {
                    errs.push(format!("dataset: {e}"));
                }
                if discrete {
                    errs.push("decoder: continuous dataset needs a continuous decoder".into());
                }
            }
            DatasetSource::Csv { states: st, .. } => {
                if discrete && st.is_none() {
                    errs.push("dataset: csv source with a discrete decoder needs `states`".into());
                }
            }
        }
        if !(0.0..1.0).contains(&self.discard_fraction) {
            errs.push(format!("discard_fraction {} outside [0, 1)", self.discard_fraction));
        }
        let r = self.split.ratio;
        let parts = [r.train, r.observe, r.acquire, r.test];
        if parts.iter().any(|x| !x.is_finite() || *x < 0.0) {
            errs.push(format!("split: ratio {parts:?} has a negative or non-finite entry"));
        } else if [r.train, r.observe, r.test].contains(&0.0) {
            errs.push("split: train, observe and test ratios must be > 0".into());
        }
        if let Err(e) = self.decoder.validate() {
            errs.push(format!("decoder: {e}"));
        }

        let id = |name: &str, what: &str, errs: &mut Vec<String>| -> Option<usize> {
            match &states {
                Some(s) => match s.id(name) {
                    Ok(i) => Some(i),
                    Err(_) => {
                        errs.push(format!("{what}: unknown state `{name}`"));
                        None
                    }
                },
                None => {
                    errs.push(format!("{what}: state `{name}` used without a discrete state set"));
                    None
                }
            }
        };

        let thinning = self.train_thinning.as_ref().and_then(|t| {
            if !(0.0..=1.0).contains(&t.keep) {
                errs.push(format!("train_thinning: keep {} outside [0, 1]", t.keep));
            }
            id(&t.state, "train_thinning", &mut errs).map(|s| (s, t.keep))
        });

        // oracles
        let o = &self.oracles;
        let enabled: FaultTypeSet = o.enabled.iter().copied().collect();
        if enabled.is_empty() {
            errs.push("oracles: no fault type enabled".into());
        }
        for t in &enabled {
            use crate::oracles::OutputRequirement::*;
            let bad = match t.requirement() {
                Discrete => !discrete,
                Continuous => discrete,
                Any => false,
            };
            if bad {
                errs.push(format!("oracles: {t} does not apply to this output kind"));
            }
        }
        let mut pairs = Vec::new();
        for (a, b) in &o.forbidden_transitions {
            if let (Some(x), Some(y)) = (
                id(a, "oracles.forbidden_transitions", &mut errs),
                id(b, "oracles.forbidden_transitions", &mut errs),
            ) {
                pairs.push((x, y));
            }
        }
        let legality = match &states {
            Some(s) if discrete => match LegalityMatrix::forbidding(s.len(), &pairs) {
                Ok(m) => Some(m),
                Err(e) => {
                    errs.push(format!("oracles.forbidden_transitions: {e}"));
                    None
                }
            },
            _ => None,
        };
        let aux = o.aux.as_ref().and_then(|a| {
            let s = states.as_ref()?;
            let mut map = Vec::with_capacity(s.len());
            for name in s.names() {
                match a.state_map.get(name) {
                    Some(&v) => map.push(v),
                    None => errs.push(format!("oracles.aux.state_map: state `{name}` not mapped")),
                }
            }
            for name in a.state_map.keys() {
                if s.id(name).is_err() {
                    errs.push(format!("oracles.aux.state_map: unknown state `{name}`"));
                }
            }
            (map.len() == s.len()).then(|| AuxiliaryOracle {
                classifier: a.classifier.clone(),
                state_map: map,
            })
        });
        let oracle = OracleConfig {
            legality,
            window: o.window,
            flicker_threshold: o.flicker_threshold,
            tv_threshold: o.tv_threshold,
            step_threshold: o.step_threshold,
            bounds: o.bounds.clone(),
            aux,
            activity: o.activity,
        };
        if let Err(e) = oracle.check_enabled(&enabled) {
            errs.push(format!("oracles: {e}"));
        }

        let heuristics = HeuristicConfig {
            wake_state: self.heuristics.wake_state.as_deref().and_then(|n| id(n, "heuristics.wake_state", &mut errs)),
            sleep_state: self.heuristics.sleep_state.as_deref().and_then(|n| id(n, "heuristics.sleep_state", &mut errs)),
        };

        // slices
        if self.slices.is_empty() {
            errs.push("slices: at least one family required".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for f in &self.slices {
            if let Err(e) = f.validate() {
                errs.push(format!("slices.{}: {e}", f.id()));
            }
            if !seen.insert(f.id()) {
                errs.push(format!("slices: family `{}` listed twice", f.id()));
            }
            let fits = match f {
                SliceFamily::Task => discrete,
                SliceFamily::Direction { .. } | SliceFamily::Quadrant { .. } => !discrete,
                SliceFamily::InputActivity { .. } => true,
            };
            if !fits {
                errs.push(format!("slices: family `{}` does not apply to this output kind", f.id()));
            }
        }
        let task_family = match &self.task_family {
            Some(t) => {
                match self.slices.iter().find(|f| f.id() == t) {
                    Some(f) if f.kind() == SliceKind::Output => check_floor(f, states.as_ref(), self.acquisition.floor, &mut errs),
                    Some(_) => errs.push(format!("task_family: `{t}` is not an output family")),
                    None => errs.push(format!("task_family: `{t}` is not configured in slices")),
                }
                t.clone()
            }
            None => match self.slices.iter().find(|f| f.kind() == SliceKind::Output) {
                Some(f) => {
                    check_floor(f, states.as_ref(), self.acquisition.floor, &mut errs);
                    f.id().to_string()
                }
                None => {
                    errs.push("slices: no output family to derive tasks from".into());
                    String::new()
                }
            },
        };

        // acquisition
        let a = &self.acquisition;
        if a.strategies.is_empty() {
            errs.push("acquisition: no strategy configured".into());
        }
        if a.n == 0 && a.strategies.iter().any(|&s| s != Strategy::CorrectedOnly) {
            errs.push("acquisition: n must be > 0".into());
        }
        let mut uniq = std::collections::BTreeSet::new();
        for s in &a.strategies {
            if !uniq.insert(s) {
                errs.push(format!("acquisition: strategy `{}` listed twice", s.name()));
            }
        }
        if !(a.floor >= 0.0) {
            errs.push(format!("acquisition: floor {} < 0", a.floor));
        }
        if let DistributionSource::Type(t) = a.distribution {
            if !enabled.contains(&t) {
                errs.push(format!("acquisition.distribution: {t} is not enabled"));
            }
        }
        if self.split.ratio.acquire == 0.0
            && a.strategies.iter().any(|&s| s != Strategy::CorrectedOnly)
        {
            errs.push("split: acquisition strategies need a non-zero acquire ratio".into());
        }

        let delta_err = self.evaluation.delta_err.or(o.step_threshold.map(|t| t / 2.0));
        if let Some(d) = self.evaluation.delta_err {
            if !(d >= 0.0) {
                errs.push("evaluation.delta_err must be >= 0".into());
            }
        }
        if !discrete && delta_err.is_none() {
            errs.push("evaluation: continuous precision needs delta_err or oracles.step_threshold".into());
        }
        if self.trials == 0 {
            errs.push("trials must be > 0".into());
        }

        if !errs.is_empty() {
            return Err(Error::Config(errs.join("\n")));
        }
        Ok(Experiment {
            config: self.clone(),
            states,
            oracle,
            enabled,
            heuristics,
            thinning,
            task_family,
            delta_err,
        })
    }
}

fn check_floor(family: &SliceFamily<f64>, states: Option<&StateSet>, floor: f64, errs: &mut Vec<String>) {
    if let Ok(labels) = family.labels(states) {
        let k = labels.len() as f64;
        if floor > 1.0 / k {
            errs.push(format!("acquisition: floor {floor} exceeds 1/{k} for family `{}`", family.id()));
        }
    }
}

impl Experiment {
    /// Loads or generates the dataset.
    pub fn load_dataset(&self, base_dir: &Path) -> Result<Dataset<f64>> {
        match &self.config.dataset {
            DatasetSource::SyntheticDiscrete(s) => gen_discrete(s).map(|g: Generated<f64>| g.dataset),
            DatasetSource::SyntheticContinuous(s) => gen_continuous(s).map(|g: Generated<f64>| g.dataset),
            DatasetSource::Csv { path, .. } => {
                let path = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
                let f = File::open(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                let ds = read_csv(BufReader::new(f), &path.display().to_string(), self.states.as_ref())?;
                match (&ds.space, self.config.decoder.is_discrete()) {
                    (LabelSpace::Discrete(_), true) | (LabelSpace::Continuous { .. }, false) => Ok(ds),
                    _ => Err(Error::Config("csv label columns do not match the decoder's output kind".into())),
                }
            }
        }
    }
}
