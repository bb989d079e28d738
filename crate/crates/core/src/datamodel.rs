//! Labeled samples, datasets, four-way splitting and prediction streams.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decoders::Decoder;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ground truth or decoder output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum Label<T> {
    /// Index into the dataset's [`StateSet`].
    Discrete(usize),
    /// Coordinate vector of fixed dimension.
    Continuous(Vec<T>),
}

impl<T: Scalar> Label<T> {
    pub fn is_discrete(&self) -> bool {
        matches!(self, Label::Discrete(_))
    }

    pub fn as_state(&self) -> Option<usize> {
        match self {
            Label::Discrete(s) => Some(*s),
            Label::Continuous(_) => None,
        }
    }

    pub fn as_vector(&self) -> Option<&[T]> {
        match self {
            Label::Discrete(_) => None,
            Label::Continuous(v) => Some(v),
        }
    }

    pub fn same_kind(&self, other: &Self) -> bool {
        match (self, other) {
            (Label::Discrete(_), Label::Discrete(_)) => true,
            (Label::Continuous(a), Label::Continuous(b)) => a.len() == b.len(),
            _ => false,
        }
    }
}

/// Finite, ordered set of named discrete states.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSet {
    names: Vec<String>,
}

impl StateSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::InvalidDataset("state set is empty".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::InvalidDataset(format!("duplicate state `{n}`")));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    pub fn name(&self, id: usize) -> Result<&str> {
        self.names
            .get(id)
            .map(String::as_str)
            .ok_or(Error::StateOutOfRange(id))
    }
}

/// What kind of labels a dataset carries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSpace {
    Discrete(StateSet),
    Continuous { dim: usize },
}

impl LabelSpace {
    pub fn is_discrete(&self) -> bool {
        matches!(self, LabelSpace::Discrete(_))
    }

    pub fn states(&self) -> Option<&StateSet> {
        match self {
            LabelSpace::Discrete(s) => Some(s),
            LabelSpace::Continuous { .. } => None,
        }
    }

    pub fn admits<T: Scalar>(&self, label: &Label<T>) -> bool {
        match (self, label) {
            (LabelSpace::Discrete(s), Label::Discrete(id)) => *id < s.len(),
            (LabelSpace::Continuous { dim }, Label::Continuous(v)) => v.len() == *dim,
            _ => false,
        }
    }
}

/// One time bin: its ordinal, per-channel features and ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Sample<T> {
    pub index: usize,
    pub features: Vec<T>,
    pub label: Label<T>,
}

/// A validated sequence of samples sharing one label space and feature width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dataset<T> {
    pub space: LabelSpace,
    pub feature_dim: usize,
    pub samples: Vec<Sample<T>>,
}

impl<T: Scalar> Dataset<T> {
    /// Checks constant feature width, strictly increasing indices and label
    /// membership.
    pub fn new(space: LabelSpace, samples: Vec<Sample<T>>) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyDataset)?;
        let feature_dim = first.features.len();
        let mut prev: Option<usize> = None;
        for (pos, s) in samples.iter().enumerate() {
            if s.features.len() != feature_dim {
                return Err(Error::DimensionMismatch {
                    index: s.index,
                    expected: feature_dim,
                    got: s.features.len(),
                });
            }
            if let Some(p) = prev {
                if s.index <= p {
                    return Err(Error::OutOfOrder {
                        position: pos,
                        index: s.index,
                        previous: p,
                    });
                }
            }
            if !space.admits(&s.label) {
                return Err(Error::LabelKind(format!(
                    "label at index {} not in declared label space",
                    s.index
                )));
            }
            prev = Some(s.index);
        }
        Ok(Self {
            space,
            feature_dim,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// One decoder execution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PredictionRecord<T> {
    pub index: usize,
    pub input: Vec<T>,
    pub output: Label<T>,
    pub truth: Option<Label<T>>,
}

/// Relative sizes of the train / observe / acquire / test parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub train: f64,
    pub observe: f64,
    pub acquire: f64,
    pub test: f64,
}

impl SplitRatio {
    pub const fn new(train: f64, observe: f64, acquire: f64, test: f64) -> Self {
        Self {
            train,
            observe,
            acquire,
            test,
        }
    }

    fn parts(&self) -> [f64; 4] {
        [self.train, self.observe, self.acquire, self.test]
    }
}

impl Default for SplitRatio {
    fn default() -> Self {
        Self::new(6.0, 2.0, 1.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Consecutive blocks after a seeded rotation of the start position.
    #[default]
    Contiguous,
    /// Consecutive blocks laid out in a seeded order of the four parts.
    Shuffled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DatasetSplit<T> {
    pub train: Vec<Sample<T>>,
    pub observe: Vec<Sample<T>>,
    pub acquire: Vec<Sample<T>>,
    pub test: Vec<Sample<T>>,
    pub seed: u64,
}

impl<T> DatasetSplit<T> {
    pub fn sizes(&self) -> [usize; 4] {
        [
            self.train.len(),
            self.observe.len(),
            self.acquire.len(),
            self.test.len(),
        ]
    }
}

/// Largest-remainder apportionment of `n` items over `weights`.
/// Ties in the fractional part go to the lower position.
pub fn largest_remainder(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || total <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Splits `samples` into train / observe / acquire / test parts.
///
/// Train, observe and test are mandatory and must be non-empty; the
/// acquisition part may be empty when its ratio entry is zero.
pub fn split_dataset<T: Scalar>(
    samples: &[Sample<T>],
    ratio: SplitRatio,
    seed: u64,
    mode: SplitMode,
) -> Result<DatasetSplit<T>> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let parts = ratio.parts();
    if parts.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::InvalidRatio(format!("{parts:?} has a negative or non-finite entry")));
    }
    if parts.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidRatio("ratio sums to zero".into()));
    }
    let n = samples.len();
    let sizes = largest_remainder(n, &parts);
    const NAMES: [&str; 4] = ["train", "observe", "acquire", "test"];
    for i in [0, 1, 3] {
        if sizes[i] == 0 {
            return Err(Error::InvalidRatio(format!(
                "{} part would be empty ({} samples, ratio {:?})",
                NAMES[i], n, parts
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Order in which the four parts are laid out along the time axis, and
    // where the first block starts.
    let (layout, offset) = match mode {
        SplitMode::Contiguous => ([0usize, 1, 2, 3], rng.random_range(0..n)),
        SplitMode::Shuffled => {
            let mut layout = [0usize, 1, 2, 3];
            layout.shuffle(&mut rng);
            (layout, 0)
        }
    };

    let mut out: [Vec<Sample<T>>; 4] = Default::default();
    let mut cursor = 0usize;
    for &part in &layout {
        let mut block: Vec<Sample<T>> = (cursor..cursor + sizes[part])
            .map(|j| samples[(offset + j) % n].clone())
            .collect();
        block.sort_by_key(|s| s.index);
        out[part] = block;
        cursor += sizes[part];
    }
    let [train, observe, acquire, test] = out;
    Ok(DatasetSplit {
        train,
        observe,
        acquire,
        test,
        seed,
    })
}

/// Drops a contiguous run of `round(fraction * n)` samples starting at a
/// seeded position.
pub fn discard_fraction<T: Clone>(samples: &[T], fraction: f64, seed: u64) -> Result<Vec<T>> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "discard fraction {fraction} outside [0, 1)"
        )));
    }
    let n = samples.len();
    let k = (fraction * n as f64).round() as usize;
    if k == 0 {
        return Ok(samples.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(0..=n - k);
    Ok(samples[..start]
        .iter()
        .chain(&samples[start + k..])
        .cloned()
        .collect())
}

/// Keeps `round(keep * count)` of the samples whose discrete label is
/// `state`, chosen uniformly; all other samples and the order are untouched.
pub fn thin_state<T: Scalar>(
    samples: &[Sample<T>],
    state: usize,
    keep: f64,
    seed: u64,
) -> Result<Vec<Sample<T>>> {
    if !(0.0..=1.0).contains(&keep) {
        return Err(Error::InvalidArgument(format!("keep fraction {keep} outside [0, 1]")));
    }
    let positions: Vec<usize> = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.label.as_state() == Some(state))
        .map(|(i, _)| i)
        .collect();
    let k = (keep * positions.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dropped = vec![false; samples.len()];
    for &i in &positions {
        dropped[i] = true;
    }
    for j in rand::seq::index::sample(&mut rng, positions.len(), k) {
        dropped[positions[j]] = false;
    }
    Ok(samples
        .iter()
        .zip(dropped)
        .filter(|(_, d)| !d)
        .map(|(s, _)| s.clone())
        .collect())
}

/// Runs `decoder` over a split part, one record per sample in index order.
pub fn make_stream<T: Scalar, D: Decoder<T> + ?Sized>(
    part: &[Sample<T>],
    decoder: &D,
) -> Result<Vec<PredictionRecord<T>>> {
    let dim = decoder.feature_dim();
    if let Some(bad) = part.iter().find(|s| s.features.len() != dim) {
        return Err(Error::DimensionMismatch {
            index: bad.index,
            expected: dim,
            got: bad.features.len(),
        });
    }
    let outputs = decoder.predict_samples(part)?;
    Ok(part
        .iter()
        .zip(outputs)
        .map(|(s, output)| PredictionRecord {
            index: s.index,
            input: s.features.clone(),
            output,
            truth: Some(s.label.clone()),
        })
        .collect())
}

/// Reads the CSV dataset format: `index,f0,…,fK,label` (discrete) or
/// `index,f0,…,fK,label_x,label_y` (continuous).
///
/// Discrete state names are resolved against `states` when given, otherwise
/// the state set is the labels in order of first appearance.
pub fn read_csv<T: Scalar, R: Read>(
    reader: R,
    source: &str,
    states: Option<&StateSet>,
) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    if cols.first() != Some(&"index") {
        return Err(parse_err(1, "first column must be `index`".into()));
    }
    let continuous = cols.ends_with(&["label_x", "label_y"]);
    let n_label = if continuous { 2 } else { 1 };
    if !continuous && cols.last() != Some(&"label") {
        return Err(parse_err(1, "missing `label` or `label_x,label_y` columns".into()));
    }
    if cols.len() < 1 + n_label + 1 {
        return Err(parse_err(1, "no feature columns".into()));
    }
    let k = cols.len() - 1 - n_label;
    for (j, c) in cols[1..=k].iter().enumerate() {
        if *c != format!("f{j}") {
            return Err(parse_err(1, format!("expected column `f{j}`, found `{c}`")));
        }
    }

    let mut names: Vec<String> = states.map(|s| s.names().to_vec()).unwrap_or_default();
    let mut samples = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let num = |j: usize| -> Result<T> {
            field(j)
                .trim()
                .parse::<f64>()
                .map(T::lit)
                .map_err(|e| parse_err(line, format!("column `{}`: {e}", cols[j])))
        };
        let index = field(0)
            .trim()
            .parse::<usize>()
            .map_err(|e| parse_err(line, format!("column `index`: {e}")))?;
        let features = (1..=k).map(num).collect::<Result<Vec<T>>>()?;
        let label = if continuous {
            Label::Continuous(vec![num(k + 1)?, num(k + 2)?])
        } else {
            let name = field(k + 1).trim().to_string();
            let id = match names.iter().position(|n| *n == name) {
                Some(id) => id,
                None if states.is_none() => {
                    names.push(name);
                    names.len() - 1
                }
                None => return Err(parse_err(line, format!("unknown state `{name}`"))),
            };
            Label::Discrete(id)
        };
        samples.push(Sample {
            index,
            features,
            label,
        });
    }
    let space = if continuous {
        LabelSpace::Continuous { dim: 2 }
    } else {
        LabelSpace::Discrete(StateSet::new(names)?)
    };
    Dataset::new(space, samples)
}

/// Writes the CSV dataset format read by [`read_csv`].
pub fn write_csv<T: Scalar, W: Write>(dataset: &Dataset<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["index".to_string()];
    header.extend((0..dataset.feature_dim).map(|j| format!("f{j}")));
    match &dataset.space {
        LabelSpace::Discrete(_) => header.push("label".into()),
        LabelSpace::Continuous { dim: 2 } => {
            header.push("label_x".into());
            header.push("label_y".into());
        }
        LabelSpace::Continuous { dim } => {
            return Err(Error::LabelKind(format!(
                "CSV format supports 2-D continuous labels, got dimension {dim}"
            )))
        }
    }
    w.write_record(&header)?;
    for s in &dataset.samples {
        let mut row = vec![s.index.to_string()];
        row.extend(s.features.iter().map(|f| f.to_string()));
        match (&s.label, &dataset.space) {
            (Label::Discrete(id), LabelSpace::Discrete(states)) => {
                row.push(states.name(*id)?.to_string())
            }
            (Label::Continuous(v), _) => row.extend(v.iter().map(|x| x.to_string())),
            _ => return Err(Error::LabelKind("label does not match label space".into())),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
