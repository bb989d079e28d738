//! Decoder abstraction and the reference decoders used by the repair loop.
//!
//! Three decoders are provided: a softmax regression classifier trained by
//! full-batch gradient descent, a nearest-centroid classifier, and a Wiener
//! cascade (ridge regression over lagged features followed by a per-output
//! polynomial). All of them serialise to a JSON document of the form
//! `{"kind": …, "hyperparameters": {…}, "parameters": {…}}`.

use serde::{Deserialize, Serialize};

use crate::datamodel::{Label, LabelSpace, Sample};
use crate::error::{Error, Result};
use crate::linalg::ridge_least_squares;
use crate::scalar::{euclidean, Scalar};

/// How [`FittedDecoder::retrain`] folds newly acquired data in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrainMode {
    /// Extra gradient epochs on the acquired samples only.
    Incremental,
    /// Refit from scratch on the base training set plus the acquired samples.
    #[default]
    Concat,
}

/// Output space of a decoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputKind {
    Discrete { states: usize },
    Continuous { dim: usize },
}

/// A fitted decoder mapping per-bin features to a label.
pub trait Decoder<T: Scalar> {
    fn output_kind(&self) -> OutputKind;

    fn feature_dim(&self) -> usize;

    fn predict(&self, features: &[T]) -> Result<Label<T>>;

    /// Predicts a whole sequence. Decoders with temporal context override
    /// this; the default is pointwise.
    fn predict_samples(&self, samples: &[Sample<T>]) -> Result<Vec<Label<T>>> {
        samples.iter().map(|s| self.predict(&s.features)).collect()
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            index: 0,
            expected,
            got,
        });
    }
    Ok(())
}

fn class_counts<T: Scalar>(samples: &[Sample<T>], n_classes: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; n_classes];
    for s in samples {
        match s.label {
            Label::Discrete(c) if c < n_classes => counts[c] += 1,
            Label::Discrete(c) => return Err(Error::StateOutOfRange(c)),
            Label::Continuous(_) => {
                return Err(Error::LabelKind("classifier trained on continuous labels".into()))
            }
        }
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InsufficientData(format!(
            "class {missing} has no training samples"
        )));
    }
    Ok(counts)
}

fn feature_width<T: Scalar>(samples: &[Sample<T>]) -> Result<usize> {
    let dim = samples
        .first()
        .ok_or_else(|| Error::InsufficientData("no training samples".into()))?
        .features
        .len();
    if let Some(bad) = samples.iter().find(|s| s.features.len() != dim) {
        return Err(Error::DimensionMismatch {
            index: bad.index,
            expected: dim,
            got: bad.features.len(),
        });
    }
    Ok(dim)
}

// ---------------------------------------------------------------------------
// Softmax regression
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoftmaxConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Epochs run by an incremental retrain.
    pub incremental_epochs: usize,
    /// Standardise features with statistics of the initial training set.
    pub standardize: bool,
    pub retrain_mode: RetrainMode,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.2,
            epochs: 300,
            l2: 1e-4,
            incremental_epochs: 10,
            standardize: true,
            retrain_mode: RetrainMode::Concat,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SoftmaxParameters<T> {
    pub classes: usize,
    pub feature_dim: usize,
    /// Row-major `classes × feature_dim`.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub feature_mean: Vec<T>,
    pub feature_scale: Vec<T>,
}

/// Multinomial logistic regression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SoftmaxClassifier<T> {
    pub hyperparameters: SoftmaxConfig,
    pub parameters: SoftmaxParameters<T>,
    /// Mean training loss at the start of each epoch of the most recent
    /// training run.
    #[serde(skip)]
    pub loss_history: Vec<T>,
}

impl<T: Scalar> SoftmaxClassifier<T> {
    pub fn fit(config: &SoftmaxConfig, samples: &[Sample<T>], classes: usize) -> Result<Self> {
        let dim = feature_width(samples)?;
        class_counts(samples, classes)?;
        let (feature_mean, feature_scale) = if config.standardize {
            standardization(samples, dim)
        } else {
            (vec![T::zero(); dim], vec![T::one(); dim])
        };
        let mut model = Self {
            hyperparameters: config.clone(),
            parameters: SoftmaxParameters {
                classes,
                feature_dim: dim,
                weights: vec![T::zero(); classes * dim],
                bias: vec![T::zero(); classes],
                feature_mean,
                feature_scale,
            },
            loss_history: Vec::new(),
        };
        model.descend(samples, config.epochs)?;
        Ok(model)
    }

    fn standardized(&self, features: &[T]) -> Vec<T> {
        let p = &self.parameters;
        features
            .iter()
            .zip(&p.feature_mean)
            .zip(&p.feature_scale)
            .map(|((&x, &m), &s)| (x - m) / s)
            .collect()
    }

    fn scores(&self, z: &[T]) -> Vec<T> {
        let p = &self.parameters;
        (0..p.classes)
            .map(|c| {
                let row = &p.weights[c * p.feature_dim..(c + 1) * p.feature_dim];
                row.iter().zip(z).map(|(&w, &x)| w * x).sum::<T>() + p.bias[c]
            })
            .collect()
    }

    /// Class probabilities for one feature vector.
    pub fn probabilities(&self, features: &[T]) -> Result<Vec<T>> {
        check_dim(self.parameters.feature_dim, features.len())?;
        Ok(softmax(&self.scores(&self.standardized(features))))
    }

    /// Full-batch gradient descent on mean cross-entropy plus L2 penalty.
    fn descend(&mut self, samples: &[Sample<T>], epochs: usize) -> Result<()> {
        let classes = self.parameters.classes;
        let dim = self.parameters.feature_dim;
        let n = T::from_usize_lossy(samples.len());
        let lr = T::lit(self.hyperparameters.learning_rate);
        let l2 = T::lit(self.hyperparameters.l2);
        let inputs: Vec<(Vec<T>, usize)> = samples
            .iter()
            .map(|s| {
                let c = s
                    .label
                    .as_state()
                    .ok_or_else(|| Error::LabelKind("continuous label for classifier".into()))?;
                if c >= classes {
                    return Err(Error::StateOutOfRange(c));
                }
                check_dim(dim, s.features.len())?;
                Ok((self.standardized(&s.features), c))
            })
            .collect::<Result<_>>()?;
        self.loss_history.clear();
        let half = T::lit(0.5);
        let mut scores = vec![T::zero(); classes];
        let mut grad_w = vec![T::zero(); classes * dim];
        let mut grad_b = vec![T::zero(); classes];
        for _ in 0..epochs {
            grad_w.iter_mut().for_each(|g| *g = T::zero());
            grad_b.iter_mut().for_each(|g| *g = T::zero());
            let mut ce = T::zero();
            let params = &self.parameters;
            for (z, c) in &inputs {
                for (k, s) in scores.iter_mut().enumerate() {
                    let row = &params.weights[k * dim..(k + 1) * dim];
                    *s = row.iter().zip(z).map(|(&w, &x)| w * x).sum::<T>() + params.bias[k];
                }
                let m = scores.iter().copied().fold(T::neg_infinity(), T::max);
                let own = scores[*c];
                let mut total = T::zero();
                for s in scores.iter_mut() {
                    *s = (*s - m).exp();
                    total += *s;
                }
                ce += total.ln() + m - own;
                for (k, s) in scores.iter().enumerate() {
                    let mut p = *s / total;
                    if k == *c {
                        p -= T::one();
                    }
                    grad_b[k] += p;
                    for (g, &x) in grad_w[k * dim..(k + 1) * dim].iter_mut().zip(z) {
                        *g += p * x;
                    }
                }
            }
            let penalty: T = params.weights.iter().map(|&w| w * w).sum();
            // loss at the parameters this epoch started from
            self.loss_history.push(ce / n + half * l2 * penalty);
            let params = &mut self.parameters;
            for (w, g) in params.weights.iter_mut().zip(&grad_w) {
                *w -= lr * (*g / n + l2 * *w);
            }
            for (b, g) in params.bias.iter_mut().zip(&grad_b) {
                *b -= lr * *g / n;
            }
        }
        Ok(())
    }
}

impl<T: Scalar> Decoder<T> for SoftmaxClassifier<T> {
    fn output_kind(&self) -> OutputKind {
        OutputKind::Discrete {
            states: self.parameters.classes,
        }
    }

    fn feature_dim(&self) -> usize {
        self.parameters.feature_dim
    }

    /// Argmax of the affine scores; ties go to the lowest class id.
    fn predict(&self, features: &[T]) -> Result<Label<T>> {
        check_dim(self.parameters.feature_dim, features.len())?;
        let scores = self.scores(&self.standardized(features));
        Ok(Label::Discrete(argmax(&scores)))
    }
}

fn standardization<T: Scalar>(samples: &[Sample<T>], dim: usize) -> (Vec<T>, Vec<T>) {
    let n = T::from_usize_lossy(samples.len());
    let mut mean = vec![T::zero(); dim];
    for s in samples {
        for (m, &x) in mean.iter_mut().zip(&s.features) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![T::zero(); dim];
    for s in samples {
        for ((v, &x), &m) in var.iter_mut().zip(&s.features).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let scale = var
        .into_iter()
        .map(|v| {
            let sd = (v / n).sqrt();
            if sd > T::epsilon() {
                sd
            } else {
                T::one()
            }
        })
        .collect();
    (mean, scale)
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(scores: &[T]) -> Vec<T> {
    let m = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = scores.iter().map(|&s| (s - m).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn argmax<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Nearest centroid
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NearestCentroidConfig {
    pub retrain_mode: RetrainMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CentroidParameters<T> {
    pub classes: usize,
    pub feature_dim: usize,
    /// Row-major `classes × feature_dim`.
    pub centroids: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NearestCentroid<T> {
    pub hyperparameters: NearestCentroidConfig,
    pub parameters: CentroidParameters<T>,
}

impl<T: Scalar> NearestCentroid<T> {
    pub fn fit(config: &NearestCentroidConfig, samples: &[Sample<T>], classes: usize) -> Result<Self> {
        let dim = feature_width(samples)?;
        let counts = class_counts(samples, classes)?;
        let mut centroids = vec![T::zero(); classes * dim];
        for s in samples {
            let c = s.label.as_state().expect("checked by class_counts");
            for (acc, &x) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(&s.features) {
                *acc += x;
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            let n = T::from_usize_lossy(count);
            centroids[c * dim..(c + 1) * dim].iter_mut().for_each(|v| *v /= n);
        }
        Ok(Self::from_centroids(config.clone(), classes, dim, centroids))
    }

    pub fn from_centroids(
        hyperparameters: NearestCentroidConfig,
        classes: usize,
        feature_dim: usize,
        centroids: Vec<T>,
    ) -> Self {
        Self {
            hyperparameters,
            parameters: CentroidParameters {
                classes,
                feature_dim,
                centroids,
            },
        }
    }
}

impl<T: Scalar> Decoder<T> for NearestCentroid<T> {
    fn output_kind(&self) -> OutputKind {
        OutputKind::Discrete {
            states: self.parameters.classes,
        }
    }

    fn feature_dim(&self) -> usize {
        self.parameters.feature_dim
    }

    fn predict(&self, features: &[T]) -> Result<Label<T>> {
        let p = &self.parameters;
        check_dim(p.feature_dim, features.len())?;
        let dists: Vec<T> = (0..p.classes)
            .map(|c| -euclidean(&p.centroids[c * p.feature_dim..(c + 1) * p.feature_dim], features))
            .collect();
        Ok(Label::Discrete(argmax(&dists)))
    }
}

// ---------------------------------------------------------------------------
// Wiener cascade
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WienerConfig {
    /// Number of past bins appended to the current one.
    pub lags: usize,
    pub degree: usize,
    pub ridge: f64,
    pub retrain_mode: RetrainMode,
}

impl Default for WienerConfig {
    fn default() -> Self {
        Self {
            lags: 2,
            degree: 3,
            ridge: 1e-6,
            retrain_mode: RetrainMode::Concat,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct WienerParameters<T> {
    pub feature_dim: usize,
    pub output_dim: usize,
    /// Row-major `output_dim × ((lags + 1) · feature_dim + 1)`; the last
    /// entry of each row is the intercept.
    pub linear: Vec<T>,
    /// Row-major `output_dim × (degree + 1)` coefficients of the polynomial
    /// in the normalised linear output `(z − center) / scale`.
    pub polynomial: Vec<T>,
    pub center: Vec<T>,
    pub scale: Vec<T>,
}

/// Linear filter over lagged features followed by a static polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct WienerCascade<T> {
    pub hyperparameters: WienerConfig,
    pub parameters: WienerParameters<T>,
}

/// Design rows `[x_t, x_{t−1}, …, x_{t−L}, 1]`. A lag reaches back only
/// through consecutive indices; past a gap (or the start) the earliest
/// reachable bin is repeated.
pub fn lagged_rows<T: Scalar>(samples: &[Sample<T>], lags: usize) -> Vec<Vec<T>> {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut row = Vec::with_capacity((lags + 1) * s.features.len() + 1);
            row.extend_from_slice(&s.features);
            let mut reach = i;
            for j in 1..=lags {
                if i >= j && reach == i - j + 1 && samples[i - j].index + j == s.index {
                    reach = i - j;
                }
                row.extend_from_slice(&samples[reach].features);
            }
            row.push(T::one());
            row
        })
        .collect()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

impl<T: Scalar> WienerCascade<T> {
    pub fn fit(config: &WienerConfig, samples: &[Sample<T>]) -> Result<Self> {
        if samples.len() < config.lags + 1 {
            return Err(Error::InsufficientData(format!(
                "wiener cascade with {} lags needs at least {} samples, got {}",
                config.lags,
                config.lags + 1,
                samples.len()
            )));
        }
        if config.degree == 0 {
            return Err(Error::InvalidArgument("polynomial degree must be ≥ 1".into()));
        }
        let feature_dim = feature_width(samples)?;
        let output_dim = match &samples[0].label {
            Label::Continuous(v) => v.len(),
            Label::Discrete(_) => {
                return Err(Error::LabelKind("wiener cascade needs continuous labels".into()))
            }
        };
        let mut targets = vec![Vec::with_capacity(samples.len()); output_dim];
        for s in samples {
            let v = s
                .label
                .as_vector()
                .filter(|v| v.len() == output_dim)
                .ok_or_else(|| Error::LabelKind(format!("bad label at index {}", s.index)))?;
            for (t, &y) in targets.iter_mut().zip(v) {
                t.push(y);
            }
        }

        let rows = lagged_rows(samples, config.lags);
        let width = rows[0].len();
        let ridge = T::lit(config.ridge);
        let mut penalize = vec![true; width];
        penalize[width - 1] = false;
        let poly_terms = config.degree + 1;
        let mut poly_penalize = vec![true; poly_terms];
        poly_penalize[0] = false;

        let mut linear = Vec::with_capacity(output_dim * width);
        let mut polynomial = Vec::with_capacity(output_dim * poly_terms);
        let mut center = Vec::with_capacity(output_dim);
        let mut scale = Vec::with_capacity(output_dim);
        for y in &targets {
            let w = ridge_least_squares(&rows, y, ridge, &penalize)?;
            let z: Vec<T> = rows.iter().map(|r| dot(r, &w)).collect();
            let c = crate::scalar::mean(&z);
            let sd = (z.iter().map(|&v| (v - c) * (v - c)).sum::<T>()
                / T::from_usize_lossy(z.len()))
            .sqrt();
            let s = if sd > T::epsilon() { sd } else { T::one() };
            let basis: Vec<Vec<T>> = z.iter().map(|&v| powers((v - c) / s, config.degree)).collect();
            let coef = ridge_least_squares(&basis, y, ridge, &poly_penalize)?;
            linear.extend(w);
            polynomial.extend(coef);
            center.push(c);
            scale.push(s);
        }
        Ok(Self {
            hyperparameters: config.clone(),
            parameters: WienerParameters {
                feature_dim,
                output_dim,
                linear,
                polynomial,
                center,
                scale,
            },
        })
    }

    fn row_width(&self) -> usize {
        (self.hyperparameters.lags + 1) * self.parameters.feature_dim + 1
    }

    /// Linear-stage weights for one output dimension (intercept last).
    pub fn linear_weights(&self, output: usize) -> &[T] {
        let w = self.row_width();
        &self.parameters.linear[output * w..(output + 1) * w]
    }

    fn cascade(&self, row: &[T]) -> Label<T> {
        let p = &self.parameters;
        let terms = self.hyperparameters.degree + 1;
        let out = (0..p.output_dim)
            .map(|d| {
                let z = dot(row, self.linear_weights(d));
                let u = (z - p.center[d]) / p.scale[d];
                dot(&powers(u, self.hyperparameters.degree), &p.polynomial[d * terms..(d + 1) * terms])
            })
            .collect();
        Label::Continuous(out)
    }
}

fn powers<T: Scalar>(u: T, degree: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(degree + 1);
    let mut acc = T::one();
    for _ in 0..=degree {
        out.push(acc);
        acc *= u;
    }
    out
}

impl<T: Scalar> Decoder<T> for WienerCascade<T> {
    fn output_kind(&self) -> OutputKind {
        OutputKind::Continuous {
            dim: self.parameters.output_dim,
        }
    }

    fn feature_dim(&self) -> usize {
        self.parameters.feature_dim
    }

    /// Single-bin prediction: every lag slot holds the current bin.
    fn predict(&self, features: &[T]) -> Result<Label<T>> {
        check_dim(self.parameters.feature_dim, features.len())?;
        let mut row = Vec::with_capacity(self.row_width());
        for _ in 0..=self.hyperparameters.lags {
            row.extend_from_slice(features);
        }
        row.push(T::one());
        Ok(self.cascade(&row))
    }

    fn predict_samples(&self, samples: &[Sample<T>]) -> Result<Vec<Label<T>>> {
        for s in samples {
            if s.features.len() != self.parameters.feature_dim {
                return Err(Error::DimensionMismatch {
                    index: s.index,
                    expected: self.parameters.feature_dim,
                    got: s.features.len(),
                });
            }
        }
        Ok(lagged_rows(samples, self.hyperparameters.lags)
            .iter()
            .map(|r| self.cascade(r))
            .collect())
    }
}

// ---------------------------------------------------------------------------
// Auxiliary awake/asleep classifier
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vigilance {
    Awake,
    Asleep,
}

/// Binary classifier over auxiliary feature columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AuxiliaryBinaryClassifier {
    /// Awake iff the mean of `columns` lies above (or below, when
    /// `awake_above` is false) `threshold`.
    Threshold {
        columns: Vec<usize>,
        threshold: f64,
        #[serde(default = "default_true")]
        awake_above: bool,
    },
    /// Awake iff `σ(w · x[columns] + b) ≥ 0.5`.
    Logistic {
        columns: Vec<usize>,
        weights: Vec<f64>,
        bias: f64,
    },
    Constant { verdict: Vigilance },
}

fn default_true() -> bool {
    true
}

impl AuxiliaryBinaryClassifier {
    pub fn validate(&self, feature_dim: usize) -> Result<()> {
        let cols = match self {
            Self::Threshold { columns, .. } => columns,
            Self::Logistic {
                columns, weights, ..
            } => {
                if weights.len() != columns.len() {
                    return Err(Error::InvalidArgument(
                        "logistic weights and columns differ in length".into(),
                    ));
                }
                columns
            }
            Self::Constant { .. } => return Ok(()),
        };
        if cols.is_empty() {
            return Err(Error::InvalidArgument("auxiliary classifier has no columns".into()));
        }
        if let Some(&c) = cols.iter().find(|&&c| c >= feature_dim) {
            return Err(Error::DimensionMismatch {
                index: c,
                expected: feature_dim,
                got: c + 1,
            });
        }
        Ok(())
    }

    pub fn predict<T: Scalar>(&self, input: &[T]) -> Result<Vigilance> {
        self.validate(input.len())?;
        let verdict = |awake: bool| if awake { Vigilance::Awake } else { Vigilance::Asleep };
        Ok(match self {
            Self::Threshold {
                columns,
                threshold,
                awake_above,
            } => {
                let m = columns.iter().map(|&c| input[c].to_f64_lossy()).sum::<f64>()
                    / columns.len() as f64;
                verdict((m > *threshold) == *awake_above)
            }
            Self::Logistic {
                columns,
                weights,
                bias,
            } => {
                let z: f64 = columns
                    .iter()
                    .zip(weights)
                    .map(|(&c, &w)| w * input[c].to_f64_lossy())
                    .sum::<f64>()
                    + bias;
                verdict(z >= 0.0)
            }
            Self::Constant { verdict: v } => *v,
        })
    }
}

// ---------------------------------------------------------------------------
// Decoder config → fitted decoder
// ---------------------------------------------------------------------------

/// Decoder choice plus hyperparameters, as it appears in run configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecoderSpec {
    Softmax(#[serde(default)] SoftmaxConfig),
    NearestCentroid(#[serde(default)] NearestCentroidConfig),
    WienerCascade(#[serde(default)] WienerConfig),
}

impl Default for DecoderSpec {
    fn default() -> Self {
        DecoderSpec::Softmax(SoftmaxConfig::default())
    }
}

impl DecoderSpec {
    pub fn retrain_mode(&self) -> RetrainMode {
        match self {
            DecoderSpec::Softmax(c) => c.retrain_mode,
            DecoderSpec::NearestCentroid(c) => c.retrain_mode,
            DecoderSpec::WienerCascade(c) => c.retrain_mode,
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, DecoderSpec::WienerCascade(_))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DecoderSpec::Softmax(c) => {
                if !(c.learning_rate >= 0.0 && c.l2 >= 0.0) {
                    return Err(Error::Config("softmax learning_rate and l2 must be ≥ 0".into()));
                }
            }
            DecoderSpec::NearestCentroid(c) => {
                if c.retrain_mode == RetrainMode::Incremental {
                    return Err(Error::UnsupportedRetrain(
                        "nearest centroid is not gradient-trained".into(),
                    ));
                }
            }
            DecoderSpec::WienerCascade(c) => {
                if c.retrain_mode == RetrainMode::Incremental {
                    return Err(Error::UnsupportedRetrain(
                        "wiener cascade is not gradient-trained".into(),
                    ));
                }
                if c.degree == 0 || c.ridge < 0.0 {
                    return Err(Error::Config("wiener degree must be ≥ 1 and ridge ≥ 0".into()));
                }
            }
        }
        Ok(())
    }

    pub fn fit<T: Scalar>(&self, samples: &[Sample<T>], space: &LabelSpace) -> Result<FittedDecoder<T>> {
        let classes = || {
            space
                .states()
                .map(|s| s.len())
                .ok_or_else(|| Error::LabelKind("classifier needs a discrete label space".into()))
        };
        Ok(match self {
            DecoderSpec::Softmax(c) => FittedDecoder::Softmax(SoftmaxClassifier::fit(c, samples, classes()?)?),
            DecoderSpec::NearestCentroid(c) => {
                FittedDecoder::NearestCentroid(NearestCentroid::fit(c, samples, classes()?)?)
            }
            DecoderSpec::WienerCascade(c) => FittedDecoder::WienerCascade(WienerCascade::fit(c, samples)?),
        })
    }
}

/// Any of the reference decoders after fitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum FittedDecoder<T> {
    Softmax(SoftmaxClassifier<T>),
    NearestCentroid(NearestCentroid<T>),
    WienerCascade(WienerCascade<T>),
}

impl<T: Scalar> FittedDecoder<T> {
    fn inner(&self) -> &dyn Decoder<T> {
        match self {
            FittedDecoder::Softmax(d) => d,
            FittedDecoder::NearestCentroid(d) => d,
            FittedDecoder::WienerCascade(d) => d,
        }
    }

    pub fn retrain_mode(&self) -> RetrainMode {
        match self {
            FittedDecoder::Softmax(d) => d.hyperparameters.retrain_mode,
            FittedDecoder::NearestCentroid(d) => d.hyperparameters.retrain_mode,
            FittedDecoder::WienerCascade(d) => d.hyperparameters.retrain_mode,
        }
    }

    /// Returns a new decoder trained on `acquired`: incremental mode runs
    /// extra epochs on `acquired` alone, concat mode refits on
    /// `base ∪ acquired`.
    pub fn retrain(&self, acquired: &[Sample<T>], base: &[Sample<T>]) -> Result<Self> {
        if acquired.is_empty() {
            return Err(Error::InsufficientData("no acquired samples to retrain on".into()));
        }
        match (self.retrain_mode(), self) {
            (RetrainMode::Incremental, FittedDecoder::Softmax(d)) => {
                let mut next = d.clone();
                next.descend(acquired, d.hyperparameters.incremental_epochs)?;
                Ok(FittedDecoder::Softmax(next))
            }
            (RetrainMode::Incremental, _) => Err(Error::UnsupportedRetrain(
                "incremental retraining needs a gradient-trained decoder".into(),
            )),
            (RetrainMode::Concat, _) => {
                let mut all = Vec::with_capacity(base.len() + acquired.len());
                all.extend_from_slice(base);
                all.extend_from_slice(acquired);
                match self {
                    FittedDecoder::Softmax(d) => Ok(FittedDecoder::Softmax(SoftmaxClassifier::fit(
                        &d.hyperparameters,
                        &all,
                        d.parameters.classes,
                    )?)),
                    FittedDecoder::NearestCentroid(d) => Ok(FittedDecoder::NearestCentroid(
                        NearestCentroid::fit(&d.hyperparameters, &all, d.parameters.classes)?,
                    )),
                    FittedDecoder::WienerCascade(d) => {
                        Ok(FittedDecoder::WienerCascade(WienerCascade::fit(&d.hyperparameters, &all)?))
                    }
                }
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl<T: Scalar> Decoder<T> for FittedDecoder<T> {
    fn output_kind(&self) -> OutputKind {
        self.inner().output_kind()
    }

    fn feature_dim(&self) -> usize {
        self.inner().feature_dim()
    }

    fn predict(&self, features: &[T]) -> Result<Label<T>> {
        self.inner().predict(features)
    }

    fn predict_samples(&self, samples: &[Sample<T>]) -> Result<Vec<Label<T>>> {
        self.inner().predict_samples(samples)
    }
}
