//! Seeded synthetic scenarios: a discrete state process with legality
//! constraints and a continuous reflecting random walk.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Geometric, Normal};
use serde::{Deserialize, Serialize};

use crate::datamodel::{Dataset, Label, LabelSpace, Sample, StateSet};
use crate::decoders::Vigilance;
use crate::error::{Error, Result};
use crate::oracles::{Bounds, LegalityMatrix};
use crate::scalar::Scalar;

/// Optional auxiliary channel appended as the last feature column:
/// `+1` for awake states, `−1` for asleep ones, plus Gaussian noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxChannel {
    /// Vigilance per state, in state order.
    pub vigilance: Vec<Vigilance>,
    pub noise: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteScenario {
    pub states: Vec<String>,
    /// Forbidden direct transitions, by state name.
    #[serde(default)]
    pub forbidden: Vec<(String, String)>,
    /// Target fraction of time spent in each state.
    pub weights: Vec<f64>,
    /// Mean number of bins per visit, averaged over visits.
    pub mean_dwell: f64,
    /// Feature mean vector per state.
    pub means: Vec<Vec<f64>>,
    pub noise: f64,
    /// Per-bin probability of starting an artifact segment.
    #[serde(default)]
    pub artifact_rate: f64,
    #[serde(default = "default_artifact_length")]
    pub artifact_length: usize,
    /// Constant feature value of a hypoactive segment.
    #[serde(default = "default_artifact_low")]
    pub artifact_low: f64,
    /// Constant feature value of a hyperactive segment.
    #[serde(default = "default_artifact_high")]
    pub artifact_high: f64,
    #[serde(default)]
    pub aux: Option<AuxChannel>,
    pub length: usize,
    pub seed: u64,
}

fn default_artifact_length() -> usize {
    5
}
fn default_artifact_low() -> f64 {
    -10.0
}
fn default_artifact_high() -> f64 {
    10.0
}

/// Generated data with injection bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated<T: Scalar> {
    pub dataset: Dataset<T>,
    /// Indices whose features were replaced by an artifact.
    pub artifact_indices: Vec<usize>,
}

impl DiscreteScenario {
    pub fn state_set(&self) -> Result<StateSet> {
        StateSet::new(self.states.iter().cloned())
    }

    pub fn legality(&self) -> Result<LegalityMatrix> {
        let set = self.state_set()?;
        let pairs = self
            .forbidden
            .iter()
            .map(|(a, b)| Ok((set.id(a)?, set.id(b)?)))
            .collect::<Result<Vec<_>>>()?;
        LegalityMatrix::forbidding(set.len(), &pairs)
    }

    pub fn feature_dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len) + usize::from(self.aux.is_some())
    }

    /// Jump-chain transition matrix: from each state, the next state is a
    /// legal successor other than itself, chosen in proportion to weight.
    fn jump_chain(&self, legality: &LegalityMatrix) -> Result<Vec<Vec<f64>>> {
        let n = self.states.len();
        (0..n)
            .map(|i| {
                let mut row = vec![0.0; n];
                for j in legality.successors(i).filter(|&j| j != i) {
                    row[j] = self.weights[j];
                }
                let s: f64 = row.iter().sum();
                if s <= 0.0 {
                    return Err(Error::Scenario(format!("state `{}` has no legal successor", self.states[i])));
                }
                Ok(row.into_iter().map(|w| w / s).collect())
            })
            .collect()
    }

    /// Mean dwell per state so that time fractions match `weights`.
    pub fn dwell_means(&self) -> Result<Vec<f64>> {
        let legality = self.legality()?;
        let p = self.jump_chain(&legality)?;
        let nu = stationary(&p);
        let total: f64 = self.weights.iter().sum();
        let c = self.mean_dwell / total;
        self.weights
            .iter()
            .zip(&nu)
            .zip(&self.states)
            .map(|((&w, &v), name)| {
                let d = c * w / v;
                if d < 1.0 {
                    Err(Error::Scenario(format!(
                        "state `{name}` would need a mean dwell of {d:.3} < 1 bin; raise mean_dwell"
                    )))
                } else {
                    Ok(d)
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.states.len();
        if n < 2 {
            return Err(Error::Scenario("need at least two states".into()));
        }
        self.state_set()?;
        if self.weights.len() != n || self.weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Scenario("one positive weight per state required".into()));
        }
        if self.means.len() != n {
            return Err(Error::Scenario("one mean vector per state required".into()));
        }
        let d = self.means[0].len();
        if d == 0 || self.means.iter().any(|m| m.len() != d) {
            return Err(Error::Scenario("mean vectors must share a non-zero width".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::Scenario("noise must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.artifact_rate) || self.artifact_length == 0 {
            return Err(Error::Scenario("artifact_rate must lie in [0, 1) and artifact_length be > 0".into()));
        }
        if !(self.mean_dwell >= 1.0) {
            return Err(Error::Scenario("mean_dwell must be >= 1".into()));
        }
        if self.length == 0 {
            return Err(Error::Scenario("length must be > 0".into()));
        }
        if let Some(aux) = &self.aux {
            if aux.vigilance.len() != n || !(aux.noise >= 0.0) {
                return Err(Error::Scenario("aux channel needs one vigilance per state and noise >= 0".into()));
            }
        }
        let legality = self.legality()?;
        check_strongly_connected(&legality, &self.states)?;
        self.dwell_means()?;
        Ok(())
    }
}

fn check_strongly_connected(legality: &LegalityMatrix, names: &[String]) -> Result<()> {
    let n = legality.states();
    for start in 0..n {
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(s) = stack.pop() {
            for t in legality.successors(s) {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        if let Some(u) = seen.iter().position(|&x| !x) {
            return Err(Error::Scenario(format!(
                "state `{}` is unreachable from `{}`",
                names[u], names[start]
            )));
        }
    }
    Ok(())
}

/// Stationary distribution by power iteration on the lazy chain.
fn stationary(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..100_000 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                next[j] += v[i] * 0.5 * (p[i][j] + if i == j { 1.0 } else { 0.0 });
            }
        }
        let delta: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if delta < 1e-15 {
            break;
        }
    }
    v
}

fn normal(sigma: f64) -> Result<Option<Normal<f64>>> {
    if sigma == 0.0 {
        return Ok(None);
    }
    Normal::new(0.0, sigma)
        .map(Some)
        .map_err(|e| Error::Scenario(e.to_string()))
}

fn draw(rng: &mut ChaCha8Rng, n: &Option<Normal<f64>>) -> f64 {
    n.as_ref().map_or(0.0, |d| d.sample(rng))
}

pub fn gen_discrete<T: Scalar>(scenario: &DiscreteScenario) -> Result<Generated<T>> {
    scenario.validate()?;
    let legality = scenario.legality()?;
    let jump = scenario.jump_chain(&legality)?;
    let dwell = scenario.dwell_means()?;
    let geo: Vec<Geometric> = dwell
        .iter()
        .map(|&d| Geometric::new(1.0 / d).map_err(|e| Error::Scenario(e.to_string())))
        .collect::<Result<_>>()?;
    let jump_dists: Vec<WeightedIndex<f64>> = jump
        .iter()
        .map(|row| WeightedIndex::new(row).map_err(|e| Error::Scenario(e.to_string())))
        .collect::<Result<_>>()?;
    let noise = normal(scenario.noise)?;
    let aux_noise = normal(scenario.aux.as_ref().map_or(0.0, |a| a.noise))?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);

    let mut labels = Vec::with_capacity(scenario.length);
    let start = WeightedIndex::new(&scenario.weights).map_err(|e| Error::Scenario(e.to_string()))?;
    let mut state = start.sample(&mut rng);
    while labels.len() < scenario.length {
        let stay = 1 + geo[state].sample(&mut rng) as usize;
        labels.extend(std::iter::repeat_n(state, stay.min(scenario.length - labels.len())));
        state = jump_dists[state].sample(&mut rng);
    }

    let mut samples = Vec::with_capacity(scenario.length);
    let mut artifacts = Vec::new();
    let mut artifact: Option<(usize, f64)> = None;
    for (i, &s) in labels.iter().enumerate() {
        let mut features: Vec<T> = scenario.means[s]
            .iter()
            .map(|&m| T::lit(m + draw(&mut rng, &noise)))
            .collect();
        if artifact.is_none() && scenario.artifact_rate > 0.0 && rng.random::<f64>() < scenario.artifact_rate {
            let level = if rng.random::<bool>() {
                scenario.artifact_high
            } else {
                scenario.artifact_low
            };
            artifact = Some((scenario.artifact_length, level));
        }
        if let Some((left, level)) = artifact {
            features.iter_mut().for_each(|f| *f = T::lit(level));
            artifacts.push(i);
            artifact = (left > 1).then_some((left - 1, level));
        }
        if let Some(aux) = &scenario.aux {
            let base = if aux.vigilance[s] == Vigilance::Awake { 1.0 } else { -1.0 };
            features.push(T::lit(base + draw(&mut rng, &aux_noise)));
        }
        samples.push(Sample {
            index: i,
            features,
            label: Label::Discrete(s),
        });
    }
    Ok(Generated {
        dataset: Dataset::new(LabelSpace::Discrete(scenario.state_set()?), samples)?,
        artifact_indices: artifacts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousScenario {
    pub bounds: Bounds<f64>,
    pub step_sigma: f64,
    /// Velocity persistence in `[0, 1)`.
    #[serde(default)]
    pub momentum: f64,
    /// Rows map `[x, y, vx, vy]` to one feature each.
    pub mixing: Vec<Vec<f64>>,
    pub noise: f64,
    pub length: usize,
    pub seed: u64,
}

impl ContinuousScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_sigma > 0.0) {
            return Err(Error::Scenario(format!("step_sigma must be > 0, got {}", self.step_sigma)));
        }
        self.bounds.validate().map_err(|e| Error::Scenario(e.to_string()))?;
        if self.bounds.dim() != 2 {
            return Err(Error::Scenario("continuous scenarios are 2-D".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Scenario("momentum must lie in [0, 1)".into()));
        }
        if self.mixing.is_empty() || self.mixing.iter().any(|r| r.len() != 4) {
            return Err(Error::Scenario("mixing needs rows of width 4".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::Scenario("noise must be >= 0".into()));
        }
        if self.length == 0 {
            return Err(Error::Scenario("length must be > 0".into()));
        }
        Ok(())
    }

    /// Largest possible distance between consecutive positions.
    pub fn max_step(&self) -> f64 {
        3.0 * self.step_sigma
    }
}

/// Reflects `x` into `[lo, hi]`.
fn reflect(mut x: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    x = (x - lo).rem_euclid(2.0 * w);
    lo + if x > w { 2.0 * w - x } else { x }
}

pub fn gen_continuous<T: Scalar>(scenario: &ContinuousScenario) -> Result<Generated<T>> {
    scenario.validate()?;
    let step = Normal::new(0.0, scenario.step_sigma).map_err(|e| Error::Scenario(e.to_string()))?;
    let noise = normal(scenario.noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let (lo, hi) = (&scenario.bounds.lo, &scenario.bounds.hi);
    let cap = scenario.max_step();

    let mut pos: Vec<f64> = (0..2).map(|k| rng.random_range(lo[k]..=hi[k])).collect();
    let mut vel = [0.0f64; 2];
    let mut samples = Vec::with_capacity(scenario.length);
    for i in 0..scenario.length {
        let mut disp = [0.0f64; 2];
        if i > 0 {
            for v in &mut vel {
                *v = scenario.momentum * *v + step.sample(&mut rng);
            }
            let norm = vel[0].hypot(vel[1]);
            if norm > cap {
                vel.iter_mut().for_each(|v| *v *= cap / norm);
            }
            for k in 0..2 {
                let next = reflect(pos[k] + vel[k], lo[k], hi[k]);
                disp[k] = next - pos[k];
                if (next - (pos[k] + vel[k])).abs() > 0.0 {
                    vel[k] = -vel[k];
                }
                pos[k] = next;
            }
        }
        let latent = [pos[0], pos[1], disp[0], disp[1]];
        let features = scenario
            .mixing
            .iter()
            .map(|row| T::lit(row.iter().zip(&latent).map(|(a, b)| a * b).sum::<f64>() + draw(&mut rng, &noise)))
            .collect();
        samples.push(Sample {
            index: i,
            features,
            label: Label::Continuous(pos.iter().map(|&p| T::lit(p)).collect()),
        });
    }
    Ok(Generated {
        dataset: Dataset::new(LabelSpace::Continuous { dim: 2 }, samples)?,
        artifact_indices: Vec::new(),
    })
}
