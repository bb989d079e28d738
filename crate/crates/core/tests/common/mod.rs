#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use faultrepair::datamodel::Label;
use faultrepair::oracles::{Bounds, FaultEvent, FaultType, FaultTypeSet, LegalityMatrix, OracleConfig};
use faultrepair::PredictionRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Increasing indices with random gaps of 1..=3.
fn indices(rng: &mut ChaCha8Rng, len: usize) -> Vec<usize> {
    let mut i = rng.random_range(0..50);
    (0..len)
        .map(|_| {
            let cur = i;
            i += rng.random_range(1..=3);
            cur
        })
        .collect()
}

/// Sticky random walk over `states` states; `p_switch` per step.
pub fn discrete_stream(seed: u64, len: usize, states: usize, p_switch: f64) -> Vec<PredictionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = indices(&mut rng, len);
    let mut s = rng.random_range(0..states);
    idx.into_iter()
        .map(|index| {
            if rng.random_bool(p_switch) {
                s = rng.random_range(0..states);
            }
            PredictionRecord {
                index,
                input: vec![rng.random_range(-1.0..1.0)],
                output: Label::Discrete(s),
                truth: Some(Label::Discrete(rng.random_range(0..states))),
            }
        })
        .collect()
}

/// 2-D walk with occasional jumps, partly leaving the unit box.
pub fn continuous_stream(seed: u64, len: usize) -> Vec<PredictionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = indices(&mut rng, len);
    let mut x = [0.5f64, 0.5];
    idx.into_iter()
        .map(|index| {
            let scale = if rng.random_bool(0.1) { 0.6 } else { 0.05 };
            for c in &mut x {
                *c += rng.random_range(-scale..scale);
                *c = c.clamp(-0.3, 1.3);
            }
            PredictionRecord {
                index,
                input: vec![rng.random_range(-1.0..1.0)],
                output: Label::Continuous(x.to_vec()),
                truth: Some(Label::Continuous(x.to_vec())),
            }
        })
        .collect()
}

pub fn discrete_config(states: usize, forbidden: &[(usize, usize)], window: usize, k: usize) -> OracleConfig<f64> {
    OracleConfig {
        legality: Some(LegalityMatrix::forbidding(states, forbidden).unwrap()),
        window,
        flicker_threshold: k,
        tv_threshold: None,
        step_threshold: None,
        bounds: None,
        aux: None,
        activity: None,
    }
}

pub fn continuous_config(window: usize, tv: f64, step: f64) -> OracleConfig<f64> {
    OracleConfig {
        legality: None,
        window,
        flicker_threshold: 4,
        tv_threshold: Some(tv),
        step_threshold: Some(step),
        bounds: Some(Bounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()),
        aux: None,
        activity: None,
    }
}

pub fn set(types: &[FaultType]) -> FaultTypeSet {
    types.iter().copied().collect::<BTreeSet<_>>()
}

fn state(r: &PredictionRecord) -> usize {
    match r.output {
        Label::Discrete(s) => s,
        _ => panic!("discrete stream expected"),
    }
}

fn point(r: &PredictionRecord) -> &[f64] {
    match &r.output {
        Label::Continuous(v) => v,
        _ => panic!("continuous stream expected"),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s.sqrt()
}

/// (type, start, end) triples from a naive recomputation over every
/// prefix, in (end, type) order.
pub fn brute_force(stream: &[PredictionRecord], cfg: &OracleConfig<f64>, enabled: &FaultTypeSet) -> Vec<(FaultType, usize, usize)> {
    let w = cfg.window;
    let mut out = Vec::new();
    for t in 0..stream.len() {
        let prefix = &stream[..=t];
        let mut here = Vec::new();
        if t >= 1 && enabled.contains(&FaultType::IllegalTransition) {
            let m = cfg.legality.as_ref().unwrap();
            if !m.is_legal(state(&prefix[t - 1]), state(&prefix[t])).unwrap() {
                here.push((FaultType::IllegalTransition, prefix[t - 1].index, prefix[t].index));
            }
        }
        if prefix.len() >= w && enabled.contains(&FaultType::TemporalInconsistencyDiscrete) {
            let win = &prefix[prefix.len() - w..];
            let mut changes = 0;
            for j in 1..win.len() {
                if state(&win[j]) != state(&win[j - 1]) {
                    changes += 1;
                }
            }
            if changes >= cfg.flicker_threshold {
                here.push((FaultType::TemporalInconsistencyDiscrete, win[0].index, win[w - 1].index));
            }
        }
        if prefix.len() >= w && enabled.contains(&FaultType::TemporalInconsistencyContinuous) {
            let win = &prefix[prefix.len() - w..];
            let mut tv = 0.0;
            for j in 1..win.len() {
                tv += dist(point(&win[j]), point(&win[j - 1]));
            }
            if tv > cfg.tv_threshold.unwrap() {
                here.push((FaultType::TemporalInconsistencyContinuous, win[0].index, win[w - 1].index));
            }
        }
        if t >= 1
            && enabled.contains(&FaultType::RapidMotion)
            && dist(point(&prefix[t]), point(&prefix[t - 1])) > cfg.step_threshold.unwrap()
        {
            here.push((FaultType::RapidMotion, prefix[t - 1].index, prefix[t].index));
        }
        if enabled.contains(&FaultType::OutOfBounds) {
            let b = cfg.bounds.as_ref().unwrap();
            let p = point(&prefix[t]);
            if (0..p.len()).any(|j| p[j] < b.lo[j] || p[j] > b.hi[j]) {
                here.push((FaultType::OutOfBounds, prefix[t].index, prefix[t].index));
            }
        }
        here.sort_by_key(|e| e.0);
        out.extend(here);
    }
    out
}

pub fn triples(events: &[FaultEvent]) -> Vec<(FaultType, usize, usize)> {
    events.iter().map(|e| (e.fault_type, e.start, e.end)).collect()
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}

/// Gamma function by Simpson integration of `t^(z-1) e^(-t)` after the
/// substitution `t = u^2` (smooth for z >= 0.5).
pub fn gamma_numeric(z: f64) -> f64 {
    simpson(|u: f64| 2.0 * u.powf(2.0 * z - 1.0) * (-u * u).exp(), 0.0, 12.0, 200_000)
}

/// Upper chi-square tail by direct integration of the density.
pub fn chi_square_tail_numeric(x: f64, df: f64) -> f64 {
    let k = df / 2.0;
    let norm = 2f64.powf(k) * gamma_numeric(k);
    let density = |t: f64| t.powf(k - 1.0) * (-t / 2.0).exp() / norm;
    simpson(density, x, x + 400.0, 400_000)
}

/// Two-sided Student t tail by direct integration of the density.
pub fn t_two_sided_numeric(t: f64, df: f64) -> f64 {
    let norm = gamma_numeric((df + 1.0) / 2.0) / ((df * std::f64::consts::PI).sqrt() * gamma_numeric(df / 2.0));
    let density = |x: f64| norm * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
    // |x| > t, substituted x = t / s so the tail maps onto (0, 1]
    let t = t.abs();
    if t == 0.0 {
        return 1.0;
    }
    let g = |s: f64| if s == 0.0 { 0.0 } else { density(t / s) * t / (s * s) };
    2.0 * simpson(g, 0.0, 1.0, 400_000)
}
