//! Fault/slice coincidence tables, chi-square independence tests and the
//! fault-based task distribution.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::{FaultEvent, FaultType};
use crate::slicing::SliceAssignment;
pub use crate::special::chi_square_survival;

/// Slice label × {fault present, fault absent} counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub rows: Vec<String>,
    /// `[present, absent]` per row.
    pub counts: Vec<[u64; 2]>,
}

impl ContingencyTable {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|r| r[0] + r[1]).sum()
    }

    pub fn present(&self) -> u64 {
        self.counts.iter().map(|r| r[0]).sum()
    }

    pub fn matrix(&self) -> Vec<Vec<u64>> {
        self.counts.iter().map(|r| r.to_vec()).collect()
    }
}

/// Sorted, merged inclusive ranges.
fn merge_ranges(events: &[&FaultEvent]) -> Vec<(usize, usize)> {
    let mut r: Vec<(usize, usize)> = events.iter().map(|e| (e.start, e.end)).collect();
    r.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(r.len());
    for (s, e) in r {
        match out.last_mut() {
            Some(last) if s <= last.1.saturating_add(1) => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

fn covered(ranges: &[(usize, usize)], index: usize) -> bool {
    let k = ranges.partition_point(|&(s, _)| s <= index);
    k > 0 && ranges[k - 1].1 >= index
}

fn check_range(events: &[&FaultEvent], indices: &[usize]) -> Result<()> {
    let (lo, hi) = match (indices.iter().min(), indices.iter().max()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => (1, 0),
    };
    for e in events {
        if e.start > e.end || e.start < lo || e.end > hi {
            return Err(Error::EventOutOfRange {
                start: e.start,
                end: e.end,
                len: indices.len(),
            });
        }
    }
    Ok(())
}

/// Per-execution coverage: whether each index lies in any event range.
pub fn coverage(events: &[&FaultEvent], indices: &[usize]) -> Result<Vec<bool>> {
    check_range(events, indices)?;
    let ranges = merge_ranges(events);
    Ok(indices.iter().map(|&i| covered(&ranges, i)).collect())
}

/// Cross-tabulates one family's labels against coverage by `events`.
///
/// `assignments` holds exactly one entry per execution of the stream. Rows
/// follow `row_order`, then any further labels in sorted order.
pub fn build_contingency(
    events: &[&FaultEvent],
    assignments: &[&SliceAssignment],
    row_order: &[String],
) -> Result<ContingencyTable> {
    let indices: Vec<usize> = assignments.iter().map(|a| a.index).collect();
    let cov = coverage(events, &indices)?;
    let mut rows: Vec<String> = row_order.to_vec();
    let known: BTreeSet<&String> = rows.iter().collect();
    let extra: BTreeSet<String> = assignments
        .iter()
        .filter(|a| !known.contains(&a.label))
        .map(|a| a.label.clone())
        .collect();
    rows.extend(extra);
    let pos: BTreeMap<&str, usize> = rows.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
    let mut counts = vec![[0u64; 2]; rows.len()];
    for (a, c) in assignments.iter().zip(cov) {
        counts[pos[a.label.as_str()]][usize::from(!c)] += 1;
    }
    Ok(ContingencyTable { rows, counts })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndependenceResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum IndependenceOutcome {
    Tested(IndependenceResult),
    Untestable { reason: String },
}

impl IndependenceOutcome {
    pub fn p_value(&self) -> Option<f64> {
        match self {
            IndependenceOutcome::Tested(r) => Some(r.p_value),
            IndependenceOutcome::Untestable { .. } => None,
        }
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value().is_some_and(|p| p < alpha)
    }
}

/// Pearson chi-square test of independence on an R×C table. Rows and
/// columns with zero marginal are dropped first; no continuity correction.
pub fn chi_squared_test(table: &[Vec<u64>]) -> Result<IndependenceOutcome> {
    let cols = table.first().map_or(0, Vec::len);
    if table.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidArgument("ragged contingency table".into()));
    }
    let row_tot: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_tot: Vec<u64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let rows: Vec<usize> = (0..table.len()).filter(|&i| row_tot[i] > 0).collect();
    let cs: Vec<usize> = (0..cols).filter(|&j| col_tot[j] > 0).collect();
    if rows.len() < 2 || cs.len() < 2 {
        return Ok(IndependenceOutcome::Untestable {
            reason: format!(
                "{} non-empty row(s) and {} non-empty column(s); need at least 2 of each",
                rows.len(),
                cs.len()
            ),
        });
    }
    let n: u64 = row_tot.iter().sum();
    let mut stat = 0.0;
    for &i in &rows {
        for &j in &cs {
            let e = (row_tot[i] as f64 * col_tot[j] as f64) / n as f64;
            let d = table[i][j] as f64 - e;
            stat += d * d / e;
        }
    }
    let df = (rows.len() - 1) * (cs.len() - 1);
    let p_value = chi_square_survival(stat, df as f64)?;
    Ok(IndependenceOutcome::Tested(IndependenceResult {
        statistic: stat,
        df,
        p_value,
    }))
}

/// Normalized probabilities over tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDistribution {
    pub probabilities: BTreeMap<String, f64>,
}

impl TaskDistribution {
    /// Builds from non-negative weights; fails when they sum to zero.
    pub fn from_weights(weights: BTreeMap<String, f64>) -> Result<Self> {
        if weights.is_empty() || weights.values().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::Distribution("weights must be finite and non-negative".into()));
        }
        let s: f64 = weights.values().sum();
        if !(s > 0.0) {
            return Err(Error::Distribution("weights sum to zero".into()));
        }
        Ok(Self {
            probabilities: weights.into_iter().map(|(k, w)| (k, w / s)).collect(),
        })
    }

    pub fn get(&self, task: &str) -> f64 {
        self.probabilities.get(task).copied().unwrap_or(0.0)
    }

    /// Mixes in a uniform floor: `p' = floor + (1 − K·floor)·p`.
    pub fn with_floor(&self, floor: f64) -> Result<Self> {
        let k = self.probabilities.len() as f64;
        if !(0.0..=1.0 / k).contains(&floor) {
            return Err(Error::Distribution(format!("floor {floor} outside [0, 1/{k}]")));
        }
        if floor == 0.0 {
            return Ok(self.clone());
        }
        let mixed = self
            .probabilities
            .iter()
            .map(|(t, &p)| (t.clone(), floor + (1.0 - k * floor) * p))
            .collect();
        Self::from_weights(mixed)
    }
}

/// Counts the task label of every fault-covered execution, per fault type,
/// and sums over the types present in `events`. Every task of `tasks` gets
/// an entry.
pub fn fault_task_counts(
    events: &[FaultEvent],
    assignments: &[&SliceAssignment],
    tasks: &[String],
) -> Result<BTreeMap<String, u64>> {
    let indices: Vec<usize> = assignments.iter().map(|a| a.index).collect();
    let mut counts: BTreeMap<String, u64> = tasks.iter().map(|t| (t.clone(), 0)).collect();
    let types: BTreeSet<FaultType> = events.iter().map(|e| e.fault_type).collect();
    for t in types {
        let evs: Vec<&FaultEvent> = events.iter().filter(|e| e.fault_type == t).collect();
        for (a, c) in assignments.iter().zip(coverage(&evs, &indices)?) {
            if c {
                *counts.entry(a.label.clone()).or_default() += 1;
            }
        }
    }
    Ok(counts)
}

/// Coincidence distribution of tasks over fault-covered executions, with an
/// optional uniform floor.
pub fn fault_task_distribution(
    events: &[FaultEvent],
    assignments: &[&SliceAssignment],
    tasks: &[String],
    floor: f64,
) -> Result<TaskDistribution> {
    let counts = fault_task_counts(events, assignments, tasks)?;
    if counts.values().all(|&c| c == 0) {
        return Err(Error::NoFaults);
    }
    TaskDistribution::from_weights(counts.into_iter().map(|(k, c)| (k, c as f64)).collect())?.with_floor(floor)
}

/// One (fault type, slice family) cell of the localization report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationEntry {
    pub fault_type: FaultType,
    pub family: String,
    pub table: ContingencyTable,
    pub test: IndependenceOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub entries: Vec<LocalizationEntry>,
    /// Task family the distributions were computed on.
    pub task_family: Option<String>,
    /// Per fault type, plus `"pooled"`; `null` when nothing was covered.
    pub task_distributions: BTreeMap<String, Option<TaskDistribution>>,
}

/// Family id → (row order, assignments in stream order).
pub type FamilyAssignments<'a> = BTreeMap<String, (Vec<String>, Vec<&'a SliceAssignment>)>;

/// Groups assignments by family; families keep first-appearance order of
/// executions and `labels` supplies a preferred row order.
pub fn group_by_family<'a>(
    assignments: &'a [SliceAssignment],
    labels: &BTreeMap<String, Vec<String>>,
) -> FamilyAssignments<'a> {
    let mut out: FamilyAssignments<'a> = BTreeMap::new();
    for a in assignments {
        out.entry(a.family.clone())
            .or_insert_with(|| (labels.get(&a.family).cloned().unwrap_or_default(), Vec::new()))
            .1
            .push(a);
    }
    out
}

/// Builds the full localization report.
pub fn localize(
    events: &[FaultEvent],
    families: &FamilyAssignments<'_>,
    fault_types: &BTreeSet<FaultType>,
    task_family: Option<&str>,
    floor: f64,
) -> Result<LocalizationReport> {
    let mut entries = Vec::new();
    for &ft in fault_types {
        let evs: Vec<&FaultEvent> = events.iter().filter(|e| e.fault_type == ft).collect();
        for (family, (order, assigned)) in families {
            let table = build_contingency(&evs, assigned, order)?;
            let test = chi_squared_test(&table.matrix())?;
            entries.push(LocalizationEntry {
                fault_type: ft,
                family: family.clone(),
                table,
                test,
            });
        }
    }
    let mut task_distributions = BTreeMap::new();
    if let Some((order, assigned)) = task_family.and_then(|f| families.get(f)) {
        let mut tasks = order.clone();
        for a in assigned {
            if !tasks.contains(&a.label) {
                tasks.push(a.label.clone());
            }
        }
        let selected: Vec<FaultEvent> = events.iter().filter(|e| fault_types.contains(&e.fault_type)).cloned().collect();
        let attempt = |evs: &[FaultEvent]| match fault_task_distribution(evs, assigned, &tasks, floor) {
            Ok(d) => Ok(Some(d)),
            Err(Error::NoFaults) => Ok(None),
            Err(e) => Err(e),
        };
        for &ft in fault_types {
            let evs: Vec<FaultEvent> = selected.iter().filter(|e| e.fault_type == ft).cloned().collect();
            task_distributions.insert(ft.to_string(), attempt(&evs)?);
        }
        task_distributions.insert("pooled".to_string(), attempt(&selected)?);
    }
    Ok(LocalizationReport {
        entries,
        task_family: task_family.filter(|f| families.contains_key(*f)).map(String::from),
        task_distributions,
    })
}
