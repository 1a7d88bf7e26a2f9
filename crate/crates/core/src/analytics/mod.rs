//! Success rates, size curves and significance tests over judged records.

mod render;
mod stats;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use render::{format_p, format_rate, render_report, Report, ReportFormat};
pub use stats::{ln_gamma, reg_inc_beta, student_t_two_tailed, welch_t, StatsError, WelchResult};

use crate::miner::CommitKind;
use crate::record::EvaluationRecord;
use crate::triage::VerdictCategory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "category", rename_all = "snake_case")]
pub enum Judgment {
    Sealed(VerdictCategory),
    /// Recorded but the campaign is still open.
    Provisional(VerdictCategory),
    Unreviewed,
}

/// What analytics needs from one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub task_id: String,
    pub project: String,
    pub provider_id: String,
    pub kind: CommitKind,
    pub file_loc: usize,
    pub function_loc: usize,
    pub author_date: NaiveDate,
    pub context_overflow: bool,
    pub judgment: Judgment,
}

impl Observation {
    pub fn from_record(r: &EvaluationRecord, judgment: Judgment) -> Observation {
        Observation {
            task_id: r.task.task_id.clone(),
            project: r.task.project.clone(),
            provider_id: r.provider_id.clone(),
            kind: r.task.kind,
            file_loc: r.task.file_loc,
            function_loc: r.task.function_loc,
            author_date: r.task.author_date,
            context_overflow: r.machine_flags.context_overflow,
            judgment,
        }
    }

    fn sealed(&self) -> Option<VerdictCategory> {
        match self.judgment {
            Judgment::Sealed(c) => Some(c),
            _ => None,
        }
    }
}

/// One observation per stored record. Before sealing, agreed verdicts come
/// out as provisional, which every rate refuses.
pub fn observations(triage: &crate::triage::TriageStore) -> Vec<Observation> {
    let sealed = triage.sealed_verdicts();
    let state = triage.snapshot();
    let required = triage.options().required_reviewers;
    triage
        .records()
        .iter()
        .map(|(id, r)| {
            let judgment = match &sealed {
                Some(m) => m.get(id).map_or(Judgment::Unreviewed, |c| Judgment::Sealed(*c)),
                None => state
                    .consensus(id, required)
                    .map_or(Judgment::Unreviewed, Judgment::Provisional),
            };
            Observation::from_record(r, judgment)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum AnalyticsError {
    #[error("{0} records carry verdicts from an unsealed campaign")]
    UnsealedVerdicts(usize),
    #[error("bin edges are empty")]
    EmptyEdges,
    #[error("bin edges must be strictly ascending")]
    EdgesNotAscending,
    #[error("{field} value {value} lies outside the bin edges")]
    OutOfRange { field: String, value: usize },
    #[error("no dated records to split")]
    NoDatedRecords,
    #[error("unknown report format {0:?}")]
    UnknownFormat(String),
}

/// Records that enter rates, plus the two kinds that are set aside.
struct Partition<'a> {
    judged: Vec<(&'a Observation, VerdictCategory)>,
    unreviewed: usize,
    context_overflow: usize,
}

fn partition(obs: &[Observation]) -> Result<Partition<'_>, AnalyticsError> {
    let provisional = obs
        .iter()
        .filter(|o| matches!(o.judgment, Judgment::Provisional(_)))
        .count();
    if provisional > 0 {
        return Err(AnalyticsError::UnsealedVerdicts(provisional));
    }
    let mut p = Partition {
        judged: Vec::new(),
        unreviewed: 0,
        context_overflow: 0,
    };
    for o in obs {
        if o.context_overflow {
            p.context_overflow += 1;
        } else if let Some(c) = o.sealed() {
            p.judged.push((o, c));
        } else {
            p.unreviewed += 1;
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    All,
    Project,
    Provider,
    ProjectProvider,
    Kind,
}

impl GroupBy {
    fn key(self, o: &Observation) -> String {
        match self {
            GroupBy::All => "all".into(),
            GroupBy::Project => o.project.clone(),
            GroupBy::Provider => o.provider_id.clone(),
            GroupBy::ProjectProvider => format!("{}/{}", o.project, o.provider_id),
            GroupBy::Kind => o.kind.label().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRow {
    pub key: String,
    pub n_correct: usize,
    pub n_incorrect: usize,
}

impl SuccessRow {
    pub fn n(&self) -> usize {
        self.n_correct + self.n_incorrect
    }

    pub fn rate(&self) -> Option<f64> {
        (self.n() > 0).then(|| self.n_correct as f64 / self.n() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessTable {
    pub group_by: GroupBy,
    /// Sorted by key.
    pub rows: Vec<SuccessRow>,
    pub unreviewed: usize,
    pub context_overflow_excluded: usize,
}

impl SuccessTable {
    pub fn total(&self) -> usize {
        self.rows.iter().map(SuccessRow::n).sum()
    }

    pub fn row(&self, key: &str) -> Option<&SuccessRow> {
        self.rows.iter().find(|r| r.key == key)
    }
}

pub fn success_rate(obs: &[Observation], group_by: GroupBy) -> Result<SuccessTable, AnalyticsError> {
    let p = partition(obs)?;
    let mut rows: BTreeMap<String, SuccessRow> = BTreeMap::new();
    for (o, c) in &p.judged {
        let key = group_by.key(o);
        let row = rows.entry(key.clone()).or_insert(SuccessRow {
            key,
            n_correct: 0,
            n_incorrect: 0,
        });
        if c.is_correct() {
            row.n_correct += 1;
        } else {
            row.n_incorrect += 1;
        }
    }
    Ok(SuccessTable {
        group_by,
        rows: rows.into_values().collect(),
        unreviewed: p.unreviewed,
        context_overflow_excluded: p.context_overflow,
    })
}

pub fn kind_split(obs: &[Observation]) -> Result<SuccessTable, AnalyticsError> {
    success_rate(obs, GroupBy::Kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeField {
    FileLoc,
    FunctionLoc,
}

impl SizeField {
    pub fn of(self, o: &Observation) -> usize {
        match self {
            SizeField::FileLoc => o.file_loc,
            SizeField::FunctionLoc => o.function_loc,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SizeField::FileLoc => "file_loc",
            SizeField::FunctionLoc => "function_loc",
        }
    }

    /// Boundary used by the `reported` edge set.
    pub fn reported_threshold(self) -> f64 {
        match self {
            SizeField::FileLoc => 603.0,
            SizeField::FunctionLoc => 56.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeSpec {
    /// Min, quartiles and max of the judged records.
    Quartiles,
    /// One boundary at the reported threshold, spanning all records.
    Reported,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub n_correct: usize,
}

impl Bin {
    pub fn rate(&self) -> Option<f64> {
        (self.n > 0).then(|| self.n_correct as f64 / self.n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedRates {
    pub field: SizeField,
    pub bin_edges: Vec<f64>,
    pub bins: Vec<Bin>,
    pub unreviewed: usize,
    pub context_overflow_excluded: usize,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn resolve_edges(spec: &EdgeSpec, field: SizeField, sizes: &[f64]) -> Result<Vec<f64>, AnalyticsError> {
    let mut sorted = sizes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let edges = match spec {
        EdgeSpec::Explicit(e) => e.clone(),
        EdgeSpec::Quartiles => {
            if sorted.is_empty() {
                return Err(AnalyticsError::EmptyEdges);
            }
            let mut e: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|q| quantile(&sorted, *q)).collect();
            e.dedup();
            if e.len() == 1 {
                e.push(e[0] + 1.0);
            }
            e
        }
        EdgeSpec::Reported => {
            let t = field.reported_threshold();
            let lo = sorted.first().copied().unwrap_or(0.0).min(t - 1.0).min(0.0);
            let hi = sorted.last().copied().unwrap_or(t).max(t + 1.0);
            vec![lo, t, hi]
        }
    };
    if edges.len() < 2 {
        return Err(AnalyticsError::EmptyEdges);
    }
    if edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(AnalyticsError::EdgesNotAscending);
    }
    Ok(edges)
}

/// Bin `i` holds `edges[i] <= s < edges[i+1]`; the last bin is closed.
pub fn bin_index(edges: &[f64], s: f64) -> Option<usize> {
    let last = edges.len() - 2;
    if s < edges[0] || s > edges[last + 1] {
        return None;
    }
    Some(edges[1..=last].partition_point(|e| *e <= s))
}

pub fn bin_rates(obs: &[Observation], field: SizeField, spec: &EdgeSpec) -> Result<BinnedRates, AnalyticsError> {
    let p = partition(obs)?;
    let sizes: Vec<f64> = p.judged.iter().map(|(o, _)| field.of(o) as f64).collect();
    let edges = resolve_edges(spec, field, &sizes)?;
    let mut bins: Vec<Bin> = edges
        .windows(2)
        .map(|w| Bin {
            lo: w[0],
            hi: w[1],
            n: 0,
            n_correct: 0,
        })
        .collect();
    for (o, c) in &p.judged {
        let s = field.of(o);
        let i = bin_index(&edges, s as f64).ok_or_else(|| AnalyticsError::OutOfRange {
            field: field.label().into(),
            value: s,
        })?;
        bins[i].n += 1;
        if c.is_correct() {
            bins[i].n_correct += 1;
        }
    }
    Ok(BinnedRates {
        field,
        bin_edges: edges,
        bins,
        unreviewed: p.unreviewed,
        context_overflow_excluded: p.context_overflow,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n_correct: usize,
    pub n: usize,
}

impl Cell {
    pub fn rate(&self) -> f64 {
        self.n_correct as f64 / self.n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffTable {
    pub cutoff: NaiveDate,
    pub median_file_loc: f64,
    /// `cells[before_or_after][below_or_above]`; index 0 is before / below.
    /// Empty cells are `None`, never a 0% rate.
    pub cells: [[Option<Cell>; 2]; 2],
    pub unreviewed: usize,
    pub context_overflow_excluded: usize,
}

/// Before means strictly earlier than `cutoff`; below means at or under the
/// median file size of the included records.
pub fn cutoff_split(obs: &[Observation], cutoff: NaiveDate) -> Result<CutoffTable, AnalyticsError> {
    let p = partition(obs)?;
    if p.judged.is_empty() {
        return Err(AnalyticsError::NoDatedRecords);
    }
    let mut sizes: Vec<f64> = p.judged.iter().map(|(o, _)| o.file_loc as f64).collect();
    sizes.sort_by(f64::total_cmp);
    let median = quantile(&sizes, 0.5);
    let mut cells = [[None::<Cell>; 2]; 2];
    for (o, c) in &p.judged {
        let when = usize::from(o.author_date >= cutoff);
        let size = usize::from(o.file_loc as f64 > median);
        let cell = cells[when][size].get_or_insert(Cell { n_correct: 0, n: 0 });
        cell.n += 1;
        if c.is_correct() {
            cell.n_correct += 1;
        }
    }
    Ok(CutoffTable {
        cutoff,
        median_file_loc: median,
        cells,
        unreviewed: p.unreviewed,
        context_overflow_excluded: p.context_overflow,
    })
}

/// Welch test of a size measure, correct against incorrect patches.
pub fn size_test(obs: &[Observation], field: SizeField) -> Result<Result<WelchResult, StatsError>, AnalyticsError> {
    let p = partition(obs)?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (o, c) in &p.judged {
        let s = field.of(o) as f64;
        if c.is_correct() {
            a.push(s);
        } else {
            b.push(s);
        }
    }
    Ok(welch_t(&a, &b))
}
