//! Per-task distortion, weighted totals and winner maps over task weights.
//!
//! Accuracies come in as rows of
//! `task_id,metric,direction,criterion,keep_count,qp,accuracy`. A row whose
//! criterion is `full` gives the all-channel accuracy for its task; every
//! other row is keyed by `(criterion, keep_count, qp)`, with `qp` left empty
//! for hard selection.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FULL: &str = "full";
pub const TIE: &str = "tie";
pub const WEIGHT_TOLERANCE: f64 = 1e-9;
/// Totals closer than this (relative to their size, floored at 1) tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "mIoU", alias = "miou")]
    MIoU,
    #[serde(rename = "RMSE", alias = "rmse")]
    Rmse,
    #[serde(rename = "PSNR", alias = "psnr")]
    Psnr,
    #[serde(rename = "proxy")]
    Proxy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

/// Which selected configuration an accuracy belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SelectionKey {
    pub keep_count: usize,
    pub qp: Option<u8>,
}

impl SelectionKey {
    pub fn hard(keep_count: usize) -> Self {
        Self {
            keep_count,
            qp: None,
        }
    }

    pub fn soft(keep_count: usize, qp: u8) -> Self {
        Self {
            keep_count,
            qp: Some(qp),
        }
    }
}

impl fmt::Display for SelectionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.qp {
            Some(qp) => write!(f, "C'={} qp={qp}", self.keep_count),
            None => write!(f, "C'={}", self.keep_count),
        }
    }
}

/// One line of the ingestion table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub task_id: u32,
    pub metric: Metric,
    pub direction: Direction,
    pub criterion: String,
    pub keep_count: Option<usize>,
    pub qp: Option<u8>,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyRecord {
    pub task_id: u32,
    pub metric: Metric,
    pub direction: Direction,
    pub full: f64,
    pub selected: BTreeMap<(String, SelectionKey), f64>,
}

impl AccuracyRecord {
    pub fn new(task_id: u32, metric: Metric, direction: Direction, full: f64) -> Result<Self> {
        if !full.is_finite() || full == 0.0 {
            return Err(Error::domain(format!(
                "task {task_id}: full accuracy must be finite and nonzero, got {full}"
            )));
        }
        Ok(Self {
            task_id,
            metric,
            direction,
            full,
            selected: BTreeMap::new(),
        })
    }

    pub fn insert(&mut self, criterion: &str, key: SelectionKey, accuracy: f64) -> Result<()> {
        if !accuracy.is_finite() {
            return Err(Error::domain(format!(
                "task {}: accuracy for {criterion} at {key} is not finite",
                self.task_id
            )));
        }
        if self
            .selected
            .insert((criterion.to_string(), key), accuracy)
            .is_some()
        {
            return Err(Error::domain(format!(
                "task {}: duplicate accuracy for {criterion} at {key}",
                self.task_id
            )));
        }
        Ok(())
    }

    pub fn accuracy(&self, criterion: &str, key: SelectionKey) -> Result<f64> {
        self.selected
            .get(&(criterion.to_string(), key))
            .copied()
            .ok_or_else(|| {
                Error::domain(format!(
                    "no accuracy for task {}, criterion {criterion} at {key}",
                    self.task_id
                ))
            })
    }

    fn rows(&self) -> impl Iterator<Item = AccuracyRow> + '_ {
        let row = move |criterion: &str, keep_count, qp, accuracy| AccuracyRow {
            task_id: self.task_id,
            metric: self.metric,
            direction: self.direction,
            criterion: criterion.to_string(),
            keep_count,
            qp,
            accuracy,
        };
        std::iter::once(row(FULL, None, None, self.full)).chain(
            self.selected
                .iter()
                .map(move |((c, k), &a)| row(c, Some(k.keep_count), k.qp, a)),
        )
    }
}

/// Groups rows into one record per task, ordered by task id.
pub fn records_from_rows(rows: &[AccuracyRow]) -> Result<Vec<AccuracyRecord>> {
    let mut records: BTreeMap<u32, AccuracyRecord> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.criterion == FULL) {
        let rec = AccuracyRecord::new(r.task_id, r.metric, r.direction, r.accuracy)?;
        if records.insert(r.task_id, rec).is_some() {
            return Err(Error::domain(format!(
                "task {} has more than one full accuracy",
                r.task_id
            )));
        }
    }
    for r in rows.iter().filter(|r| r.criterion != FULL) {
        let rec = records.get_mut(&r.task_id).ok_or_else(|| {
            Error::domain(format!("task {} has no full accuracy row", r.task_id))
        })?;
        if (rec.metric, rec.direction) != (r.metric, r.direction) {
            return Err(Error::domain(format!(
                "task {} mixes metrics or directions",
                r.task_id
            )));
        }
        let keep_count = r.keep_count.ok_or_else(|| {
            Error::domain(format!(
                "task {}, criterion {}: keep_count is required",
                r.task_id, r.criterion
            ))
        })?;
        rec.insert(
            &r.criterion,
            SelectionKey {
                keep_count,
                qp: r.qp,
            },
            r.accuracy,
        )?;
    }
    Ok(records.into_values().collect())
}

pub fn parse_accuracy_csv(text: &str) -> Result<Vec<AccuracyRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<AccuracyRow>, _>>()
        .map_err(|e| {
            let offset = e.position().map_or(0, |p| p.byte());
            Error::format(offset, e.to_string())
        })?;
    records_from_rows(&rows)
}

pub fn parse_accuracy_json(text: &str) -> Result<Vec<AccuracyRecord>> {
    let rows: Vec<AccuracyRow> =
        serde_json::from_str(text).map_err(|e| Error::format(0, e.to_string()))?;
    records_from_rows(&rows)
}

/// Reads `.json` files as a JSON array of rows and anything else as CSV.
pub fn read_accuracy(path: &Path) -> Result<Vec<AccuracyRecord>> {
    let bytes = crate::fsutil::read_all(path)?;
    let text = String::from_utf8(bytes).map_err(|e| {
        Error::format(e.utf8_error().valid_up_to() as u64, "accuracy file is not UTF-8")
    })?;
    if path.extension().is_some_and(|e| e == "json") {
        parse_accuracy_json(&text)
    } else {
        parse_accuracy_csv(&text)
    }
}

pub fn accuracy_csv(records: &[AccuracyRecord]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in records.iter().flat_map(AccuracyRecord::rows) {
        w.serialize(row).map_err(|e| Error::domain(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::domain(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// `|A_full - A_sel| / A_full`.
pub fn task_distortion(rec: &AccuracyRecord, criterion: &str, key: SelectionKey) -> Result<f64> {
    let selected = rec.accuracy(criterion, key)?;
    Ok((rec.full - selected).abs() / rec.full.abs())
}

pub fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::domain(format!(
            "weights must be nonnegative and finite: {weights:?}"
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::domain(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

/// `sum_j w_j D_j`.
pub fn total_distortion(distortions: &[f64], weights: &[f64]) -> Result<f64> {
    if distortions.len() != weights.len() {
        return Err(Error::domain(format!(
            "{} distortions for {} weights",
            distortions.len(),
            weights.len()
        )));
    }
    check_weights(weights)?;
    Ok(distortions.iter().zip(weights).map(|(d, w)| d * w).sum())
}

/// Per-task distortions of each criterion, tasks in record order.
pub fn distortion_table(
    records: &[AccuracyRecord],
    criteria: &[String],
    key: SelectionKey,
) -> Result<BTreeMap<String, Vec<f64>>> {
    criteria
        .iter()
        .map(|c| {
            let d = records
                .iter()
                .map(|r| task_distortion(r, c, key))
                .collect::<Result<Vec<_>>>()?;
            Ok((c.clone(), d))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionDistortion {
    pub per_task: BTreeMap<u32, f64>,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub key: SelectionKey,
    pub weights: BTreeMap<u32, f64>,
    pub criteria: BTreeMap<String, CriterionDistortion>,
}

impl DistortionReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("criterion,task_id,weight,distortion\n");
        for (c, d) in &self.criteria {
            for (t, v) in &d.per_task {
                out.push_str(&format!("{c},{t},{},{v}\n", self.weights[t]));
            }
            out.push_str(&format!("{c},total,1,{}\n", d.total));
        }
        out
    }
}

pub fn distortion_report(
    records: &[AccuracyRecord],
    criteria: &[String],
    key: SelectionKey,
    weights: &[f64],
) -> Result<DistortionReport> {
    if weights.len() != records.len() {
        return Err(Error::domain(format!(
            "{} weights for {} tasks",
            weights.len(),
            records.len()
        )));
    }
    check_weights(weights)?;
    let table = distortion_table(records, criteria, key)?;
    let criteria = table
        .into_iter()
        .map(|(c, d)| {
            let total = total_distortion(&d, weights)?;
            let per_task = records.iter().map(|r| r.task_id).zip(d).collect();
            Ok((c, CriterionDistortion { per_task, total }))
        })
        .collect::<Result<_>>()?;
    Ok(DistortionReport {
        key,
        weights: records.iter().map(|r| r.task_id).zip(weights.iter().copied()).collect(),
        criteria,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint {
    /// Integer numerators; the weights are these over the resolution.
    pub counts: Vec<usize>,
    pub weights: Vec<f64>,
    /// Position in an equilateral triangle with task 1 at (0,0), task 2 at
    /// (1,0) and task 3 at (1/2, sqrt(3)/2); only set for three tasks.
    pub xy: Option<(f64, f64)>,
    pub totals: BTreeMap<String, f64>,
    pub winner: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexWinnerMap {
    pub resolution: usize,
    pub key: SelectionKey,
    pub task_ids: Vec<u32>,
    pub criteria: Vec<String>,
    pub points: Vec<SimplexPoint>,
    /// Per criterion plus `tie`; sums to 1.
    pub win_fractions: BTreeMap<String, f64>,
}

impl SimplexWinnerMap {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let t = self.task_ids.len();
        let header: Vec<String> = (1..=t)
            .map(|j| format!("i{j}"))
            .chain((1..=t).map(|j| format!("w{j}")))
            .chain(["x".into(), "y".into(), "winner".into()])
            .chain(self.criteria.iter().map(|c| format!("total_{c}")))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for p in &self.points {
            let (x, y) = p.xy.map_or((String::new(), String::new()), |(x, y)| {
                (x.to_string(), y.to_string())
            });
            let fields: Vec<String> = p
                .counts
                .iter()
                .map(ToString::to_string)
                .chain(p.weights.iter().map(ToString::to_string))
                .chain([x, y, p.winner.clone()])
                .chain(self.criteria.iter().map(|c| p.totals[c].to_string()))
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// All ways to write `r` as an ordered sum of `parts` nonnegative integers,
/// in lexicographic order.
pub fn compositions(r: usize, parts: usize) -> Vec<Vec<usize>> {
    fn go(r: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(r);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for i in 0..=r {
            prefix.push(i);
            go(r - i, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        go(r, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

fn winner(totals: &BTreeMap<String, f64>, criteria: &[String]) -> String {
    let best = criteria
        .iter()
        .map(|c| totals[c])
        .fold(f64::INFINITY, f64::min);
    let tol = TIE_TOLERANCE * best.abs().max(1.0);
    let mut at_best = criteria.iter().filter(|c| totals[*c] - best <= tol);
    let first = at_best.next().expect("criteria is nonempty");
    if at_best.next().is_some() {
        TIE.to_string()
    } else {
        first.clone()
    }
}

/// Evaluates every grid point `(i_1/r, ..., i_T/r)` of the weight simplex
/// and records the criterion with the lowest total distortion.
pub fn sweep_simplex(
    records: &[AccuracyRecord],
    criteria: &[String],
    key: SelectionKey,
    resolution: usize,
) -> Result<SimplexWinnerMap> {
    if criteria.len() < 2 {
        return Err(Error::domain("the sweep needs at least two criteria"));
    }
    if criteria.iter().any(|c| c == TIE || c == FULL) {
        return Err(Error::domain(format!(
            "`{TIE}` and `{FULL}` are reserved labels"
        )));
    }
    if resolution == 0 {
        return Err(Error::domain("resolution must be at least 1"));
    }
    if records.is_empty() {
        return Err(Error::domain("no tasks to weigh"));
    }
    let table = distortion_table(records, criteria, key)?;
    let t = records.len();
    let points: Vec<SimplexPoint> = compositions(resolution, t)
        .into_par_iter()
        .map(|counts| {
            let weights: Vec<f64> = counts
                .iter()
                .map(|&c| c as f64 / resolution as f64)
                .collect();
            let totals: BTreeMap<String, f64> = table
                .iter()
                .map(|(c, d)| Ok((c.clone(), total_distortion(d, &weights)?)))
                .collect::<Result<_>>()?;
            let xy = (t == 3).then(|| {
                (
                    weights[1] + weights[2] / 2.0,
                    weights[2] * 3f64.sqrt() / 2.0,
                )
            });
            Ok(SimplexPoint {
                winner: winner(&totals, criteria),
                counts,
                weights,
                xy,
                totals,
            })
        })
        .collect::<Result<_>>()?;

    let mut wins: BTreeMap<String, usize> = criteria
        .iter()
        .cloned()
        .chain(std::iter::once(TIE.to_string()))
        .map(|c| (c, 0))
        .collect();
    for p in &points {
        *wins.get_mut(&p.winner).expect("winner is a known label") += 1;
    }
    let n = points.len() as f64;
    Ok(SimplexWinnerMap {
        resolution,
        key,
        task_ids: records.iter().map(|r| r.task_id).collect(),
        criteria: criteria.to_vec(),
        points,
        win_fractions: wins.into_iter().map(|(c, k)| (c, k as f64 / n)).collect(),
    })
}
