use mifs_core::multiobjective::{
    distortion_report, read_accuracy, sweep_simplex, AccuracyRecord, SelectionKey, FULL,
};
use mifs_core::{Error, Result};
use serde::Serialize;

use super::Context;
use crate::args::{AccuracyArgs, DistortionArgs, Format, SweepArgs};
use crate::output::{write_json, write_rows, write_text};

/// Every criterion label with a selected entry in some record.
pub fn criteria_in(records: &[AccuracyRecord]) -> Vec<String> {
    let mut out: Vec<String> = records
        .iter()
        .flat_map(|r| r.selected.keys().map(|(c, _)| c.clone()))
        .filter(|c| c != FULL)
        .collect();
    out.sort();
    out.dedup();
    out
}

fn load(a: &AccuracyArgs) -> Result<(Vec<AccuracyRecord>, Vec<String>, SelectionKey)> {
    let records = read_accuracy(&a.accuracy)?;
    if records.is_empty() {
        return Err(Error::Domain("the accuracy table has no tasks".into()));
    }
    let criteria = if a.criteria.is_empty() { criteria_in(&records) } else { a.criteria.clone() };
    let key = SelectionKey {
        keep_count: a.keep_count,
        qp: a.qp,
    };
    Ok((records, criteria, key))
}

pub fn distortion(a: &DistortionArgs, ctx: &Context) -> Result<()> {
    let (records, criteria, key) = load(&a.table)?;
    let weights = if a.weights.is_empty() {
        vec![1.0 / records.len() as f64; records.len()]
    } else {
        a.weights.clone()
    };
    let report = distortion_report(&records, &criteria, key, &weights)?;
    match ctx.format {
        Format::Csv => write_text(&ctx.out.join("distortion.csv"), &report.to_csv()),
        Format::Json => write_json(&ctx.out.join("distortion.json"), &report),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct WinRow {
    winner: String,
    fraction: f64,
}

pub fn sweep(a: &SweepArgs, ctx: &Context) -> Result<()> {
    let (records, criteria, key) = load(&a.table)?;
    let map = sweep_simplex(&records, &criteria, key, a.resolution)?;
    write_text(&ctx.out.join("winner_map.csv"), &map.to_csv())?;
    if ctx.format == Format::Json {
        write_json(&ctx.out.join("winner_map.json"), &map)?;
    }
    let rows: Vec<WinRow> = map
        .win_fractions
        .iter()
        .map(|(w, &f)| WinRow { winner: w.clone(), fraction: f })
        .collect();
    write_rows(&ctx.out, "win_fractions", &rows, ctx.format)?;
    Ok(())
}
