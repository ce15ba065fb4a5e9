use std::collections::BTreeMap;

use mifs_core::gaussian_lab::{run_validation_1d, run_validation_2d, MIEstimateRecord, ValidationConfig};
use mifs_core::Result;
use serde::Serialize;

use super::Context;
use crate::args::{GaussianMode, ValidateArgs};
use crate::output::write_rows;

/// One estimate as written to the validation reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationRow {
    pub rho: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub repeat: usize,
    pub estimate_nats: f64,
    pub true_1d_nats: f64,
    /// MI of the unpatched 2-D pair; empty in 1-D mode.
    pub true_2d_nats: Option<f64>,
    pub mode: &'static str,
    pub sample_count: usize,
}

pub fn rows(records: &[MIEstimateRecord]) -> Vec<ValidationRow> {
    records
        .iter()
        .map(|r| ValidationRow {
            rho: r.rho,
            k: r.k,
            repeat: r.repeat,
            estimate_nats: r.estimate_nats,
            true_1d_nats: r.true_mi_nats,
            true_2d_nats: r.true_full_nats,
            mode: r.mode.label(),
            sample_count: r.sample_count,
        })
        .collect()
}

/// Mean and spread of the repeats at one (mode, ρ, K).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationSummary {
    pub mode: String,
    pub rho: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub repeats: usize,
    pub mean_nats: f64,
    pub variance: f64,
    pub true_mi_nats: f64,
    pub at_or_below_truth: bool,
}

pub fn summarize(records: &[MIEstimateRecord]) -> Vec<ValidationSummary> {
    let mut groups: BTreeMap<(&str, u64, usize), Vec<&MIEstimateRecord>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in records {
        let key = (r.mode.label(), r.rho.to_bits(), r.k);
        if !groups.contains_key(&key) {
            order.push(key);
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let n = g.len() as f64;
            let mean = g.iter().map(|r| r.estimate_nats).sum::<f64>() / n;
            let variance = g.iter().map(|r| (r.estimate_nats - mean).powi(2)).sum::<f64>() / n;
            ValidationSummary {
                mode: key.0.to_string(),
                rho: g[0].rho,
                k: key.2,
                repeats: g.len(),
                mean_nats: mean,
                variance,
                true_mi_nats: g[0].true_mi_nats,
                at_or_below_truth: g.iter().all(|r| r.estimate_nats <= r.true_mi_nats),
            }
        })
        .collect()
}

fn config(base: ValidationConfig, a: &ValidateArgs, seed: u64) -> ValidationConfig {
    ValidationConfig {
        rhos: a.rhos.clone(),
        ks: a.ks.clone(),
        samples: a.samples.unwrap_or(base.samples),
        repeats: a.repeats.unwrap_or(base.repeats),
        x_bins: a.x_bins,
        seed,
        ..base
    }
}

pub fn validate(a: &ValidateArgs, ctx: &Context) -> Result<()> {
    let mut all = Vec::new();
    if matches!(a.mode, GaussianMode::OneD | GaussianMode::Both) {
        let records = run_validation_1d(&config(ValidationConfig::scalar_defaults(), a, ctx.seed))?;
        write_rows(&ctx.out, "validation_1d", &rows(&records), ctx.format)?;
        all.extend(records);
    }
    if matches!(a.mode, GaussianMode::TwoD | GaussianMode::Both) {
        let records = run_validation_2d(&config(ValidationConfig::patched_defaults(), a, ctx.seed))?;
        write_rows(&ctx.out, "validation_2d", &rows(&records), ctx.format)?;
        all.extend(records);
    }
    write_rows(&ctx.out, "validation_summary", &summarize(&all), ctx.format)?;
    Ok(())
}
