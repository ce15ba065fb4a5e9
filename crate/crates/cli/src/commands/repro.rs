//! The `repro` suite: Gaussian validation plus the synthetic benchmark,
//! with every stage also exposed for the acceptance tests.

use std::collections::BTreeMap;

use mifs_core::gaussian_lab::{run_validation_1d, run_validation_2d, ValidationConfig};
use mifs_core::importance::{gm_importance, mi_importance, norm_importance, GmConfig, ImportanceTable, MiConfig};
use mifs_core::multiobjective::{
    accuracy_csv, distortion_report, records_from_rows, sweep_simplex, AccuracyRow, Direction, Metric,
    SelectionKey, FULL,
};
use mifs_core::selection_codec::{hard_select, keep_count, soft_select, Keep, SelectionPlan};
use mifs_core::synth_bench::{clean_outputs, dataset, proxy_accuracy_against, SynthSpec};
use mifs_core::{Dataset, FeatureTensor, Result};
use rayon::prelude::*;
use serde::Serialize;

use super::gaussian::{rows, summarize};
use super::rank::table_stem;
use super::Context;
use crate::args::{Format, ReproArgs, DEFAULT_KEEP_FRACTIONS, DEFAULT_QPS, MI_SEED, SYNTH_SEED};
use crate::output::{write_json, write_rows, write_text};

pub const CRITERIA: [&str; 4] = ["mi", "l1", "l2", "gm"];
/// Base fraction for the soft-selection runs.
pub const SOFT_BASE_FRACTION: f64 = 0.5;

/// Importance tables for one dataset: MI per task, the rest shared.
#[derive(Clone, Debug)]
pub struct Rankings {
    pub mi: BTreeMap<u32, ImportanceTable>,
    pub l1: ImportanceTable,
    pub l2: ImportanceTable,
    pub gm: ImportanceTable,
}

impl Rankings {
    pub fn compute(ds: &Dataset, mi: &MiConfig) -> Result<Self> {
        let tables = ds
            .manifest
            .tasks
            .iter()
            .map(|&t| Ok((t, mi_importance(ds, t, mi)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            mi: tables,
            l1: norm_importance(&ds.features, 1)?,
            l2: norm_importance(&ds.features, 2)?,
            gm: gm_importance(&ds.features, &GmConfig::default())?,
        })
    }

    /// The ordering criterion `c` uses for task `t`.
    pub fn ordering(&self, c: &str, t: u32) -> &[u32] {
        match c {
            "mi" => &self.mi[&t].ordering,
            "l1" => &self.l1.ordering,
            "l2" => &self.l2.ordering,
            "gm" => &self.gm.ordering,
            _ => unreachable!("unknown criterion {c}"),
        }
    }

    pub fn tables(&self) -> Vec<&ImportanceTable> {
        self.mi.values().chain([&self.l1, &self.l2, &self.gm]).collect()
    }
}

/// Fraction of `relevant` found in the top `relevant.len()` of `ordering`.
pub fn precision(ordering: &[u32], relevant: &[usize]) -> f64 {
    let top = &ordering[..relevant.len()];
    let hits = relevant.iter().filter(|&&c| top.contains(&(c as u32))).count();
    hits as f64 / relevant.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecoveryRow {
    pub criterion: String,
    pub task_id: u32,
    pub precision: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub criterion: String,
    pub task_id: u32,
    pub keep_count: usize,
    pub qp: u8,
    pub mean_total_bytes: f64,
    pub mse: f64,
    /// Proxy accuracy from the 8-bit base channels alone.
    pub base_only_accuracy: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct Benchmark {
    pub rankings: Rankings,
    pub accuracy: Vec<AccuracyRow>,
    pub recovery: Vec<RecoveryRow>,
    pub rate: Vec<RateRow>,
}

fn mse(a: &[FeatureTensor], b: &[FeatureTensor]) -> f64 {
    let (mut sq, mut n) = (0.0, 0usize);
    for (x, y) in a.iter().zip(b) {
        for (&u, &v) in x.values().iter().zip(y.values()) {
            sq += (u as f64 - v as f64).powi(2);
            n += 1;
        }
    }
    sq / n as f64
}

fn row(task_id: u32, criterion: &str, key: Option<SelectionKey>, accuracy: f64) -> AccuracyRow {
    AccuracyRow {
        task_id,
        metric: Metric::Proxy,
        direction: Direction::HigherBetter,
        criterion: criterion.into(),
        keep_count: key.map(|k| k.keep_count),
        qp: key.and_then(|k| k.qp),
        accuracy,
    }
}

/// Ranks, selects and scores the synthetic dataset for every criterion.
pub fn run_benchmark(spec: &SynthSpec, mi: &MiConfig, qps: &[u8]) -> Result<Benchmark> {
    let ds = dataset(spec)?;
    let rankings = Rankings::compute(&ds, mi)?;
    let c = ds.channels();
    let soft_keep = keep_count(SOFT_BASE_FRACTION, c)?;
    let mut accuracy = Vec::new();
    let mut recovery = Vec::new();
    let mut rate = Vec::new();
    for (j, task) in spec.tasks.iter().enumerate() {
        let t = j as u32;
        let clean = clean_outputs(spec, j)?;
        let score = |recon: &[FeatureTensor]| proxy_accuracy_against(recon, spec, j, &clean);
        accuracy.push(row(t, FULL, None, score(&ds.features)?));
        for crit in CRITERIA {
            let ordering = rankings.ordering(crit, t).to_vec();
            recovery.push(RecoveryRow {
                criterion: crit.into(),
                task_id: t,
                precision: precision(&ordering, &task.relevant),
            });
            for f in DEFAULT_KEEP_FRACTIONS {
                let kept = keep_count(f, c)?;
                let plan = SelectionPlan::hard(ordering.clone(), Keep::Count(kept));
                let recon = ds
                    .features
                    .par_iter()
                    .map(|x| Ok(hard_select(x, &plan)?.reconstruction))
                    .collect::<Result<Vec<_>>>()?;
                accuracy.push(row(t, crit, Some(SelectionKey::hard(kept)), score(&recon)?));
            }
            for &qp in qps {
                let plan = SelectionPlan::soft(ordering.clone(), Keep::Count(soft_keep), qp);
                let out = ds
                    .features
                    .par_iter()
                    .map(|x| {
                        let p = soft_select(x, &plan)?;
                        Ok((p.sizes().total_bytes, p.reconstruct()?, p.reconstruct_base_only()?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let bytes = out.iter().map(|o| o.0 as f64).sum::<f64>() / out.len() as f64;
                let (full, base): (Vec<_>, Vec<_>) = out.into_iter().map(|o| (o.1, o.2)).unzip();
                let acc = score(&full)?;
                accuracy.push(row(t, crit, Some(SelectionKey::soft(soft_keep, qp)), acc));
                rate.push(RateRow {
                    criterion: crit.into(),
                    task_id: t,
                    keep_count: soft_keep,
                    qp,
                    mean_total_bytes: bytes,
                    mse: mse(&ds.features, &full),
                    base_only_accuracy: score(&base)?,
                    accuracy: acc,
                });
            }
        }
    }
    Ok(Benchmark {
        rankings,
        accuracy,
        recovery,
        rate,
    })
}

#[derive(Clone, Debug, Serialize)]
struct Summary {
    gaussian: Option<GaussianSummary>,
    synth_seed: u64,
    mi_seed: u64,
    recovery: BTreeMap<String, f64>,
    hard_win_fractions: BTreeMap<String, f64>,
    soft_win_fractions: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize)]
struct GaussianSummary {
    estimates: usize,
    /// Largest estimate minus truth; the estimator should stay at or below 0.
    max_excess_nats: f64,
}

fn quick_config(base: ValidationConfig, samples: usize, seed: u64) -> ValidationConfig {
    ValidationConfig {
        samples,
        repeats: base.repeats.min(2),
        seed,
        ..base
    }
}

pub fn repro(a: &ReproArgs, ctx: &Context) -> Result<()> {
    let gaussian = if a.skip_gaussian {
        None
    } else {
        let (c1, c2) = if a.quick {
            (
                quick_config(ValidationConfig::scalar_defaults(), 40_000, ctx.seed),
                quick_config(ValidationConfig::patched_defaults(), 40_000, ctx.seed),
            )
        } else {
            (
                ValidationConfig { seed: ctx.seed, ..ValidationConfig::scalar_defaults() },
                ValidationConfig { seed: ctx.seed, ..ValidationConfig::patched_defaults() },
            )
        };
        let dir = ctx.out.join("gaussian");
        let mut all = run_validation_1d(&c1)?;
        write_rows(&dir, "validation_1d", &rows(&all), ctx.format)?;
        let two = run_validation_2d(&c2)?;
        write_rows(&dir, "validation_2d", &rows(&two), ctx.format)?;
        all.extend(two);
        write_rows(&dir, "validation_summary", &summarize(&all), ctx.format)?;
        Some(GaussianSummary {
            estimates: all.len(),
            max_excess_nats: all
                .iter()
                .map(|r| r.estimate_nats - r.true_mi_nats)
                .fold(f64::NEG_INFINITY, f64::max),
        })
    };

    let spec = SynthSpec {
        seed: SYNTH_SEED,
        ..SynthSpec::default()
    };
    let mi = MiConfig {
        seed: MI_SEED,
        ..MiConfig::default()
    };
    let bench = run_benchmark(&spec, &mi, &DEFAULT_QPS)?;
    let synth_dir = ctx.out.join("synth");
    write_text(&synth_dir.join("synth_spec.json"), &spec.to_json())?;
    for t in bench.rankings.tables() {
        write_text(&synth_dir.join(format!("importance/{}.json", table_stem(t))), &t.to_json())?;
    }
    write_rows(&synth_dir, "recovery", &bench.recovery, ctx.format)?;
    write_rows(&synth_dir, "rate_distortion", &bench.rate, ctx.format)?;
    let records = records_from_rows(&bench.accuracy)?;
    write_text(&synth_dir.join("accuracy.csv"), &accuracy_csv(&records)?)?;

    let criteria: Vec<String> = CRITERIA.iter().map(|c| c.to_string()).collect();
    let soft_keep = keep_count(SOFT_BASE_FRACTION, spec.channels)?;
    let equal = vec![1.0 / records.len() as f64; records.len()];
    let mut wins = Vec::new();
    for key in [SelectionKey::hard(soft_keep), SelectionKey::soft(soft_keep, DEFAULT_QPS[0])] {
        let label = match key.qp {
            Some(qp) => format!("soft_c{}_qp{qp}", key.keep_count),
            None => format!("hard_c{}", key.keep_count),
        };
        let report = distortion_report(&records, &criteria, key, &equal)?;
        match ctx.format {
            Format::Csv => write_text(&synth_dir.join(format!("distortion_{label}.csv")), &report.to_csv())?,
            Format::Json => write_json(&synth_dir.join(format!("distortion_{label}.json")), &report)?,
        }
        let map = sweep_simplex(&records, &criteria, key, 100)?;
        write_text(&synth_dir.join(format!("winner_map_{label}.csv")), &map.to_csv())?;
        wins.push(map.win_fractions);
    }

    let recovery = bench
        .recovery
        .iter()
        .map(|r| (format!("{}_t{}", r.criterion, r.task_id), r.precision))
        .collect();
    let soft_wins = wins.pop().expect("two sweeps");
    let hard_wins = wins.pop().expect("two sweeps");
    write_json(
        &ctx.out.join("summary.json"),
        &Summary {
            gaussian,
            synth_seed: spec.seed,
            mi_seed: mi.seed,
            recovery,
            hard_win_fractions: hard_wins,
            soft_win_fractions: soft_wins,
        },
    )
}
