use mifs_core::importance::{gm_importance, mi_importance, norm_importance, Criterion, GmConfig, ImportanceTable};
use mifs_core::{Error, Result};
use serde::Serialize;

use super::{mi_config, open_dataset, Context};
use crate::args::{EstimateArgs, Format, RankArgs};
use crate::output::{write_rows, write_text};

#[derive(Clone, Debug, PartialEq, Serialize)]
struct MiRow {
    channel_id: u32,
    task_id: u32,
    mi_nats: f64,
    rank: usize,
}

pub fn estimate(a: &EstimateArgs, ctx: &Context) -> Result<()> {
    let ds = open_dataset(&a.manifest, &a.mi)?;
    let tasks = if a.tasks.is_empty() { ds.manifest.tasks.clone() } else { a.tasks.clone() };
    let cfg = mi_config(&a.mi, ctx.seed);
    let mut rows = Vec::new();
    for t in tasks {
        let table = mi_importance(&ds, t, &cfg)?;
        let ranks = table.ranks();
        rows.extend(table.scores.iter().map(|(&c, &s)| MiRow {
            task_id: t,
            channel_id: c,
            rank: ranks[&c],
            mi_nats: s,
        }));
    }
    write_rows(&ctx.out, "mi_estimates", &rows, ctx.format)?;
    Ok(())
}

/// File stem for a table, e.g. `importance_mi_t2` or `importance_l1`.
pub fn table_stem(table: &ImportanceTable) -> String {
    match table.task_id {
        Some(t) => format!("importance_{}_t{t}", table.criterion),
        None => format!("importance_{}", table.criterion),
    }
}

/// Always writes the JSON table that selection reads; adds a CSV view on request.
pub fn write_table(table: &ImportanceTable, ctx: &Context) -> Result<()> {
    let stem = table_stem(table);
    table.write(&ctx.out.join(format!("{stem}.json")))?;
    if ctx.format == Format::Csv {
        write_text(&ctx.out.join(format!("{stem}.csv")), &table.to_csv())?;
    }
    Ok(())
}

pub fn rank(a: &RankArgs, ctx: &Context) -> Result<()> {
    let ds = open_dataset(&a.manifest, &a.mi)?;
    let tables = match a.criterion {
        Criterion::Mi => {
            let tasks = match a.task {
                Some(t) => vec![t],
                None => ds.manifest.tasks.clone(),
            };
            if tasks.is_empty() {
                return Err(Error::Manifest("the manifest lists no tasks".into()));
            }
            let cfg = mi_config(&a.mi, ctx.seed);
            tasks
                .into_iter()
                .map(|t| mi_importance(&ds, t, &cfg))
                .collect::<Result<Vec<_>>>()?
        }
        Criterion::L1 => vec![norm_importance(&ds.features, 1)?],
        Criterion::L2 => vec![norm_importance(&ds.features, 2)?],
        Criterion::Gm => vec![gm_importance(
            &ds.features,
            &GmConfig { tol: a.gm_tol, max_iters: a.gm_max_iters },
        )?],
    };
    for t in &tables {
        write_table(t, ctx)?;
    }
    Ok(())
}
