use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{Criterion, ImportanceTable};
use crate::error::{Error, Result};
use crate::mi_core::{
    bin_patches, kmeans, patchify_channel, patchify_output, plugin_mi, BinningConfig,
    ClusterModel, KMeansConfig, PatchSet, SymbolMode, ValueRange,
};
use crate::tensor_store::Dataset;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MiConfig {
    pub k: usize,
    pub bins: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
    pub symbols: SymbolMode,
}

impl Default for MiConfig {
    fn default() -> Self {
        Self {
            k: 8,
            bins: 8,
            seed: 0,
            max_iters: 300,
            tol: 1e-6,
            symbols: SymbolMode::Auto,
        }
    }
}

/// Clusters the pooled M×M output patches of one task.
pub fn cluster_task(ds: &Dataset, task_id: u32, cfg: &MiConfig) -> Result<ClusterModel> {
    let outputs = ds.task_outputs(task_id)?;
    let m = ds.patch().m;
    let mut pooled: Option<PatchSet> = None;
    for (s, o) in outputs.iter().enumerate() {
        let p = patchify_output(o, m, s as u32)?;
        match pooled.as_mut() {
            Some(all) => all.extend(p)?,
            None => pooled = Some(p),
        }
    }
    let pooled = pooled.ok_or_else(|| Error::domain("dataset has no samples"))?;
    kmeans(
        &pooled,
        &KMeansConfig {
            k: cfg.k,
            seed: cfg.seed,
            max_iters: cfg.max_iters,
            tol: cfg.tol,
        },
    )
}

/// Pooled N×N patches of one channel across all samples.
fn channel_patches(ds: &Dataset, channel: usize) -> Result<PatchSet> {
    let n = ds.patch().n;
    let mut pooled: Option<PatchSet> = None;
    for (s, f) in ds.features.iter().enumerate() {
        let p = patchify_channel(f, channel, n, s as u32)?;
        match pooled.as_mut() {
            Some(all) => all.extend(p)?,
            None => pooled = Some(p),
        }
    }
    pooled.ok_or_else(|| Error::domain("dataset has no samples"))
}

/// `I(binned feature patches of channel i; clustered output patches of task j)`
/// for every channel, with one clustering shared by all channels.
pub fn mi_importance(ds: &Dataset, task_id: u32, cfg: &MiConfig) -> Result<ImportanceTable> {
    let model = cluster_task(ds, task_id, cfg)?;
    let binning = BinningConfig {
        bins: cfg.bins,
        mode: cfg.symbols,
    };
    let channels = ds.channels();
    let ids = ds.features[0].channel_ids().to_vec();
    let scores: Vec<Result<f64>> = (0..channels)
        .into_par_iter()
        .map(|c| {
            let patches = channel_patches(ds, c)?;
            if patches.len() != model.labels.len() {
                return Err(Error::domain(format!(
                    "channel {c} has {} patches but the output has {}",
                    patches.len(),
                    model.labels.len()
                )));
            }
            let range = ValueRange::of(patches.data().iter().copied())
                .ok_or_else(|| Error::domain("empty channel"))?;
            let symbols = bin_patches(&patches, &binning, range)?;
            plugin_mi(&symbols.symbols, &model.labels)
        })
        .collect();
    let mut table = BTreeMap::new();
    for (id, s) in ids.into_iter().zip(scores) {
        table.insert(id, s?);
    }
    Ok(ImportanceTable::from_scores(Criterion::Mi, Some(task_id), table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth_bench::{dataset, SynthSpec, TaskSpec};
    use crate::tensor_store::{FeatureTensor, PatchConfig};

    fn spec(relevant: Vec<usize>) -> SynthSpec {
        let weights = vec![1.0; relevant.len()];
        SynthSpec {
            channels: 6,
            height: 8,
            width: 8,
            tasks: vec![TaskSpec { relevant, weights }],
            scales: vec![1.0; 6],
            samples: 40,
            patch: PatchConfig { n: 2, m: 2 },
            seed: 11,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn copied_channel_ranks_first() {
        let ds = dataset(&spec(vec![0])).unwrap();
        let t = mi_importance(&ds, 0, &MiConfig::default()).unwrap();
        assert_eq!(t.ordering[0], 0);
        assert!(t.scores[&0] > 2.0 * t.scores[&1], "{:?}", t.scores);
    }

    #[test]
    fn identical_channels_tie_in_id_order() {
        let ds = dataset(&spec(vec![0])).unwrap();
        let mut ds2 = ds.clone();
        ds2.features = ds
            .features
            .iter()
            .map(|f| {
                let plane = f.channel(0).to_vec();
                let values = (0..4).flat_map(|_| plane.iter().copied()).collect();
                FeatureTensor::with_ids(4, 8, 8, values, vec![9, 3, 7, 5]).unwrap()
            })
            .collect();
        let t = mi_importance(&ds2, 0, &MiConfig::default()).unwrap();
        let first = t.scores[&9];
        assert!(t.scores.values().all(|&s| s == first));
        assert_eq!(t.ordering, vec![3, 5, 7, 9]);
    }

    #[test]
    fn exact_rescaling_leaves_scores_unchanged() {
        let ds = dataset(&spec(vec![1, 4])).unwrap();
        let cfg = MiConfig::default();
        let before = mi_importance(&ds, 0, &cfg).unwrap();
        let mut scaled = ds.clone();
        for f in &mut scaled.features {
            f.scale_channel(2, 4.0);
            f.scale_channel(4, 0.25);
        }
        let after = mi_importance(&scaled, 0, &cfg).unwrap();
        assert_eq!(before.scores, after.scores);
    }

    #[test]
    fn independent_of_thread_count() {
        let ds = dataset(&spec(vec![2, 3])).unwrap();
        let cfg = MiConfig::default();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mi_importance(&ds, 0, &cfg).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(4));
        let mut top = one.top(2).to_vec();
        top.sort_unstable();
        assert_eq!(top, vec![2, 3]);
    }

    #[test]
    fn unknown_task_rejected() {
        let ds = dataset(&spec(vec![0])).unwrap();
        assert!(mi_importance(&ds, 5, &MiConfig::default()).is_err());
    }
}
