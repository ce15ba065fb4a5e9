use std::collections::BTreeMap;

use super::{Criterion, ImportanceTable};
use crate::error::{Error, Result};
use crate::tensor_store::FeatureTensor;

/// Mean over samples of each channel's ℓp norm, `p ∈ {1, 2}`.
pub fn norm_importance(features: &[FeatureTensor], p: u8) -> Result<ImportanceTable> {
    let criterion = match p {
        1 => Criterion::L1,
        2 => Criterion::L2,
        _ => return Err(Error::domain(format!("p = {p}; only 1 and 2 are supported"))),
    };
    let first = features
        .first()
        .ok_or_else(|| Error::domain("no feature tensors"))?;
    let mut sums = vec![0.0f64; first.channels()];
    for t in features {
        if t.channels() != first.channels() {
            return Err(Error::domain("feature tensors disagree on channel count"));
        }
        for (c, sum) in sums.iter_mut().enumerate() {
            let plane = t.channel(c);
            *sum += match p {
                1 => plane.iter().map(|&v| (v as f64).abs()).sum::<f64>(),
                _ => plane.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt(),
            };
        }
    }
    let n = features.len() as f64;
    let scores: BTreeMap<u32, f64> = first
        .channel_ids()
        .iter()
        .zip(sums)
        .map(|(&id, s)| (id, s / n))
        .collect();
    Ok(ImportanceTable::from_scores(criterion, None, scores))
}
