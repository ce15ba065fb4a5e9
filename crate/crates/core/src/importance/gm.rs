//! Geometric-median redundancy scores.
//!
//! Each channel is represented by its dataset-mean map. The geometric
//! median of the representatives is found with Weiszfeld's iteration,
//! started from the coordinate-wise mean. When an iterate lands on a
//! representative (distance at most `1e-12` times the spread), the
//! Vardi–Zhang test decides: if the unit pull of the other points has norm
//! at most the multiplicity of the coincident point, that point is the
//! median; otherwise the iterate is shifted by `1e-8 × spread` along the
//! pull and iteration continues. A channel's score is its distance to the
//! median, so channels near the median rank as least important.

use std::collections::BTreeMap;

use super::{Criterion, ImportanceTable};
use crate::error::{Error, Result};
use crate::tensor_store::FeatureTensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmConfig {
    /// Stop once an update moves less than `tol` times the spread.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for GmConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iters: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MedianResult {
    pub median: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Weiszfeld iteration over `points` (rows of `dim` values).
pub fn geometric_median(points: &[f64], dim: usize, cfg: &GmConfig) -> Result<MedianResult> {
    if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
        return Err(Error::domain("geometric median needs at least one point"));
    }
    let n = points.len() / dim;
    let rows: Vec<&[f64]> = points.chunks_exact(dim).collect();
    let mut y = vec![0.0; dim];
    for r in &rows {
        for (a, v) in y.iter_mut().zip(*r) {
            *a += v;
        }
    }
    y.iter_mut().for_each(|a| *a /= n as f64);
    let spread = rows.iter().map(|r| dist(r, &y)).sum::<f64>() / n as f64;
    if spread == 0.0 {
        return Ok(MedianResult {
            median: y,
            iterations: 0,
            converged: true,
        });
    }
    let coincide = 1e-12 * spread;

    for it in 0..cfg.max_iters {
        let mut num = vec![0.0; dim];
        let mut pull = vec![0.0; dim];
        let mut denom = 0.0;
        let mut multiplicity = 0usize;
        for r in &rows {
            let d = dist(r, &y);
            if d <= coincide {
                multiplicity += 1;
                continue;
            }
            let w = 1.0 / d;
            denom += w;
            for k in 0..dim {
                num[k] += w * r[k];
                pull[k] += w * (r[k] - y[k]);
            }
        }
        if multiplicity == n {
            return Ok(MedianResult { median: y, iterations: it, converged: true });
        }
        let next: Vec<f64> = if multiplicity > 0 {
            let pull_norm = pull.iter().map(|v| v * v).sum::<f64>().sqrt();
            if pull_norm <= multiplicity as f64 {
                return Ok(MedianResult { median: y, iterations: it, converged: true });
            }
            y.iter()
                .zip(&pull)
                .map(|(a, p)| a + 1e-8 * spread * p / pull_norm)
                .collect()
        } else {
            num.iter().map(|v| v / denom).collect()
        };
        let step = dist(&next, &y);
        y = next;
        if multiplicity == 0 && step <= cfg.tol * spread {
            return Ok(MedianResult { median: y, iterations: it + 1, converged: true });
        }
    }
    Ok(MedianResult {
        median: y,
        iterations: cfg.max_iters,
        converged: false,
    })
}

/// Scores channels by the distance of their mean map to the geometric median.
pub fn gm_importance(features: &[FeatureTensor], cfg: &GmConfig) -> Result<ImportanceTable> {
    let first = features
        .first()
        .ok_or_else(|| Error::domain("no feature tensors"))?;
    let c = first.channels();
    if c < 2 {
        return Err(Error::domain("geometric median needs at least two channels"));
    }
    let dim = first.plane_len();
    let mut reps = vec![0.0f64; c * dim];
    for t in features {
        if t.channels() != c || t.plane_len() != dim {
            return Err(Error::domain("feature tensors disagree on shape"));
        }
        for (r, &v) in reps.iter_mut().zip(t.values()) {
            *r += v as f64;
        }
    }
    let n = features.len() as f64;
    reps.iter_mut().for_each(|r| *r /= n);
    score_representatives(&reps, dim, first.channel_ids(), cfg)
}

fn score_representatives(reps: &[f64], dim: usize, ids: &[u32], cfg: &GmConfig) -> Result<ImportanceTable> {
    let median = geometric_median(reps, dim, cfg)?.median;
    let scores: BTreeMap<u32, f64> = ids
        .iter()
        .zip(reps.chunks_exact(dim))
        .map(|(&id, r)| (id, dist(r, &median)))
        .collect();
    Ok(ImportanceTable::from_scores(Criterion::Gm, None, scores))
}
