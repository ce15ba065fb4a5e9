//! Lloyd's K-means with k-means++ seeding.
//!
//! Rules that make runs reproducible:
//! - assignment ties go to the lowest centroid index;
//! - sums are accumulated in patch order, or in fixed-size chunks combined in
//!   chunk order, so the thread count never changes a result;
//! - an empty cluster is re-seeded at the patch farthest from its own
//!   centroid (lowest patch index on ties), one empty cluster at a time.
//!
//! Iteration stops when assignments stop changing, when the largest centroid
//! move is at most `tol` times the RMS spread of the data, or after
//! `max_iters` updates.

use rayon::prelude::*;

use super::patch::PatchSet;
use crate::error::{Error, Result};
use crate::rng::Stream;

const CHUNK: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iters: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub dim: usize,
    pub centroids: Vec<f64>,
    pub labels: Vec<u32>,
    pub inertia: f64,
    /// Inertia after every assignment step, in order.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
    pub seed: u64,
}

impl ClusterModel {
    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }

    /// Labels new patches against the fitted centroids.
    pub fn predict(&self, patches: &PatchSet) -> Result<Vec<u32>> {
        if patches.dim() != self.dim {
            return Err(Error::domain(format!(
                "patch dimension {} does not match model dimension {}",
                patches.dim(),
                self.dim
            )));
        }
        let mut labels = vec![0u32; patches.len()];
        assign(patches.data(), self.dim, &self.centroids, &mut labels, false);
        Ok(labels)
    }
}

pub fn kmeans(patches: &PatchSet, cfg: &KMeansConfig) -> Result<ClusterModel> {
    fit(patches.data(), patches.dim(), cfg, false)
}

pub(crate) fn fit(data: &[f64], dim: usize, cfg: &KMeansConfig, force_generic: bool) -> Result<ClusterModel> {
    let n = data.len().checked_div(dim).unwrap_or(0);
    if cfg.k == 0 {
        return Err(Error::domain("K must be at least 1"));
    }
    if cfg.k > n {
        return Err(Error::domain(format!(
            "K = {} exceeds the number of patches ({n})",
            cfg.k
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite patch value"));
    }

    let mut stream = Stream::derived(cfg.seed, &[0x6b6d]);
    let centroids = plus_plus_init(data, dim, cfg.k, &mut stream);
    let threshold = cfg.tol * rms_spread(data, dim);
    if dim == 1 && !force_generic {
        return Ok(fit_sorted_1d(data, cfg, centroids, threshold));
    }
    let mut centroids = centroids;

    let mut labels = vec![u32::MAX; n];
    let mut next = vec![0u32; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let inertia = assign(data, dim, &centroids, &mut next, force_generic);
        trace.push(inertia);
        let changed = next != labels;
        std::mem::swap(&mut labels, &mut next);
        if !changed || iterations >= cfg.max_iters {
            break;
        }
        let shift = update(data, dim, cfg.k, &labels, &mut centroids);
        iterations += 1;
        if shift <= threshold {
            let inertia = assign(data, dim, &centroids, &mut labels, force_generic);
            trace.push(inertia);
            break;
        }
    }
    let inertia = *trace.last().expect("at least one assignment");
    Ok(ClusterModel {
        k: cfg.k,
        dim,
        centroids,
        labels,
        inertia,
        inertia_trace: trace,
        iterations,
        seed: cfg.seed,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn rms_spread(data: &[f64], dim: usize) -> f64 {
    let n = (data.len() / dim) as f64;
    let mut mean = vec![0.0; dim];
    for p in data.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let ss: f64 = data
        .chunks_exact(dim)
        .map(|p| sq_dist(p, &mean))
        .sum();
    (ss / n).sqrt()
}

fn plus_plus_init(data: &[f64], dim: usize, k: usize, stream: &mut Stream) -> Vec<f64> {
    let n = data.len() / dim;
    let mut chosen = Vec::with_capacity(k);
    let first = stream.below(n);
    chosen.push(first);
    let mut d2: Vec<f64> = data
        .chunks_exact(dim)
        .map(|p| sq_dist(p, &data[first * dim..(first + 1) * dim]))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = stream.uniform() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` past the final partial sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            // Every point coincides with a centre; take the first unused index.
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(pick);
        let c = &data[pick * dim..(pick + 1) * dim];
        for (w, p) in d2.iter_mut().zip(data.chunks_exact(dim)) {
            let d = sq_dist(p, c);
            if d < *w {
                *w = d;
            }
        }
    }
    chosen
        .iter()
        .flat_map(|&i| data[i * dim..(i + 1) * dim].iter().copied())
        .collect()
}

/// Sorted view of 1-D centroids: distinct values with the lowest owning index.
struct Sorted1d {
    values: Vec<f64>,
    owner: Vec<u32>,
}

impl Sorted1d {
    fn new(centroids: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..centroids.len()).collect();
        order.sort_by(|&a, &b| centroids[a].total_cmp(&centroids[b]).then(a.cmp(&b)));
        let mut values: Vec<f64> = Vec::with_capacity(order.len());
        let mut owner: Vec<u32> = Vec::with_capacity(order.len());
        for i in order {
            match values.last() {
                Some(&v) if v == centroids[i] => {}
                _ => {
                    values.push(centroids[i]);
                    owner.push(i as u32);
                }
            }
        }
        Self { values, owner }
    }

    /// Position in `values` of the nearest centroid and its squared distance.
    fn nearest_at(&self, x: f64) -> (usize, f64) {
        let p = self.values.partition_point(|&c| c < x);
        let mut best: Option<(usize, f64)> = None;
        for q in [p.wrapping_sub(1), p] {
            if let Some(&c) = self.values.get(q) {
                let d = (x - c) * (x - c);
                best = match best {
                    None => Some((q, d)),
                    Some(b) if d < b.1 || (d == b.1 && self.owner[q] < self.owner[b.0]) => {
                        Some((q, d))
                    }
                    keep => keep,
                };
            }
        }
        best.expect("at least one centroid")
    }

    fn nearest_pos(&self, x: f64) -> usize {
        self.nearest_at(x).0
    }

    fn nearest(&self, x: f64) -> (u32, f64) {
        let (q, d) = self.nearest_at(x);
        (self.owner[q], d)
    }
}

/// Lloyd iterations on scalar data kept in sorted order.
///
/// Nearest-centroid cells are intervals, so each cluster is a contiguous run
/// of the sorted data found by binary search with the same tie rule as the
/// general path; means come from prefix sums.
fn fit_sorted_1d(data: &[f64], cfg: &KMeansConfig, mut centroids: Vec<f64>, threshold: f64) -> ClusterModel {
    let n = data.len();
    let k = cfg.k;
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by(|&a, &b| data[a as usize].total_cmp(&data[b as usize]).then(a.cmp(&b)));
    let xs: Vec<f64> = order.iter().map(|&i| data[i as usize]).collect();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &x in &xs {
        acc += x;
        prefix.push(acc);
    }

    // Runs of the sorted data: (owner centroid, end index exclusive).
    let cells = |centroids: &[f64]| -> Vec<(u32, usize)> {
        let sorted = Sorted1d::new(centroids);
        let mut runs = Vec::with_capacity(sorted.values.len());
        let mut start = 0;
        for q in 0..sorted.values.len() {
            let end = if q + 1 == sorted.values.len() {
                n
            } else {
                start + xs[start..].partition_point(|&x| sorted.nearest_pos(x) <= q)
            };
            if end > start {
                runs.push((sorted.owner[q], end));
            }
            start = end;
        }
        runs
    };
    let inertia_of = |runs: &[(u32, usize)], centroids: &[f64]| -> f64 {
        let mut start = 0;
        let mut total = 0.0;
        for &(o, end) in runs {
            let c = centroids[o as usize];
            total += xs[start..end].iter().map(|x| (x - c) * (x - c)).sum::<f64>();
            start = end;
        }
        total
    };
    let labels_of = |runs: &[(u32, usize)]| -> Vec<u32> {
        let mut labels = vec![0u32; n];
        let mut start = 0;
        for &(o, end) in runs {
            for &i in &order[start..end] {
                labels[i as usize] = o;
            }
            start = end;
        }
        labels
    };

    let mut runs: Vec<(u32, usize)> = Vec::new();
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let next = cells(&centroids);
        trace.push(inertia_of(&next, &centroids));
        let changed = next != runs;
        runs = next;
        if !changed || iterations >= cfg.max_iters {
            break;
        }
        let mut new = centroids.clone();
        let mut filled = vec![false; k];
        let mut start = 0;
        for &(o, end) in &runs {
            new[o as usize] = (prefix[end] - prefix[start]) / (end - start) as f64;
            filled[o as usize] = true;
            start = end;
        }
        if filled.iter().any(|f| !f) {
            let labels = labels_of(&runs);
            for j in 0..k {
                if !filled[j] {
                    let far = farthest(data, 1, &labels, &new);
                    new[j] = data[far];
                }
            }
        }
        let shift = centroids
            .iter()
            .zip(&new)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        centroids = new;
        iterations += 1;
        if shift <= threshold {
            runs = cells(&centroids);
            trace.push(inertia_of(&runs, &centroids));
            break;
        }
    }
    ClusterModel {
        k,
        dim: 1,
        labels: labels_of(&runs),
        inertia: *trace.last().expect("at least one assignment"),
        inertia_trace: trace,
        centroids,
        iterations,
        seed: cfg.seed,
    }
}

fn farthest(data: &[f64], dim: usize, labels: &[u32], centroids: &[f64]) -> usize {
    let mut far = 0usize;
    let mut far_d = -1.0;
    for (i, (p, &l)) in data.chunks_exact(dim).zip(labels).enumerate() {
        let l = l as usize;
        let d = sq_dist(p, &centroids[l * dim..(l + 1) * dim]);
        if d > far_d {
            far_d = d;
            far = i;
        }
    }
    far
}

/// Nearest-centroid assignment; returns the inertia.
fn assign(data: &[f64], dim: usize, centroids: &[f64], labels: &mut [u32], force_generic: bool) -> f64 {
    let partial: Vec<f64> = if dim == 1 && !force_generic {
        let sorted = Sorted1d::new(centroids);
        data.par_chunks(CHUNK)
            .zip(labels.par_chunks_mut(CHUNK))
            .map(|(xs, ls)| {
                let mut s = 0.0;
                for (x, l) in xs.iter().zip(ls.iter_mut()) {
                    let (j, d) = sorted.nearest(*x);
                    *l = j;
                    s += d;
                }
                s
            })
            .collect()
    } else {
        data.par_chunks(CHUNK * dim)
            .zip(labels.par_chunks_mut(CHUNK))
            .map(|(ps, ls)| {
                let mut s = 0.0;
                for (p, l) in ps.chunks_exact(dim).zip(ls.iter_mut()) {
                    let mut best = 0u32;
                    let mut best_d = f64::INFINITY;
                    for (j, c) in centroids.chunks_exact(dim).enumerate() {
                        let d = sq_dist(p, c);
                        if d < best_d {
                            best_d = d;
                            best = j as u32;
                        }
                    }
                    *l = best;
                    s += best_d;
                }
                s
            })
            .collect()
    };
    partial.iter().sum()
}

/// Moves centroids to cluster means; returns the largest centroid move.
fn update(data: &[f64], dim: usize, k: usize, labels: &[u32], centroids: &mut [f64]) -> f64 {
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (p, &l) in data.chunks_exact(dim).zip(labels) {
        let l = l as usize;
        counts[l] += 1;
        for (s, v) in sums[l * dim..(l + 1) * dim].iter_mut().zip(p) {
            *s += v;
        }
    }
    let mut new = centroids.to_vec();
    for j in 0..k {
        if counts[j] > 0 {
            for d in 0..dim {
                new[j * dim + d] = sums[j * dim + d] / counts[j] as f64;
            }
        }
    }
    for j in 0..k {
        if counts[j] == 0 {
            // Farthest point from its own (updated) centroid.
            let far = farthest(data, dim, labels, &new);
            new[j * dim..(j + 1) * dim].copy_from_slice(&data[far * dim..(far + 1) * dim]);
        }
    }
    let shift = centroids
        .chunks_exact(dim)
        .zip(new.chunks_exact(dim))
        .map(|(a, b)| sq_dist(a, b).sqrt())
        .fold(0.0, f64::max);
    centroids.copy_from_slice(&new);
    shift
}
