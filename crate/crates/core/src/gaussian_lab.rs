//! Correlated Gaussian pairs with closed-form MI, used to check the
//! patch / cluster / bin estimator against ground truth.
//!
//! Two families are built in. The scalar pair has covariance
//! `[[1, ρ], [ρ, 1]]` and MI `-½ ln(1 - ρ²)`. The isotropic 2-D pair has
//! identity marginal covariances with `corr(X_i, Y_j) = δ_ij ρ`, so its MI
//! is `-ln(1 - ρ²)`; patching it component-wise yields samples of the
//! scalar pair, whose MI is only half as large.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mi_core::{bin_values, kmeans, plugin_mi, KMeansConfig, PatchSet, ValueRange};
use crate::rng::Stream;

/// Joint covariance of `[X, Y]` with `X ∈ R^n`, `Y ∈ R^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSpec {
    pub n: usize,
    pub m: usize,
    /// Row-major `(n + m)²` covariance.
    pub sigma: Vec<f64>,
    pub seed: u64,
}

impl GaussianSpec {
    pub fn new(n: usize, m: usize, sigma: Vec<f64>, seed: u64) -> Result<Self> {
        let d = n + m;
        if n == 0 || m == 0 {
            return Err(Error::domain("both blocks need at least one dimension"));
        }
        if sigma.len() != d * d {
            return Err(Error::domain(format!(
                "covariance has {} entries, expected {}",
                sigma.len(),
                d * d
            )));
        }
        for i in 0..d {
            for j in 0..i {
                if sigma[i * d + j] != sigma[j * d + i] {
                    return Err(Error::domain(format!("covariance is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, m, sigma, seed })
    }

    /// Unit-variance `X, Y ∈ R^dim` with `corr(X_i, Y_j) = δ_ij ρ`.
    pub fn paired(dim: usize, rho: f64, seed: u64) -> Result<Self> {
        if rho.is_nan() || rho.abs() >= 1.0 {
            return Err(Error::domain(format!("correlation {rho} must lie in (-1, 1)")));
        }
        let d = 2 * dim;
        let mut sigma = vec![0.0; d * d];
        for i in 0..d {
            sigma[i * d + i] = 1.0;
        }
        for i in 0..dim {
            sigma[i * d + dim + i] = rho;
            sigma[(dim + i) * d + i] = rho;
        }
        Self::new(dim, dim, sigma, seed)
    }

    fn dim(&self) -> usize {
        self.n + self.m
    }

    fn block(&self, start: usize, len: usize) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(len, len, |i, j| self.sigma[(start + i) * d + start + j])
    }

    fn cholesky(&self, mat: DMatrix<f64>, what: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        mat.cholesky()
            .ok_or_else(|| Error::domain(format!("{what} is not positive definite")))
    }

    /// Lower Cholesky factor of the full covariance, row-major.
    fn lower_factor(&self) -> Result<Vec<f64>> {
        let d = self.dim();
        let l = self.cholesky(self.block(0, d), "covariance")?.l();
        Ok((0..d * d).map(|k| l[(k / d, k % d)]).collect())
    }
}

fn log_det(ch: &nalgebra::Cholesky<f64, nalgebra::Dyn>) -> f64 {
    2.0 * ch.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// `½ ln(det Σ_X det Σ_Y / det Σ)` in nats.
pub fn true_mi_gaussian(spec: &GaussianSpec) -> Result<f64> {
    let full = spec.cholesky(spec.block(0, spec.dim()), "covariance")?;
    let x = spec.cholesky(spec.block(0, spec.n), "X block")?;
    let y = spec.cholesky(spec.block(spec.n, spec.m), "Y block")?;
    Ok((0.5 * (log_det(&x) + log_det(&y) - log_det(&full))).max(0.0))
}

/// MI of the scalar pair: `ln sqrt(1 / (1 - ρ²))`.
pub fn scalar_pair_mi(rho: f64) -> f64 {
    0.5 * (1.0 / (1.0 - rho * rho)).ln()
}

/// MI of the isotropic 2-D pair: `ln sqrt(1 / (1 - ρ²)²)`.
pub fn isotropic_pair_mi(rho: f64) -> f64 {
    (1.0 / (1.0 - rho * rho)).ln()
}

/// Paired samples, row-major: `count × n` for X and `count × m` for Y.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSamples {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

pub fn sample_gaussian(spec: &GaussianSpec, count: usize) -> Result<GaussianSamples> {
    sample_with(spec, count, &mut Stream::new(spec.seed))
}

pub fn sample_with(spec: &GaussianSpec, count: usize, stream: &mut Stream) -> Result<GaussianSamples> {
    if count == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    let d = spec.dim();
    let l = spec.lower_factor()?;
    let mut x = Vec::with_capacity(count * spec.n);
    let mut y = Vec::with_capacity(count * spec.m);
    let mut z = vec![0.0; d];
    for _ in 0..count {
        z.iter_mut().for_each(|v| *v = stream.normal());
        for i in 0..d {
            let v: f64 = (0..=i).map(|j| l[i * d + j] * z[j]).sum();
            if i < spec.n {
                x.push(v);
            } else {
                y.push(v);
            }
        }
    }
    Ok(GaussianSamples { x, y })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationMode {
    #[serde(rename = "1d")]
    Scalar,
    #[serde(rename = "2d")]
    Patched2d,
}

impl ValidationMode {
    pub fn label(self) -> &'static str {
        match self {
            ValidationMode::Scalar => "1d",
            ValidationMode::Patched2d => "2d",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MIEstimateRecord {
    pub mode: ValidationMode,
    pub rho: f64,
    pub k: usize,
    pub sample_count: usize,
    pub repeat: usize,
    pub estimate_nats: f64,
    /// MI of the scalar pair, which is also the patched-variable truth in 2-D.
    pub true_mi_nats: f64,
    /// MI of the unpatched 2-D vectors; only set in 2-D mode.
    pub true_full_nats: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub rhos: Vec<f64>,
    pub ks: Vec<usize>,
    pub samples: usize,
    pub repeats: usize,
    /// Equal-width bins used for the continuous X side.
    pub x_bins: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
}

impl ValidationConfig {
    pub const DEFAULT_RHOS: [f64; 7] = [-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9];
    pub const DEFAULT_KS: [usize; 5] = [2, 4, 8, 16, 32];

    pub fn scalar_defaults() -> Self {
        Self {
            rhos: Self::DEFAULT_RHOS.to_vec(),
            ks: Self::DEFAULT_KS.to_vec(),
            samples: 400_000,
            repeats: 5,
            x_bins: 30,
            seed: 2023,
            max_iters: 1000,
            tol: 1e-9,
        }
    }

    pub fn patched_defaults() -> Self {
        Self {
            samples: 1_000_000,
            repeats: 1,
            ..Self::scalar_defaults()
        }
    }

    fn check(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::domain("repeats must be at least 1"));
        }
        if self.x_bins < 2 {
            return Err(Error::domain("x_bins must be at least 2"));
        }
        for &rho in &self.rhos {
            if rho.is_nan() || rho.abs() >= 1.0 {
                return Err(Error::domain(format!(
                    "ρ = {rho}: the closed-form MI diverges at |ρ| = 1"
                )));
            }
        }
        for &k in &self.ks {
            if k < 2 {
                return Err(Error::domain(format!("K = {k}; need K >= 2")));
            }
            if self.samples < 10 * k {
                return Err(Error::domain(format!(
                    "{} samples is fewer than 10·K for K = {k}",
                    self.samples
                )));
            }
        }
        Ok(())
    }
}

/// Bins `x`, clusters `y` and returns the plug-in MI of the two.
fn estimate(x_symbols: &[u64], y: &[f64], k: usize, seed: u64, cfg: &ValidationConfig) -> Result<f64> {
    let set = PatchSet::from_rows(0, 1, 1, y.to_vec())?;
    let model = kmeans(
        &set,
        &KMeansConfig {
            k,
            seed,
            max_iters: cfg.max_iters,
            tol: cfg.tol,
        },
    )?;
    plugin_mi(x_symbols, &model.labels)
}

fn bin_column(xs: &[f64], bins: usize) -> Vec<u64> {
    let range = ValueRange::of(xs.iter().copied()).expect("non-empty sample");
    bin_values(xs, bins, range)
}

fn run(cfg: &ValidationConfig, mode: ValidationMode) -> Result<Vec<MIEstimateRecord>> {
    cfg.check()?;
    let dim = match mode {
        ValidationMode::Scalar => 1,
        ValidationMode::Patched2d => 2,
    };
    let tag = dim as u64;
    let mut records = Vec::new();
    for (ri, &rho) in cfg.rhos.iter().enumerate() {
        let spec = GaussianSpec::paired(dim, rho, cfg.seed)?;
        let mut stream = Stream::derived(cfg.seed, &[tag, ri as u64]);
        // Component-wise patching: row-major samples already interleave
        // (X1, X2) per draw, so the flat vectors are the pooled patches.
        let samples = sample_with(&spec, cfg.samples, &mut stream)?;
        let x_symbols = bin_column(&samples.x, cfg.x_bins);
        let truth = scalar_pair_mi(rho);
        let full = (mode == ValidationMode::Patched2d).then(|| isotropic_pair_mi(rho));

        let grid: Vec<(usize, usize, usize)> = cfg
            .ks
            .iter()
            .enumerate()
            .flat_map(|(ki, &k)| (0..cfg.repeats).map(move |r| (ki, k, r)))
            .collect();
        let estimates: Vec<Result<f64>> = grid
            .par_iter()
            .map(|&(ki, k, r)| {
                let seed = crate::rng::derive_seed(cfg.seed, &[tag, ri as u64, ki as u64, r as u64]);
                estimate(&x_symbols, &samples.y, k, seed, cfg)
            })
            .collect();
        for ((_, k, repeat), est) in grid.into_iter().zip(estimates) {
            records.push(MIEstimateRecord {
                mode,
                rho,
                k,
                sample_count: cfg.samples,
                repeat,
                estimate_nats: est?,
                true_mi_nats: truth,
                true_full_nats: full,
            });
        }
    }
    Ok(records)
}

/// Scalar pairs: cluster Y into K groups and estimate I(binned X; cluster).
pub fn run_validation_1d(cfg: &ValidationConfig) -> Result<Vec<MIEstimateRecord>> {
    run(cfg, ValidationMode::Scalar)
}

/// Isotropic 2-D pairs split component-wise into univariate patches.
pub fn run_validation_2d(cfg: &ValidationConfig) -> Result<Vec<MIEstimateRecord>> {
    run(cfg, ValidationMode::Patched2d)
}
