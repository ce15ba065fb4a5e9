//! Per-dimension equal-width binning of feature patches.
//!
//! Every value `v` of a patch maps to `floor(B * (v - min) / (max - min))`,
//! clamped to `[0, B-1]`, where `[min, max]` is the channel's range over the
//! whole dataset split. The tuple of bin indices becomes one symbol:
//!
//! - `Exact` packs the tuple as a base-B integer; only available when
//!   `B^dim` fits in 64 bits, and injective by construction.
//! - `Hashed` folds the tuple with SplitMix64:
//!   `h = 0x243f6a8885a308d3; for b in tuple { h = splitmix64(h ^ b) }`.
//!   Collisions among the observed tuples are possible but negligible.
//! - `Auto` uses `Exact` when it fits and `Hashed` otherwise.
//!
//! Because the bin of `v` only depends on `(v - min) / (max - min)`, any
//! positive affine map of a channel, with its range recomputed, leaves the
//! symbols unchanged (bit-exactly when the map is exact in floating point,
//! e.g. a power-of-two scale).

use super::patch::PatchSet;
use crate::error::{Error, Result};
use crate::rng::splitmix64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SymbolMode {
    #[default]
    Auto,
    Exact,
    Hashed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BinningConfig {
    pub bins: usize,
    pub mode: SymbolMode,
}

impl BinningConfig {
    pub fn new(bins: usize) -> Self {
        Self {
            bins,
            mode: SymbolMode::Auto,
        }
    }
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self::new(8)
    }
}

/// Closed range of a channel's values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValueRange {
    pub min: f64,
    pub max: f64,
}

impl ValueRange {
    pub fn of<I: IntoIterator<Item = f64>>(values: I) -> Option<Self> {
        values.into_iter().fold(None, |acc, v| match acc {
            None => Some(Self { min: v, max: v }),
            Some(r) => Some(Self {
                min: r.min.min(v),
                max: r.max.max(v),
            }),
        })
    }

    pub fn is_constant(&self) -> bool {
        self.max <= self.min
    }

    fn bin(&self, v: f64, bins: usize) -> u64 {
        let b = (bins as f64 * (v - self.min) / (self.max - self.min)).floor();
        if b <= 0.0 {
            0
        } else if b >= (bins - 1) as f64 {
            (bins - 1) as u64
        } else {
            b as u64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinnedSymbols {
    pub symbols: Vec<u64>,
    /// Set when the channel range was degenerate and every symbol is equal.
    pub constant: bool,
}

const HASH_INIT: u64 = 0x243f_6a88_85a3_08d3;

fn exact_fits(bins: usize, dim: usize) -> bool {
    (bins as u128)
        .checked_pow(dim as u32)
        .is_some_and(|v| v <= u64::MAX as u128)
}

/// Bins a single value into its bin index.
pub fn bin_values(values: &[f64], bins: usize, range: ValueRange) -> Vec<u64> {
    if range.is_constant() {
        return vec![0; values.len()];
    }
    values.iter().map(|&v| range.bin(v, bins)).collect()
}

pub fn bin_patches(patches: &PatchSet, cfg: &BinningConfig, range: ValueRange) -> Result<BinnedSymbols> {
    if cfg.bins < 2 {
        return Err(Error::domain("bin count must be at least 2"));
    }
    if !range.min.is_finite() || !range.max.is_finite() {
        return Err(Error::domain("binning range must be finite"));
    }
    let dim = patches.dim();
    if range.is_constant() {
        return Ok(BinnedSymbols {
            symbols: vec![0; patches.len()],
            constant: true,
        });
    }
    let exact = match cfg.mode {
        SymbolMode::Exact => {
            if !exact_fits(cfg.bins, dim) {
                return Err(Error::domain(format!(
                    "exact symbols need {}^{dim} <= 2^64",
                    cfg.bins
                )));
            }
            true
        }
        SymbolMode::Auto => exact_fits(cfg.bins, dim),
        SymbolMode::Hashed => false,
    };
    let b = cfg.bins as u64;
    let symbols = patches
        .data()
        .chunks_exact(dim)
        .map(|p| {
            if exact {
                p.iter().fold(0u64, |acc, &v| acc * b + range.bin(v, cfg.bins))
            } else {
                p.iter()
                    .fold(HASH_INIT, |h, &v| splitmix64(h ^ range.bin(v, cfg.bins)))
            }
        })
        .collect();
    Ok(BinnedSymbols {
        symbols,
        constant: false,
    })
}
