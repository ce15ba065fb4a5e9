//! Task-aware feature importance for split inference.
//!
//! Feature channels are scored against each task output with a patch,
//! cluster and bin mutual-information estimator, ranked alongside norm and
//! geometric-median baselines, and then selected either hard (keep the top
//! channels) or soft (8-bit base channels plus a compressed enhancement
//! layer). A Gaussian lab checks the estimator against closed-form MI, and a
//! synthetic benchmark with planted relevance exercises the whole pipeline.

pub mod error;
pub mod fsutil;
pub mod gaussian_lab;
pub mod importance;
pub mod mi_core;
pub mod multiobjective;
pub mod rng;
pub mod selection_codec;
pub mod synth_bench;
pub mod tensor_store;

pub use error::{Error, Result};
pub use tensor_store::{Dataset, DatasetManifest, FeatureTensor, PatchConfig, TaskOutput};
