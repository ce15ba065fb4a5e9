//! The patch / cluster / bin mutual-information estimator.
//!
//! Output images are cut into M×M patches and clustered with K-means; the
//! cluster index stands in for the output. Feature maps are cut into the
//! spatially matching N×N patches, each patch dimension is binned, and the
//! bin tuple becomes a discrete symbol. The plug-in MI between symbols and
//! cluster labels is a lower bound on the MI between feature and output.

mod binning;
mod kmeans;
mod patch;
mod plugin;

pub use binning::{bin_patches, bin_values, BinnedSymbols, BinningConfig, SymbolMode, ValueRange};
pub use kmeans::{kmeans, ClusterModel, KMeansConfig};
pub use patch::{patchify_channel, patchify_output, unpatchify, PatchOrigin, PatchSet};
pub use plugin::{entropy, plugin_mi};
