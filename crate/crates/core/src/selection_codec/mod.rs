//! Hard and soft channel selection.
//!
//! Hard selection keeps the top-ranked channels and zeroes the rest. Soft
//! selection sends the top-ranked channels as 8-bit base codes and tiles the
//! remainder into one image that is compressed by a block-DCT surrogate codec
//! or by an external encoder.

mod bitio;
pub mod external;
pub mod quant;
pub mod select;
pub mod surrogate;
pub mod tile;

pub use external::ExternalCodec;
pub use quant::{dequantize8, quantize8, QuantizedTensor};
pub use select::{
    hard_select, keep_count, soft_select, CodecChoice, CodecKind, CompressedPayload, Enhancement,
    HardSelection, Keep, PayloadSizes, SelectionMode, SelectionPlan,
};
pub use surrogate::{decode_enhancement, encode_enhancement, quant_step, Image8, MAX_QP};
pub use tile::{tile, untile, TilingDescriptor};
