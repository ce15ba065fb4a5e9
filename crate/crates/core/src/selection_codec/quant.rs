//! Per-channel uniform 8-bit quantization.

use crate::error::{Error, Result};
use crate::tensor_store::FeatureTensor;

/// 8-bit codes plus the per-channel range needed to undo them.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedTensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub codes: Vec<u8>,
    pub channel_ids: Vec<u32>,
    /// `(min, max)` per channel.
    pub ranges: Vec<(f32, f32)>,
}

impl QuantizedTensor {
    pub fn plane(&self, c: usize) -> &[u8] {
        let n = self.height * self.width;
        &self.codes[c * n..(c + 1) * n]
    }
}

/// `code = round(255 (v - min) / (max - min))`; a constant channel maps to 0.
pub fn quantize_plane(plane: &[f32]) -> (Vec<u8>, (f32, f32)) {
    let (lo, hi) = plane
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi <= lo {
        return (vec![0; plane.len()], (lo, lo));
    }
    let span = hi as f64 - lo as f64;
    let codes = plane
        .iter()
        .map(|&v| (255.0 * (v as f64 - lo as f64) / span).round().clamp(0.0, 255.0) as u8)
        .collect();
    (codes, (lo, hi))
}

/// `min + code (max - min) / 255`.
pub fn dequantize_plane(codes: &[u8], (lo, hi): (f32, f32)) -> Vec<f32> {
    let span = hi as f64 - lo as f64;
    codes
        .iter()
        .map(|&c| (lo as f64 + c as f64 * span / 255.0) as f32)
        .collect()
}

pub fn quantize8(t: &FeatureTensor) -> QuantizedTensor {
    let mut codes = Vec::with_capacity(t.values().len());
    let mut ranges = Vec::with_capacity(t.channels());
    for c in 0..t.channels() {
        let (q, r) = quantize_plane(t.channel(c));
        codes.extend(q);
        ranges.push(r);
    }
    QuantizedTensor {
        channels: t.channels(),
        height: t.height(),
        width: t.width(),
        codes,
        channel_ids: t.channel_ids().to_vec(),
        ranges,
    }
}

pub fn dequantize8(q: &QuantizedTensor) -> Result<FeatureTensor> {
    if q.ranges.len() != q.channels
        || q.channel_ids.len() != q.channels
        || q.codes.len() != q.channels * q.height * q.width
    {
        return Err(Error::domain("quantized tensor metadata does not match its codes"));
    }
    let values = (0..q.channels)
        .flat_map(|c| dequantize_plane(q.plane(c), q.ranges[c]))
        .collect();
    FeatureTensor::with_ids(q.channels, q.height, q.width, values, q.channel_ids.clone())
}
