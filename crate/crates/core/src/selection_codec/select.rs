//! Hard and soft selection, and the container that carries a soft payload.
//!
//! Payload layout (integers little-endian, floats IEEE-754 binary32):
//!
//! | size | field |
//! |-----:|-------|
//! | 4 | magic `FSEL` |
//! | 1 | version (1) |
//! | 1 | enhancement codec: 0 none, 1 surrogate, 2 external |
//! | 1 | qp |
//! | 1 | reserved, 0 |
//! | 4 × 4 | C, H, W, C′ |
//! | 4·C | channel ids in original order |
//! | 4·C | channel ids in rank order |
//! | 8·C′ | base ranges, `(min, max)` per base channel in rank order |
//! | C′·H·W | base codes, channel-major |
//!
//! When C′ < C the enhancement section follows:
//!
//! | size | field |
//! |-----:|-------|
//! | 4 × 2 | tiling grid rows, cols |
//! | 8·(C−C′) | enhancement ranges in rank order |
//! | 4 | bitstream length L |
//! | L | bitstream |
//!
//! The tiles are H×W and hold ranks C′.. in order, so the descriptor is fully
//! recoverable from the header and rank list.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::external::ExternalCodec;
use super::quant::{dequantize_plane, quantize_plane, QuantizedTensor};
use super::surrogate::{check_qp, decode_enhancement, encode_enhancement, Image8};
use super::tile::{tile, untile, TilingDescriptor};
use crate::error::{Error, Result};
use crate::tensor_store::FeatureTensor;

pub const PAYLOAD_MAGIC: [u8; 4] = *b"FSEL";
pub const PAYLOAD_VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    Hard,
    Soft,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keep {
    Fraction(f64),
    Count(usize),
}

/// Number of channels retained when keeping `fraction` of `channels`.
pub fn keep_count(fraction: f64, channels: usize) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::domain(format!(
            "keep fraction {fraction} is outside (0, 1]"
        )));
    }
    let kept = (fraction * channels as f64).round() as usize;
    if kept == 0 {
        return Err(Error::domain(format!(
            "keeping {fraction} of {channels} channels leaves none"
        )));
    }
    Ok(kept)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodecChoice {
    Surrogate,
    External(ExternalCodec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionPlan {
    /// Channel ids, most important first.
    pub ordering: Vec<u32>,
    pub mode: SelectionMode,
    pub keep: Keep,
    pub qp: u8,
    pub codec: CodecChoice,
}

impl SelectionPlan {
    pub fn hard(ordering: Vec<u32>, keep: Keep) -> Self {
        Self {
            ordering,
            mode: SelectionMode::Hard,
            keep,
            qp: 0,
            codec: CodecChoice::Surrogate,
        }
    }

    pub fn soft(ordering: Vec<u32>, keep: Keep, qp: u8) -> Self {
        Self {
            ordering,
            mode: SelectionMode::Soft,
            keep,
            qp,
            codec: CodecChoice::Surrogate,
        }
    }

    /// C′ for this plan's ordering.
    pub fn kept(&self) -> Result<usize> {
        let c = self.ordering.len();
        let kept = match self.keep {
            Keep::Fraction(f) => keep_count(f, c)?,
            Keep::Count(n) => n,
        };
        if kept == 0 || kept > c {
            return Err(Error::domain(format!(
                "keep count {kept} is outside 1..={c}"
            )));
        }
        Ok(kept)
    }

    /// Checks the plan against `t` and returns channel indices in rank order.
    fn rank_indices(&self, t: &FeatureTensor) -> Result<Vec<usize>> {
        check_qp(self.qp)?;
        let index: HashMap<u32, usize> = t
            .channel_ids()
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        if self.ordering.len() != t.channels() {
            return Err(Error::domain(format!(
                "ordering has {} channels, tensor has {}",
                self.ordering.len(),
                t.channels()
            )));
        }
        let mut seen = vec![false; t.channels()];
        self.ordering
            .iter()
            .map(|id| {
                let &i = index
                    .get(id)
                    .ok_or_else(|| Error::domain(format!("ordering names unknown channel {id}")))?;
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::domain(format!("ordering repeats channel {id}")));
                }
                Ok(i)
            })
            .collect()
    }
}

fn gather(t: &FeatureTensor, indices: &[usize]) -> Result<FeatureTensor> {
    let values = indices.iter().flat_map(|&i| t.channel(i).iter().copied()).collect();
    let ids = indices.iter().map(|&i| t.channel_ids()[i]).collect();
    FeatureTensor::with_ids(indices.len(), t.height(), t.width(), values, ids)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HardSelection {
    /// The C′ retained channels in rank order.
    pub selected: FeatureTensor,
    /// All C channels in original order, dropped ones zeroed.
    pub reconstruction: FeatureTensor,
}

pub fn hard_select(t: &FeatureTensor, plan: &SelectionPlan) -> Result<HardSelection> {
    if plan.mode != SelectionMode::Hard {
        return Err(Error::domain("hard_select needs a hard plan"));
    }
    let ranked = plan.rank_indices(t)?;
    let kept = &ranked[..plan.kept()?];
    let mut recon = FeatureTensor::with_ids(
        t.channels(),
        t.height(),
        t.width(),
        vec![0.0; t.values().len()],
        t.channel_ids().to_vec(),
    )?;
    for &i in kept {
        recon.channel_mut(i).copy_from_slice(t.channel(i));
    }
    Ok(HardSelection {
        selected: gather(t, kept)?,
        reconstruction: recon,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodecKind {
    Surrogate,
    External,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Enhancement {
    pub codec: CodecKind,
    pub qp: u8,
    pub tiling: TilingDescriptor,
    /// `(min, max)` per enhancement channel in tile order.
    pub ranges: Vec<(f32, f32)>,
    pub bitstream: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayloadSizes {
    pub base_bytes: usize,
    pub enhancement_bytes: usize,
    pub total_bytes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompressedPayload {
    /// Channel ids in the original tensor order.
    pub channel_ids: Vec<u32>,
    /// Channel ids in rank order; the first C′ are the base.
    pub ordering: Vec<u32>,
    pub height: usize,
    pub width: usize,
    pub base: QuantizedTensor,
    pub enhancement: Option<Enhancement>,
}

pub fn soft_select(t: &FeatureTensor, plan: &SelectionPlan) -> Result<CompressedPayload> {
    if plan.mode != SelectionMode::Soft {
        return Err(Error::domain("soft_select needs a soft plan"));
    }
    let ranked = plan.rank_indices(t)?;
    let kept = plan.kept()?;
    let quantize = |indices: &[usize]| {
        let mut codes = Vec::with_capacity(indices.len() * t.plane_len());
        let mut ranges = Vec::with_capacity(indices.len());
        for &i in indices {
            let (q, r) = quantize_plane(t.channel(i));
            codes.extend(q);
            ranges.push(r);
        }
        (codes, ranges)
    };
    let (codes, ranges) = quantize(&ranked[..kept]);
    let base = QuantizedTensor {
        channels: kept,
        height: t.height(),
        width: t.width(),
        codes,
        channel_ids: plan.ordering[..kept].to_vec(),
        ranges,
    };

    let enhancement = if kept < t.channels() {
        let rest = &ranked[kept..];
        let (codes, ranges) = quantize(rest);
        let tiling = TilingDescriptor::new(
            plan.ordering[kept..].to_vec(),
            t.height(),
            t.width(),
        )?;
        let planes: Vec<&[u8]> = codes.chunks(t.plane_len()).collect();
        let image = Image8::new(
            tiling.image_width(),
            tiling.image_height(),
            tile(&planes, &tiling)?,
        )?;
        let (codec, bitstream) = match &plan.codec {
            CodecChoice::Surrogate => (CodecKind::Surrogate, encode_enhancement(&image, plan.qp)?),
            CodecChoice::External(ext) => (CodecKind::External, ext.encode(&image, plan.qp)?),
        };
        Some(Enhancement {
            codec,
            qp: plan.qp,
            tiling,
            ranges,
            bitstream,
        })
    } else {
        None
    };

    Ok(CompressedPayload {
        channel_ids: t.channel_ids().to_vec(),
        ordering: plan.ordering.clone(),
        height: t.height(),
        width: t.width(),
        base,
        enhancement,
    })
}

impl CompressedPayload {
    pub fn channels(&self) -> usize {
        self.channel_ids.len()
    }

    pub fn sizes(&self) -> PayloadSizes {
        PayloadSizes {
            base_bytes: self.base.codes.len(),
            enhancement_bytes: self.enhancement.as_ref().map_or(0, |e| e.bitstream.len()),
            total_bytes: self.encoded_len(),
        }
    }

    fn encoded_len(&self) -> usize {
        let c = self.channels();
        let base = 24 + 8 * c + 8 * self.base.channels + self.base.codes.len();
        base + self
            .enhancement
            .as_ref()
            .map_or(0, |e| 8 + 8 * e.ranges.len() + 4 + e.bitstream.len())
    }

    /// Rebuilds all C channels in original order using the surrogate decoder.
    pub fn reconstruct(&self) -> Result<FeatureTensor> {
        self.reconstruct_with(None)
    }

    /// As [`reconstruct`](Self::reconstruct); `external` decodes streams
    /// produced by an external encoder.
    pub fn reconstruct_with(&self, external: Option<&ExternalCodec>) -> Result<FeatureTensor> {
        let enhancement = match &self.enhancement {
            None => None,
            Some(e) => {
                let (w, h) = (e.tiling.image_width(), e.tiling.image_height());
                let image = match e.codec {
                    CodecKind::Surrogate => decode_enhancement(&e.bitstream)?,
                    CodecKind::External => external
                        .ok_or_else(|| {
                            Error::domain("payload was encoded externally; a decode command is needed")
                        })?
                        .decode(&e.bitstream, e.qp, w, h)?,
                };
                if (image.width, image.height) != (w, h) {
                    return Err(Error::domain(format!(
                        "enhancement decodes to {}x{}, tiling expects {w}x{h}",
                        image.width, image.height
                    )));
                }
                Some(untile(&image.pixels, &e.tiling)?)
            }
        };
        self.assemble(enhancement.as_deref())
    }

    /// Base channels dequantized, enhancement channels left at zero.
    pub fn reconstruct_base_only(&self) -> Result<FeatureTensor> {
        self.assemble(None)
    }

    fn assemble(&self, enhancement: Option<&[Vec<u8>]>) -> Result<FeatureTensor> {
        let plane = self.height * self.width;
        let index: HashMap<u32, usize> = self
            .channel_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        let mut values = vec![0f32; self.channels() * plane];
        let mut place = |id: u32, data: Vec<f32>| -> Result<()> {
            let &i = index
                .get(&id)
                .ok_or_else(|| Error::domain(format!("ranked channel {id} is not in the payload")))?;
            values[i * plane..(i + 1) * plane].copy_from_slice(&data);
            Ok(())
        };
        for (k, &id) in self.ordering[..self.base.channels].iter().enumerate() {
            place(id, dequantize_plane(self.base.plane(k), self.base.ranges[k]))?;
        }
        if let (Some(planes), Some(e)) = (enhancement, &self.enhancement) {
            for ((codes, &range), &id) in planes.iter().zip(&e.ranges).zip(&e.tiling.channel_order) {
                place(id, dequantize_plane(codes, range))?;
            }
        }
        FeatureTensor::with_ids(
            self.channels(),
            self.height,
            self.width,
            values,
            self.channel_ids.clone(),
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&PAYLOAD_MAGIC);
        let (codec, qp) = match &self.enhancement {
            None => (0, 0),
            Some(e) => (
                match e.codec {
                    CodecKind::Surrogate => 1,
                    CodecKind::External => 2,
                },
                e.qp,
            ),
        };
        out.extend_from_slice(&[PAYLOAD_VERSION, codec, qp, 0]);
        for v in [self.channels(), self.height, self.width, self.base.channels] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for &id in self.channel_ids.iter().chain(&self.ordering) {
            out.extend_from_slice(&id.to_le_bytes());
        }
        let put_ranges = |out: &mut Vec<u8>, ranges: &[(f32, f32)]| {
            for &(lo, hi) in ranges {
                out.extend_from_slice(&lo.to_le_bytes());
                out.extend_from_slice(&hi.to_le_bytes());
            }
        };
        put_ranges(&mut out, &self.base.ranges);
        out.extend_from_slice(&self.base.codes);
        if let Some(e) = &self.enhancement {
            out.extend_from_slice(&(e.tiling.rows as u32).to_le_bytes());
            out.extend_from_slice(&(e.tiling.cols as u32).to_le_bytes());
            put_ranges(&mut out, &e.ranges);
            out.extend_from_slice(&(e.bitstream.len() as u32).to_le_bytes());
            out.extend_from_slice(&e.bitstream);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != PAYLOAD_MAGIC {
            return Err(Error::format(0, "bad payload magic"));
        }
        let version = r.u8()?;
        if version != PAYLOAD_VERSION {
            return Err(Error::format(4, format!("unsupported payload version {version}")));
        }
        let codec = match r.u8()? {
            0 => None,
            1 => Some(CodecKind::Surrogate),
            2 => Some(CodecKind::External),
            k => return Err(Error::format(5, format!("unknown codec {k}"))),
        };
        let qp = r.u8()?;
        if qp > super::surrogate::MAX_QP {
            return Err(Error::format(6, format!("qp {qp} out of range")));
        }
        if r.u8()? != 0 {
            return Err(Error::format(7, "reserved byte is not zero"));
        }
        let c = r.u32()? as usize;
        let height = r.u32()? as usize;
        let width = r.u32()? as usize;
        let kept_at = r.pos;
        let kept = r.u32()? as usize;
        if c == 0 || height == 0 || width == 0 {
            return Err(Error::format(8, "zero dimension"));
        }
        if kept == 0 || kept > c {
            return Err(Error::format(kept_at as u64, format!("base count {kept} outside 1..={c}")));
        }
        if (kept < c) != codec.is_some() {
            return Err(Error::format(5, "codec flag disagrees with the base count"));
        }
        let plane = height
            .checked_mul(width)
            .ok_or_else(|| Error::format(12, "dimensions overflow"))?;
        r.ensure(c.saturating_mul(8))?;
        let ids_at = r.pos;
        let channel_ids = r.u32s(c)?;
        let ordering = r.u32s(c)?;
        let mut sorted = channel_ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::format(ids_at as u64, "repeated channel id"));
        }
        let mut ranked = ordering.clone();
        ranked.sort_unstable();
        if ranked != sorted {
            return Err(Error::format(
                (ids_at + 4 * c) as u64,
                "rank order is not a permutation of the channel ids",
            ));
        }
        let base_ranges = r.ranges(kept)?;
        let codes = r.take(kept.saturating_mul(plane))?.to_vec();
        let base = QuantizedTensor {
            channels: kept,
            height,
            width,
            codes,
            channel_ids: ordering[..kept].to_vec(),
            ranges: base_ranges,
        };
        let enhancement = match codec {
            None => None,
            Some(codec) => {
                let grid_at = r.pos;
                let rows = r.u32()? as usize;
                let cols = r.u32()? as usize;
                let tiling = TilingDescriptor::new(ordering[kept..].to_vec(), height, width)?;
                if (rows, cols) != (tiling.rows, tiling.cols) {
                    return Err(Error::format(
                        grid_at as u64,
                        format!(
                            "grid {rows}x{cols} does not match {}x{} for {} tiles",
                            tiling.rows,
                            tiling.cols,
                            tiling.count()
                        ),
                    ));
                }
                let ranges = r.ranges(c - kept)?;
                let len = r.u32()? as usize;
                let bitstream = r.take(len)?.to_vec();
                Some(Enhancement {
                    codec,
                    qp,
                    tiling,
                    ranges,
                    bitstream,
                })
            }
        };
        if r.pos != bytes.len() {
            return Err(Error::format(
                r.pos as u64,
                format!("{} trailing bytes", bytes.len() - r.pos),
            ));
        }
        Ok(Self {
            channel_ids,
            ordering,
            height,
            width,
            base,
            enhancement,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn ensure(&self, n: usize) -> Result<()> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.bytes.len() as u64,
                format!("payload truncated: {n} bytes needed at offset {}", self.pos),
            ));
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        self.ensure(n)?;
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u32s(&mut self, n: usize) -> Result<Vec<u32>> {
        (0..n).map(|_| self.u32()).collect()
    }

    fn ranges(&mut self, n: usize) -> Result<Vec<(f32, f32)>> {
        self.ensure(n.saturating_mul(8))?;
        (0..n)
            .map(|_| {
                let at = self.pos;
                let lo = f32::from_le_bytes(self.take(4)?.try_into().unwrap());
                let hi = f32::from_le_bytes(self.take(4)?.try_into().unwrap());
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::format(at as u64, format!("bad range ({lo}, {hi})")));
                }
                Ok((lo, hi))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use crate::selection_codec::quant::{dequantize8, quantize8};

    fn random_tensor(c: usize, h: usize, w: usize, seed: u64) -> FeatureTensor {
        let mut s = Stream::new(seed);
        let values = (0..c * h * w).map(|_| s.normal() as f32).collect();
        let ids = (0..c as u32).map(|i| 100 + 3 * i).collect();
        FeatureTensor::with_ids(c, h, w, values, ids).unwrap()
    }

    fn reversed_ids(t: &FeatureTensor) -> Vec<u32> {
        t.channel_ids().iter().rev().copied().collect()
    }

    #[test]
    fn paper_keep_percentages() {
        let kept: Vec<usize> = [1.0, 0.9375, 0.875, 0.75, 0.5]
            .iter()
            .map(|&f| keep_count(f, 256).unwrap())
            .collect();
        assert_eq!(kept, vec![256, 240, 224, 192, 128]);
        assert!(keep_count(0.0, 8).is_err());
        assert!(keep_count(1.5, 8).is_err());
        assert!(keep_count(0.01, 8).is_err());
    }

    #[test]
    fn hard_keep_all_is_identity() {
        let t = random_tensor(5, 4, 6, 1);
        let plan = SelectionPlan::hard(reversed_ids(&t), Keep::Fraction(1.0));
        let sel = hard_select(&t, &plan).unwrap();
        assert_eq!(sel.reconstruction, t);
        assert_eq!(sel.selected.channel_ids(), &plan.ordering[..]);
    }

    #[test]
    fn hard_zero_fills_dropped_channels() {
        let t = random_tensor(6, 3, 3, 2);
        let plan = SelectionPlan::hard(reversed_ids(&t), Keep::Count(2));
        let sel = hard_select(&t, &plan).unwrap();
        assert_eq!(sel.selected.channels(), 2);
        assert_eq!(sel.selected.channel(0), t.channel(5));
        for c in 0..6 {
            let expect: Vec<f32> = if c >= 4 { t.channel(c).to_vec() } else { vec![0.0; 9] };
            assert_eq!(sel.reconstruction.channel(c), &expect[..]);
        }
        assert_eq!(hard_select(&t, &plan).unwrap(), sel);
    }

    #[test]
    fn bad_plans_rejected() {
        let t = random_tensor(3, 2, 2, 3);
        let ids = t.channel_ids().to_vec();
        for keep in [Keep::Count(0), Keep::Count(4)] {
            assert!(hard_select(&t, &SelectionPlan::hard(ids.clone(), keep)).is_err());
        }
        let dup = vec![ids[0], ids[0], ids[1]];
        assert!(hard_select(&t, &SelectionPlan::hard(dup, Keep::Count(1))).is_err());
        let unknown = vec![ids[0], ids[1], 7];
        assert!(hard_select(&t, &SelectionPlan::hard(unknown, Keep::Count(1))).is_err());
        let soft = SelectionPlan::soft(ids.clone(), Keep::Count(1), 52);
        assert!(soft_select(&t, &soft).is_err());
        assert!(hard_select(&t, &SelectionPlan::soft(ids, Keep::Count(1), 10)).is_err());
    }

    #[test]
    fn keep_all_has_no_enhancement() {
        let t = random_tensor(4, 8, 8, 4);
        let p = soft_select(&t, &SelectionPlan::soft(reversed_ids(&t), Keep::Count(4), 30)).unwrap();
        assert!(p.enhancement.is_none());
        assert_eq!(p.sizes().enhancement_bytes, 0);
        assert_eq!(p.reconstruct().unwrap(), dequantize8(&quantize8(&t)).unwrap());
    }

    #[test]
    fn lossless_qp_matches_plain_quantization() {
        let t = random_tensor(7, 8, 16, 5);
        let plan = SelectionPlan::soft(reversed_ids(&t), Keep::Count(3), 0);
        let p = soft_select(&t, &plan).unwrap();
        assert_eq!(p.reconstruct().unwrap(), dequantize8(&quantize8(&t)).unwrap());
    }

    #[test]
    fn container_roundtrip_and_sizes() {
        let t = random_tensor(5, 8, 8, 6);
        let p = soft_select(&t, &SelectionPlan::soft(reversed_ids(&t), Keep::Count(2), 25)).unwrap();
        let bytes = p.to_bytes();
        assert_eq!(bytes.len(), p.sizes().total_bytes);
        let back = CompressedPayload::from_bytes(&bytes).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.reconstruct().unwrap(), p.reconstruct().unwrap());
        let e = p.enhancement.as_ref().unwrap();
        assert_eq!((e.tiling.rows, e.tiling.cols), (1, 3));
    }

    #[test]
    fn corrupt_containers_rejected() {
        let t = random_tensor(5, 8, 8, 7);
        let good = soft_select(&t, &SelectionPlan::soft(reversed_ids(&t), Keep::Count(2), 25))
            .unwrap()
            .to_bytes();
        let offset = |b: &[u8]| match CompressedPayload::from_bytes(b) {
            Err(Error::Format { offset, .. }) => offset,
            other => panic!("expected format error, got {other:?}"),
        };
        let mut bad = good.clone();
        bad[1] = b'X';
        assert_eq!(offset(&bad), 0);
        let mut bad = good.clone();
        bad[5] = 0;
        assert_eq!(offset(&bad), 5);
        let mut bad = good.clone();
        bad[20] = 9;
        assert_eq!(offset(&bad), 20);
        assert_eq!(offset(&good[..good.len() - 1]), good.len() as u64 - 1);
        let mut bad = good.clone();
        bad.push(1);
        assert_eq!(offset(&bad), good.len() as u64);
    }

    #[test]
    fn base_only_matches_quantized_hard_selection() {
        let t = random_tensor(6, 4, 8, 8);
        let ordering = vec![112, 100, 115, 103, 109, 106];
        let soft = soft_select(&t, &SelectionPlan::soft(ordering.clone(), Keep::Count(3), 30)).unwrap();
        let hard = hard_select(&t, &SelectionPlan::hard(ordering, Keep::Count(3))).unwrap();
        let expect = dequantize8(&quantize8(&hard.reconstruction)).unwrap();
        assert_eq!(soft.reconstruct_base_only().unwrap().values(), expect.values());
    }

    #[test]
    fn external_copy_codec_is_lossless() {
        let t = random_tensor(5, 4, 4, 9);
        let ext = ExternalCodec {
            encode: "cp {input} {output}".into(),
            decode: "cp {input} {output}".into(),
        };
        let mut plan = SelectionPlan::soft(reversed_ids(&t), Keep::Count(2), 40);
        plan.codec = CodecChoice::External(ext.clone());
        let p = soft_select(&t, &plan).unwrap();
        assert!(p.reconstruct().is_err());
        let back = CompressedPayload::from_bytes(&p.to_bytes()).unwrap();
        assert_eq!(
            back.reconstruct_with(Some(&ext)).unwrap(),
            dequantize8(&quantize8(&t)).unwrap()
        );
    }
}
