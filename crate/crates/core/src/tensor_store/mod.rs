//! Binary tensor container and dataset manifests.

mod format;
mod manifest;

pub use format::{decode, encode, read_tensor, write_tensor, DType, RawTensor, MAGIC, VERSION};
pub use manifest::{Dataset, DatasetManifest, PatchConfig, SampleEntry};

use crate::error::{Error, Result};

/// A C×H×W feature tensor, channel-major then row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTensor {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f32>,
    channel_ids: Vec<u32>,
}

impl FeatureTensor {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        let ids = (0..channels as u32).collect();
        Self::with_ids(channels, height, width, values, ids)
    }

    pub fn with_ids(
        channels: usize,
        height: usize,
        width: usize,
        values: Vec<f32>,
        channel_ids: Vec<u32>,
    ) -> Result<Self> {
        check_shape(&[channels, height, width], values.len())?;
        check_finite(&values)?;
        if channel_ids.len() != channels {
            return Err(Error::domain(format!(
                "{} channel ids for {} channels",
                channel_ids.len(),
                channels
            )));
        }
        let mut sorted = channel_ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("channel ids must be unique"));
        }
        Ok(Self {
            channels,
            height,
            width,
            values,
            channel_ids,
        })
    }

    /// Zero tensor of the given shape.
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            values: vec![0.0; channels * height * width],
            channel_ids: (0..channels as u32).collect(),
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn channel_ids(&self) -> &[u32] {
        &self.channel_ids
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.values[c * n..(c + 1) * n]
    }

    /// Multiplies one channel by `s` in place.
    pub fn scale_channel(&mut self, c: usize, s: f32) {
        for v in self.channel_mut(c) {
            *v *= s;
        }
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn to_raw(&self) -> RawTensor {
        RawTensor::f32(
            vec![self.channels, self.height, self.width],
            self.values.clone(),
        )
    }

    /// Interprets a 2-D (H×W) or 3-D (C×H×W) container as a feature tensor.
    pub fn from_raw(raw: RawTensor) -> Result<Self> {
        let (c, h, w) = raw.chw()?;
        Self::new(c, h, w, raw.values)
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        write_tensor(&self.to_raw(), path)
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Self::from_raw(read_tensor(path)?)
    }
}

/// A per-task output image aligned to a source input.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskOutput {
    pub task_id: u32,
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl TaskOutput {
    pub fn new(
        task_id: u32,
        channels: usize,
        height: usize,
        width: usize,
        values: Vec<f32>,
    ) -> Result<Self> {
        check_shape(&[channels, height, width], values.len())?;
        check_finite(&values)?;
        Ok(Self {
            task_id,
            channels,
            height,
            width,
            values,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn to_raw(&self) -> RawTensor {
        RawTensor::f32(
            vec![self.channels, self.height, self.width],
            self.values.clone(),
        )
    }

    pub fn from_raw(task_id: u32, raw: RawTensor) -> Result<Self> {
        let (c, h, w) = raw.chw()?;
        Self::new(task_id, c, h, w, raw.values)
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        write_tensor(&self.to_raw(), path)
    }

    pub fn read(task_id: u32, path: &std::path::Path) -> Result<Self> {
        Self::from_raw(task_id, read_tensor(path)?)
    }
}

fn check_shape(dims: &[usize], len: usize) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::domain(format!("zero-size dimension in {dims:?}")));
    }
    let expected: usize = dims.iter().product();
    if expected != len {
        return Err(Error::domain(format!(
            "shape {dims:?} needs {expected} values, got {len}"
        )));
    }
    Ok(())
}

fn check_finite(values: &[f32]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::domain(format!("non-finite value at index {i}"))),
        None => Ok(()),
    }
}
