//! Synthetic multi-task datasets with planted channel relevance.
//!
//! Every feature channel is an independent smooth random field: white
//! Gaussian noise blurred by a separable Gaussian kernel (circular
//! boundary) whose taps are normalized to unit energy, so each field has
//! unit variance. Task `j` sees only the channels in its relevant set:
//!
//! ```text
//! clean_j   = Σ_{c ∈ S_j} w_{j,c} · field_c
//! output_j  = clean_j + σ · noise            (upsampled by M/N if M > N)
//! feature_c = scale_c · field_c
//! ```
//!
//! Scales touch the stored features only, which lets norm-based criteria be
//! fooled without changing what any task depends on.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::rng::Stream;
use crate::tensor_store::{
    Dataset, DatasetManifest, FeatureTensor, PatchConfig, SampleEntry, TaskOutput,
};

/// PSNR reported when the reconstruction is exact.
pub const PSNR_CEILING_DB: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub relevant: Vec<usize>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub tasks: Vec<TaskSpec>,
    pub noise_sigma: f64,
    pub scales: Vec<f64>,
    pub correlation_length: f64,
    pub samples: usize,
    pub patch: PatchConfig,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// 32 channels of 16×32, three tasks with four relevant channels each
    /// (channel 7 is shared by tasks 0 and 1), 200 noise-free samples.
    fn default() -> Self {
        let task = |relevant: [usize; 4]| TaskSpec {
            relevant: relevant.to_vec(),
            weights: vec![1.0; 4],
        };
        Self {
            channels: 32,
            height: 16,
            width: 32,
            tasks: vec![task([3, 7, 12, 25]), task([0, 7, 18, 30]), task([5, 11, 21, 28])],
            noise_sigma: 0.0,
            scales: vec![1.0; 32],
            correlation_length: 1.5,
            samples: 200,
            patch: PatchConfig { n: 2, m: 2 },
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::domain(m));
        if self.channels == 0 || self.height == 0 || self.width == 0 || self.samples == 0 {
            return bad("channels, height, width and samples must be positive".into());
        }
        if self.tasks.is_empty() {
            return bad("at least one task is required".into());
        }
        for (j, t) in self.tasks.iter().enumerate() {
            if t.relevant.is_empty() {
                return bad(format!("task {j} has no relevant channels"));
            }
            if t.relevant.len() != t.weights.len() {
                return bad(format!("task {j}: {} channels but {} weights", t.relevant.len(), t.weights.len()));
            }
            if let Some(c) = t.relevant.iter().find(|&&c| c >= self.channels) {
                return bad(format!("task {j}: channel {c} out of range"));
            }
            let mut seen = t.relevant.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != t.relevant.len() {
                return bad(format!("task {j}: repeated relevant channel"));
            }
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return bad("noise sigma must be finite and non-negative".into());
        }
        if self.scales.len() != self.channels {
            return bad(format!("{} scales for {} channels", self.scales.len(), self.channels));
        }
        if self.scales.iter().any(|&s| s == 0.0 || !s.is_finite()) {
            return bad("scales must be finite and non-zero".into());
        }
        if self.correlation_length.is_nan() || self.correlation_length <= 0.0 {
            return bad("correlation length must be positive".into());
        }
        let PatchConfig { n, m } = self.patch;
        if n == 0 || m == 0 || m % n != 0 {
            return bad(format!("output patch side {m} must be a positive multiple of {n}"));
        }
        if !self.height.is_multiple_of(n) || !self.width.is_multiple_of(n) {
            return Err(Error::Dimension {
                axis: if !self.height.is_multiple_of(n) { "height" } else { "width" },
                message: format!("{}x{} is not divisible by patch side {n}", self.height, self.width),
            });
        }
        Ok(())
    }

    /// Signal power of task `j`'s clean output (fields have unit variance).
    pub fn signal_power(&self, task: usize) -> f64 {
        self.tasks[task].weights.iter().map(|w| w * w).sum()
    }

    /// Sets σ so the noise power is `fraction` of the mean task signal power.
    pub fn with_noise_fraction(mut self, fraction: f64) -> Self {
        let mean = (0..self.tasks.len()).map(|j| self.signal_power(j)).sum::<f64>()
            / self.tasks.len() as f64;
        self.noise_sigma = (fraction * mean).sqrt();
        self
    }

    fn upsample(&self) -> usize {
        self.patch.m / self.patch.n
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fsutil::read_all(path)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::domain(format!("bad synth spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec serializes");
        s.push('\n');
        s
    }
}

fn kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let energy = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
    taps.into_iter().map(|t| t / energy).collect()
}

fn blur(src: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as i64;
    let wrap = |i: i64, n: usize| i.rem_euclid(n as i64) as usize;
    let mut rows = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            rows[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * src[y * w + wrap(x as i64 + k as i64 - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * rows[wrap(y as i64 + k as i64 - r, h) * w + x])
                .sum();
        }
    }
    out
}

/// One generated sample: unscaled fields, stored features, noisy outputs.
struct Sample {
    fields: Vec<Vec<f64>>,
    features: FeatureTensor,
    outputs: Vec<TaskOutput>,
}

fn clean_output(spec: &SynthSpec, task: usize, fields: &[Vec<f64>]) -> Vec<f64> {
    let plane = spec.height * spec.width;
    let t = &spec.tasks[task];
    let mut y = vec![0.0; plane];
    for (&c, &w) in t.relevant.iter().zip(&t.weights) {
        for (a, v) in y.iter_mut().zip(&fields[c]) {
            *a += w * v;
        }
    }
    y
}

fn make_sample(spec: &SynthSpec, index: usize, taps: &[f64]) -> Result<Sample> {
    let (h, w) = (spec.height, spec.width);
    let mut stream = Stream::derived(spec.seed, &[0x5e, index as u64]);
    let fields: Vec<Vec<f64>> = (0..spec.channels)
        .map(|_| {
            let white: Vec<f64> = (0..h * w).map(|_| stream.normal()).collect();
            blur(&white, h, w, taps)
        })
        .collect();
    let values: Vec<f32> = fields
        .iter()
        .zip(&spec.scales)
        .flat_map(|(f, &s)| f.iter().map(move |v| (s * v) as f32))
        .collect();
    let features = FeatureTensor::new(spec.channels, h, w, values)?;

    let up = spec.upsample();
    let mut outputs = Vec::with_capacity(spec.tasks.len());
    for j in 0..spec.tasks.len() {
        let clean = clean_output(spec, j, &fields);
        let (oh, ow) = (h * up, w * up);
        let mut values = Vec::with_capacity(oh * ow);
        for y in 0..oh {
            for x in 0..ow {
                let v = clean[(y / up) * w + x / up] + spec.noise_sigma * stream.normal();
                values.push(v as f32);
            }
        }
        outputs.push(TaskOutput::new(j as u32, 1, oh, ow, values)?);
    }
    Ok(Sample {
        fields,
        features,
        outputs,
    })
}

fn generate_samples(spec: &SynthSpec) -> Result<Vec<Sample>> {
    spec.validate()?;
    let taps = kernel(spec.correlation_length);
    (0..spec.samples)
        .into_par_iter()
        .map(|i| make_sample(spec, i, &taps))
        .collect()
}

fn sample_id(i: usize) -> String {
    format!("s{i:05}")
}

fn manifest_for(spec: &SynthSpec) -> DatasetManifest {
    let tasks: Vec<u32> = (0..spec.tasks.len() as u32).collect();
    let mut m = DatasetManifest::new(spec.patch, tasks.clone());
    for i in 0..spec.samples {
        let id = sample_id(i);
        m.samples.push(SampleEntry {
            features: format!("features/{id}.ften"),
            outputs: tasks
                .iter()
                .map(|&t| (t, format!("outputs/t{t}/{id}.ften")))
                .collect(),
            id,
        });
    }
    m
}

/// Builds the dataset in memory without touching the filesystem.
pub fn dataset(spec: &SynthSpec) -> Result<Dataset> {
    let samples = generate_samples(spec)?;
    let manifest = manifest_for(spec);
    let mut outputs: BTreeMap<u32, Vec<TaskOutput>> = BTreeMap::new();
    let mut features = Vec::with_capacity(samples.len());
    for s in samples {
        features.push(s.features);
        for o in s.outputs {
            outputs.entry(o.task_id).or_default().push(o);
        }
    }
    Ok(Dataset {
        manifest,
        root: PathBuf::new(),
        features,
        outputs,
    })
}

/// Writes features, outputs, `manifest.json` and `synth_spec.json` under `dir`.
pub fn generate(spec: &SynthSpec, dir: &Path) -> Result<DatasetManifest> {
    let ds = dataset(spec)?;
    let mkdir = |p: PathBuf| std::fs::create_dir_all(&p).map_err(|e| Error::io(p, e));
    mkdir(dir.join("features"))?;
    for t in &ds.manifest.tasks {
        mkdir(dir.join(format!("outputs/t{t}")))?;
    }
    for (entry, f) in ds.manifest.samples.iter().zip(&ds.features) {
        f.write(&dir.join(&entry.features))?;
        for (t, rel) in &entry.outputs {
            let i = ds.manifest.samples.iter().position(|e| e.id == entry.id).expect("entry");
            ds.outputs[t][i].write(&dir.join(rel))?;
        }
    }
    fsutil::write_atomic(&dir.join("synth_spec.json"), spec.to_json().as_bytes())?;
    ds.manifest.write(&dir.join("manifest.json"))?;
    Ok(ds.manifest)
}

/// Noise-free task outputs at feature resolution, one plane per sample.
pub fn clean_outputs(spec: &SynthSpec, task: usize) -> Result<Vec<Vec<f64>>> {
    if task >= spec.tasks.len() {
        return Err(Error::domain(format!("task {task} is not in the spec")));
    }
    Ok(generate_samples(spec)?
        .iter()
        .map(|s| clean_output(spec, task, &s.fields))
        .collect())
}

/// PSNR of the task output recomputed from reconstructed features.
///
/// Reconstructed channels are divided by their scale factors and mixed with
/// the task weights; the error is pooled over all samples and compared with
/// the clean output. Peak is the clean output's dynamic range over the
/// dataset. An exact reconstruction reports [`PSNR_CEILING_DB`].
pub fn proxy_accuracy(reconstructed: &[FeatureTensor], spec: &SynthSpec, task: usize) -> Result<f64> {
    let clean = clean_outputs(spec, task)?;
    proxy_accuracy_against(reconstructed, spec, task, &clean)
}

/// As [`proxy_accuracy`], with the clean outputs already computed.
pub fn proxy_accuracy_against(
    reconstructed: &[FeatureTensor],
    spec: &SynthSpec,
    task: usize,
    clean: &[Vec<f64>],
) -> Result<f64> {
    if reconstructed.len() != clean.len() {
        return Err(Error::domain(format!(
            "{} reconstructed samples for {} clean outputs",
            reconstructed.len(),
            clean.len()
        )));
    }
    let t = spec
        .tasks
        .get(task)
        .ok_or_else(|| Error::domain(format!("task {task} is not in the spec")))?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut sq = 0.0;
    let mut count = 0usize;
    for (r, y) in reconstructed.iter().zip(clean) {
        if (r.channels(), r.height(), r.width()) != (spec.channels, spec.height, spec.width) {
            return Err(Error::domain(format!(
                "reconstruction is {}x{}x{}, spec needs {}x{}x{}",
                r.channels(),
                r.height(),
                r.width(),
                spec.channels,
                spec.height,
                spec.width
            )));
        }
        let mut pred = vec![0.0; y.len()];
        for (&c, &w) in t.relevant.iter().zip(&t.weights) {
            let s = spec.scales[c];
            for (p, &v) in pred.iter_mut().zip(r.channel(c)) {
                *p += w * v as f64 / s;
            }
        }
        for (p, &v) in pred.iter().zip(y) {
            sq += (p - v) * (p - v);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        count += y.len();
    }
    let mse = sq / count as f64;
    let peak = hi - lo;
    if mse == 0.0 {
        return Ok(PSNR_CEILING_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CEILING_DB))
}
