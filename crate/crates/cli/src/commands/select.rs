use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mifs_core::importance::ImportanceTable;
use mifs_core::selection_codec::{
    hard_select, keep_count, soft_select, CodecChoice, CompressedPayload, ExternalCodec, Keep,
    SelectionPlan,
};
use mifs_core::{fsutil, Dataset, DatasetManifest, Error, FeatureTensor, PatchConfig, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{is_json, Context};
use crate::args::{CodecArgs, KeepArgs, ReconstructArgs, SelectHardArgs, SelectSoftArgs, DEFAULT_KEEP_FRACTIONS};
use crate::output::{absolute, ensure_dir, path_string, write_json, write_rows};

pub const PAYLOAD_INDEX: &str = "payloads.json";

/// Source features: one tensor file or every sample of a manifest.
enum Input {
    Single(FeatureTensor),
    Dataset(Dataset),
}

impl Input {
    fn open(path: &Path) -> Result<Self> {
        if is_json(path) {
            Ok(Input::Dataset(Dataset::open(path)?))
        } else {
            Ok(Input::Single(FeatureTensor::read(path)?))
        }
    }

    fn features(&self) -> &[FeatureTensor] {
        match self {
            Input::Single(t) => std::slice::from_ref(t),
            Input::Dataset(d) => &d.features,
        }
    }

    fn channels(&self) -> usize {
        self.features()[0].channels()
    }
}

/// A file name derived from a sample id; ids are not trusted as paths.
fn file_stem(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    if s.is_empty() || s.chars().all(|c| c == '.') {
        format!("_{s}")
    } else {
        s
    }
}

fn sample_stems(ds: &Dataset) -> Result<Vec<String>> {
    let stems: Vec<String> = ds.manifest.samples.iter().map(|s| file_stem(&s.id)).collect();
    let mut seen = std::collections::BTreeSet::new();
    for s in &stems {
        if !seen.insert(s.as_str()) {
            return Err(Error::Manifest(format!("sample ids collide as file name {s:?}")));
        }
    }
    Ok(stems)
}

/// Source outputs by absolute path, so derived manifests work from anywhere.
fn absolute_outputs(ds: &Dataset) -> Result<Vec<BTreeMap<u32, String>>> {
    ds.manifest
        .samples
        .iter()
        .map(|s| {
            s.outputs
                .iter()
                .map(|(&t, rel)| Ok((t, path_string(&absolute(&ds.root.join(rel))?))))
                .collect()
        })
        .collect()
}

/// C′ values in the order requested, duplicates removed.
pub fn keep_counts(keep: &KeepArgs, channels: usize, default: &[f64]) -> Result<Vec<usize>> {
    let mut counts = if !keep.keep_count.is_empty() {
        keep.keep_count.clone()
    } else {
        let fractions = if keep.keep.is_empty() { default } else { &keep.keep };
        fractions
            .iter()
            .map(|&f| keep_count(f, channels))
            .collect::<Result<Vec<_>>>()?
    };
    let mut seen = std::collections::BTreeSet::new();
    counts.retain(|c| seen.insert(*c));
    for &c in &counts {
        if c == 0 || c > channels {
            return Err(Error::Domain(format!("keep count {c} is outside 1..={channels}")));
        }
    }
    Ok(counts)
}

fn read_ranking(path: &Path, channels: usize) -> Result<ImportanceTable> {
    let table = ImportanceTable::read(path)?;
    if table.ordering.len() != channels {
        return Err(Error::Dimension {
            axis: "channels",
            message: format!(
                "ranking covers {} channels, features have {channels}",
                table.ordering.len()
            ),
        });
    }
    Ok(table)
}

fn write_tensor(t: &FeatureTensor, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        ensure_dir(dir)?;
    }
    t.write(path)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct HardRow {
    keep_count: usize,
    keep_fraction: f64,
    samples: usize,
    dir: String,
}

pub fn hard(a: &SelectHardArgs, ctx: &Context) -> Result<()> {
    let input = Input::open(&a.input)?;
    let c = input.channels();
    let table = read_ranking(&a.ranking, c)?;
    let counts = keep_counts(&a.keep, c, &DEFAULT_KEEP_FRACTIONS)?;
    let mut rows = Vec::new();
    for kept in counts {
        let plan = SelectionPlan::hard(table.ordering.clone(), Keep::Count(kept));
        let selections = input
            .features()
            .par_iter()
            .map(|t| hard_select(t, &plan))
            .collect::<Result<Vec<_>>>()?;
        let name = format!("hard_c{kept}");
        let dir = ctx.out.join(&name);
        match &input {
            Input::Single(_) => {
                write_tensor(&selections[0].selected, &dir.join("selected.ften"))?;
                write_tensor(&selections[0].reconstruction, &dir.join("reconstruction.ften"))?;
            }
            Input::Dataset(ds) => {
                let stems = sample_stems(ds)?;
                let outputs = absolute_outputs(ds)?;
                let mut manifest = DatasetManifest::new(ds.manifest.patch, ds.manifest.tasks.clone());
                for (((entry, sel), stem), outs) in ds.manifest.samples.iter().zip(&selections).zip(&stems).zip(outputs) {
                    let rel = format!("features/{stem}.ften");
                    write_tensor(&sel.reconstruction, &dir.join(&rel))?;
                    manifest.samples.push(mifs_core::tensor_store::SampleEntry {
                        id: entry.id.clone(),
                        features: rel,
                        outputs: outs,
                    });
                }
                manifest.write(&dir.join("manifest.json"))?;
            }
        }
        rows.push(HardRow {
            keep_count: kept,
            keep_fraction: kept as f64 / c as f64,
            samples: selections.len(),
            dir: name,
        });
    }
    write_rows(&ctx.out, "selection", &rows, ctx.format)?;
    Ok(())
}

/// The external codec named on the command line, if any.
pub fn external_codec(a: &CodecArgs) -> Result<Option<ExternalCodec>> {
    if let Some(path) = &a.codec_config {
        if a.codec_cmd.is_some() || a.codec_decode_cmd.is_some() {
            return Err(Error::Domain("--codec-config excludes --codec-cmd and --codec-decode-cmd".into()));
        }
        let bytes = fsutil::read_all(path)?;
        let codec: ExternalCodec = serde_json::from_slice(&bytes).map_err(|e| Error::Format {
            offset: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        return Ok(Some(codec));
    }
    match (&a.codec_cmd, &a.codec_decode_cmd) {
        (None, None) => Ok(None),
        (Some(encode), Some(decode)) => Ok(Some(ExternalCodec {
            encode: encode.clone(),
            decode: decode.clone(),
        })),
        (Some(encode), None) => Ok(Some(ExternalCodec {
            encode: encode.clone(),
            decode: String::new(),
        })),
        (None, Some(decode)) => Ok(Some(ExternalCodec {
            encode: String::new(),
            decode: decode.clone(),
        })),
    }
}

/// Index written next to a directory of payloads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayloadIndex {
    pub version: u32,
    pub patch: PatchConfig,
    pub tasks: Vec<u32>,
    pub samples: Vec<PayloadEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayloadEntry {
    pub id: String,
    /// Relative to the index.
    pub payload: String,
    /// Absolute paths of the source task outputs.
    pub outputs: BTreeMap<u32, String>,
}

/// Distortion of one payload against the features it came from.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PayloadStats {
    pub squared_error: f64,
    pub values: usize,
    /// Largest base-channel error in units of half a quantization step.
    pub base_error_ratio: f64,
}

pub fn payload_stats(original: &FeatureTensor, payload: &CompressedPayload, recon: &FeatureTensor) -> PayloadStats {
    let squared_error = original
        .values()
        .iter()
        .zip(recon.values())
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum();
    let mut ratio = 0f64;
    for (k, id) in payload.ordering[..payload.base.channels].iter().enumerate() {
        let i = original.channel_ids().iter().position(|x| x == id).expect("base id in tensor");
        let (lo, hi) = payload.base.ranges[k];
        let half_step = (hi as f64 - lo as f64) / 510.0;
        let err = original
            .channel(i)
            .iter()
            .zip(recon.channel(i))
            .map(|(&a, &b)| (a as f64 - b as f64).abs())
            .fold(0.0, f64::max);
        if half_step > 0.0 {
            ratio = ratio.max(err / half_step);
        } else if err > 0.0 {
            ratio = f64::INFINITY;
        }
    }
    PayloadStats {
        squared_error,
        values: original.values().len(),
        base_error_ratio: ratio,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct SoftRow {
    keep_count: usize,
    qp: u8,
    samples: usize,
    mean_base_bytes: f64,
    mean_enhancement_bytes: f64,
    mean_total_bytes: f64,
    mse: f64,
    max_base_error_ratio: f64,
    dir: String,
}

pub fn soft(a: &SelectSoftArgs, ctx: &Context) -> Result<()> {
    let input = Input::open(&a.input)?;
    let c = input.channels();
    let table = read_ranking(&a.ranking, c)?;
    let counts = keep_counts(&a.keep, c, &[0.5])?;
    let external = external_codec(&a.codec)?;
    if external.as_ref().is_some_and(|e| e.encode.is_empty() || e.decode.is_empty()) {
        return Err(Error::Domain("an external codec needs both an encode and a decode command".into()));
    }
    if a.qp.is_empty() {
        return Err(Error::Domain("at least one qp is required".into()));
    }
    let mut rows = Vec::new();
    for kept in counts {
        for &qp in &a.qp {
            let mut plan = SelectionPlan::soft(table.ordering.clone(), Keep::Count(kept), qp);
            if let Some(e) = &external {
                plan.codec = CodecChoice::External(e.clone());
            }
            let results = input
                .features()
                .par_iter()
                .map(|t| {
                    let p = soft_select(t, &plan)?;
                    let recon = p.reconstruct_with(external.as_ref())?;
                    let stats = payload_stats(t, &p, &recon);
                    Ok((p, stats))
                })
                .collect::<Result<Vec<_>>>()?;
            let name = format!("soft_c{kept}_qp{qp}");
            let dir = ctx.out.join(&name);
            ensure_dir(&dir)?;
            match &input {
                Input::Single(_) => {
                    fsutil::write_atomic(&dir.join("payload.fsel"), &results[0].0.to_bytes())?;
                }
                Input::Dataset(ds) => {
                    ensure_dir(&dir.join("payloads"))?;
                    let stems = sample_stems(ds)?;
                    let outputs = absolute_outputs(ds)?;
                    let mut index = PayloadIndex {
                        version: 1,
                        patch: ds.manifest.patch,
                        tasks: ds.manifest.tasks.clone(),
                        samples: Vec::new(),
                    };
                    for (((entry, (p, _)), stem), outs) in ds.manifest.samples.iter().zip(&results).zip(&stems).zip(outputs) {
                        let rel = format!("payloads/{stem}.fsel");
                        fsutil::write_atomic(&dir.join(&rel), &p.to_bytes())?;
                        index.samples.push(PayloadEntry {
                            id: entry.id.clone(),
                            payload: rel,
                            outputs: outs,
                        });
                    }
                    write_json(&dir.join(PAYLOAD_INDEX), &index)?;
                }
            }
            let n = results.len() as f64;
            let mean = |f: &dyn Fn(&CompressedPayload) -> usize| results.iter().map(|(p, _)| f(p) as f64).sum::<f64>() / n;
            let (sq, count) = results
                .iter()
                .fold((0.0, 0usize), |(s, k), (_, st)| (s + st.squared_error, k + st.values));
            rows.push(SoftRow {
                keep_count: kept,
                qp,
                samples: results.len(),
                mean_base_bytes: mean(&|p| p.sizes().base_bytes),
                mean_enhancement_bytes: mean(&|p| p.sizes().enhancement_bytes),
                mean_total_bytes: mean(&|p| p.sizes().total_bytes),
                mse: sq / count as f64,
                max_base_error_ratio: results.iter().map(|(_, s)| s.base_error_ratio).fold(0.0, f64::max),
                dir: name,
            });
        }
    }
    write_rows(&ctx.out, "soft_selection", &rows, ctx.format)?;
    Ok(())
}

fn read_payload(path: &Path) -> Result<CompressedPayload> {
    CompressedPayload::from_bytes(&fsutil::read_all(path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct ReconstructRow {
    id: String,
    features: String,
}

pub fn reconstruct(a: &ReconstructArgs, ctx: &Context) -> Result<()> {
    let external = external_codec(&a.codec)?;
    if external.as_ref().is_some_and(|e| e.decode.is_empty()) {
        return Err(Error::Domain("reconstruction needs a decode command".into()));
    }
    let rows = if is_json(&a.input) {
        let bytes = fsutil::read_all(&a.input)?;
        let index: PayloadIndex = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Manifest(format!("{}: {e}", a.input.display())))?;
        let root: PathBuf = a.input.parent().map(Path::to_path_buf).unwrap_or_default();
        let recons = index
            .samples
            .par_iter()
            .map(|s| read_payload(&root.join(&s.payload))?.reconstruct_with(external.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let mut manifest = DatasetManifest::new(index.patch, index.tasks.clone());
        let mut rows = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for (s, t) in index.samples.iter().zip(&recons) {
            let stem = file_stem(&s.id);
            if !seen.insert(stem.clone()) {
                return Err(Error::Manifest(format!("sample ids collide as file name {stem:?}")));
            }
            let rel = format!("features/{stem}.ften");
            write_tensor(t, &ctx.out.join(&rel))?;
            manifest.samples.push(mifs_core::tensor_store::SampleEntry {
                id: s.id.clone(),
                features: rel.clone(),
                outputs: s.outputs.clone(),
            });
            rows.push(ReconstructRow { id: s.id.clone(), features: rel });
        }
        manifest.write(&ctx.out.join("manifest.json"))?;
        rows
    } else {
        let t = read_payload(&a.input)?.reconstruct_with(external.as_ref())?;
        write_tensor(&t, &ctx.out.join("reconstruction.ften"))?;
        vec![ReconstructRow {
            id: String::new(),
            features: "reconstruction.ften".into(),
        }]
    };
    write_rows(&ctx.out, "reconstruct", &rows, ctx.format)?;
    Ok(())
}
