//! Dataset manifests: a JSON index of feature and output files.
//!
//! Paths inside a manifest are relative to the manifest's own directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FeatureTensor, TaskOutput};
use crate::error::{Error, Result};
use crate::fsutil;

/// Feature patch side `n` and output patch side `m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchConfig {
    pub n: usize,
    pub m: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: String,
    pub features: String,
    pub outputs: BTreeMap<u32, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub patch: PatchConfig,
    pub tasks: Vec<u32>,
    pub samples: Vec<SampleEntry>,
}

impl DatasetManifest {
    pub fn new(patch: PatchConfig, tasks: Vec<u32>) -> Self {
        Self {
            version: 1,
            patch,
            tasks,
            samples: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fsutil::read_all(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|e| Error::Manifest(format!("not UTF-8: {e}")))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, self.to_json().as_bytes())
    }
}

/// A manifest with every referenced tensor loaded and cross-checked.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub root: PathBuf,
    pub features: Vec<FeatureTensor>,
    pub outputs: BTreeMap<u32, Vec<TaskOutput>>,
}

impl Dataset {
    pub fn open(manifest_path: &Path) -> Result<Self> {
        let manifest = DatasetManifest::read(manifest_path)?;
        let root = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Self::load(manifest, root)
    }

    pub fn load(manifest: DatasetManifest, root: PathBuf) -> Result<Self> {
        let PatchConfig { n, m } = manifest.patch;
        if n == 0 || m == 0 {
            return Err(Error::Manifest("patch sides must be positive".into()));
        }
        if manifest.samples.is_empty() {
            return Err(Error::Manifest("no samples".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for t in &manifest.tasks {
            if !seen.insert(*t) {
                return Err(Error::Manifest(format!("task {t} listed twice")));
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        let mut features = Vec::with_capacity(manifest.samples.len());
        let mut outputs: BTreeMap<u32, Vec<TaskOutput>> =
            manifest.tasks.iter().map(|&t| (t, Vec::new())).collect();

        for entry in &manifest.samples {
            if !ids.insert(entry.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate sample id {}", entry.id)));
            }
            let f = FeatureTensor::read(&root.join(&entry.features))?;
            if let Some(first) = features.first() {
                let first: &FeatureTensor = first;
                if (f.channels(), f.height(), f.width())
                    != (first.channels(), first.height(), first.width())
                {
                    return Err(Error::Manifest(format!(
                        "sample {}: feature shape differs from the first sample",
                        entry.id
                    )));
                }
            }
            for &task in &manifest.tasks {
                let rel = entry.outputs.get(&task).ok_or_else(|| {
                    Error::Manifest(format!("sample {} has no output for task {task}", entry.id))
                })?;
                let out = TaskOutput::read(task, &root.join(rel))?;
                if m * f.height() != n * out.height() || m * f.width() != n * out.width() {
                    return Err(Error::Manifest(format!(
                        "sample {} task {task}: output {}x{} does not align with features {}x{} at patch ratio {m}/{n}",
                        entry.id,
                        out.height(),
                        out.width(),
                        f.height(),
                        f.width()
                    )));
                }
                let list = outputs.get_mut(&task).expect("task initialized");
                if let Some(first) = list.first() {
                    if (out.channels(), out.height(), out.width())
                        != (first.channels(), first.height(), first.width())
                    {
                        return Err(Error::Manifest(format!(
                            "sample {} task {task}: output shape differs from the first sample",
                            entry.id
                        )));
                    }
                }
                list.push(out);
            }
            features.push(f);
        }
        Ok(Self {
            manifest,
            root,
            features,
            outputs,
        })
    }

    pub fn patch(&self) -> PatchConfig {
        self.manifest.patch
    }

    pub fn channels(&self) -> usize {
        self.features[0].channels()
    }

    pub fn task_outputs(&self, task: u32) -> Result<&[TaskOutput]> {
        self.outputs
            .get(&task)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::domain(format!("task {task} is not in the manifest")))
    }
}
