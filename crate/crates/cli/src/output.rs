use std::path::{Path, PathBuf};

use mifs_core::{fsutil, Error, Result};
use serde::{Deserialize, Serialize};

use crate::args::{Command, Format};

pub const RUN_FILE: &str = "run.json";

/// Everything needed to re-run a subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub format: Format,
    pub command: Command,
}

impl RunRecord {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fsutil::read_all(path)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Format {
            offset: 0,
            message: format!("{}: {e}", path.display()),
        })
    }
}

/// Creates `dir` and any parents.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fsutil::write_atomic(path, text.as_bytes())
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value))
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Domain(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Domain(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is UTF-8"))
}

/// Writes `rows` to `dir/stem.csv` or `dir/stem.json`; returns the path.
pub fn write_rows<T: Serialize>(dir: &Path, stem: &str, rows: &[T], format: Format) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}.{}", extension(format)));
    match format {
        Format::Csv => write_text(&path, &to_csv(rows)?)?,
        Format::Json => write_json(&path, rows)?,
    }
    Ok(path)
}

pub fn extension(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

/// Absolute form of `p`, resolving symlinks when it exists.
pub fn absolute(p: &Path) -> Result<PathBuf> {
    match std::fs::canonicalize(p) {
        Ok(c) => Ok(c),
        Err(_) => std::path::absolute(p).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
    }
}

pub fn path_string(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}
