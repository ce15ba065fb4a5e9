//! Channel importance under four criteria and the resulting orderings.
//!
//! `Mi` is task-specific; the norm and geometric-median criteria only look
//! at the features. Every ordering sorts by descending score and breaks ties
//! by ascending channel id.

mod gm;
mod mi;
mod norm;

pub use gm::{geometric_median, gm_importance, GmConfig, MedianResult};
pub use mi::{cluster_task, mi_importance, MiConfig};
pub use norm::norm_importance;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Mi,
    L1,
    L2,
    Gm,
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Mi => "mi",
            Criterion::L1 => "l1",
            Criterion::L2 => "l2",
            Criterion::Gm => "gm",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mi" => Ok(Criterion::Mi),
            "l1" => Ok(Criterion::L1),
            "l2" => Ok(Criterion::L2),
            "gm" => Ok(Criterion::Gm),
            other => Err(Error::domain(format!("unknown criterion {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub criterion: Criterion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_id: Option<u32>,
    pub scores: BTreeMap<u32, f64>,
    pub ordering: Vec<u32>,
}

impl ImportanceTable {
    pub fn from_scores(criterion: Criterion, task_id: Option<u32>, scores: BTreeMap<u32, f64>) -> Self {
        let mut ordering: Vec<u32> = scores.keys().copied().collect();
        ordering.sort_by(|a, b| scores[b].total_cmp(&scores[a]).then(a.cmp(b)));
        Self {
            criterion,
            task_id,
            scores,
            ordering,
        }
    }

    /// The `count` highest-ranked channel ids.
    pub fn top(&self, count: usize) -> &[u32] {
        &self.ordering[..count.min(self.ordering.len())]
    }

    /// Rank (0 = most important) of every channel id.
    pub fn ranks(&self) -> BTreeMap<u32, usize> {
        self.ordering.iter().enumerate().map(|(r, &c)| (c, r)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut sorted = self.ordering.clone();
        sorted.sort_unstable();
        let keys: Vec<u32> = self.scores.keys().copied().collect();
        if sorted != keys {
            return Err(Error::domain("ordering is not a permutation of the scored channels"));
        }
        for w in self.ordering.windows(2) {
            let (a, b) = (self.scores[&w[0]], self.scores[&w[1]]);
            if a < b || (a == b && w[0] > w[1]) {
                return Err(Error::domain(format!(
                    "ordering breaks at channels {} and {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text)
            .map_err(|e| Error::domain(format!("bad importance table: {e}")))?;
        t.validate()?;
        Ok(t)
    }

    /// `rank,channel_id,score` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rank,channel_id,score\n");
        for (r, c) in self.ordering.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", r, c, self.scores[c]));
        }
        s
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let bytes = fsutil::read_all(path)?;
        Self::from_json(&String::from_utf8_lossy(&bytes))
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        fsutil::write_atomic(path, self.to_json().as_bytes())
    }
}
