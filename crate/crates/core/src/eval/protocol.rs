use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which ground-truth sets count as positives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolMode {
    /// Easy positives only; hard and junk are ignored.
    Easy,
    /// Easy and hard positives; junk is ignored.
    #[default]
    Medium,
    /// Hard positives only; easy and junk are ignored.
    Hard,
}

impl ProtocolMode {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolMode::Easy => "easy",
            ProtocolMode::Medium => "medium",
            ProtocolMode::Hard => "hard",
        }
    }
}

impl fmt::Display for ProtocolMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ground truth of one query, as database indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryGroundTruth {
    pub id: String,
    #[serde(default)]
    pub easy: Vec<usize>,
    #[serde(default)]
    pub hard: Vec<usize>,
    #[serde(default)]
    pub junk: Vec<usize>,
}

impl QueryGroundTruth {
    /// `(positives, ignored)` under `mode`.
    pub fn effective(&self, mode: ProtocolMode) -> (HashSet<usize>, HashSet<usize>) {
        let set = |parts: &[&Vec<usize>]| parts.iter().flat_map(|v| v.iter().copied()).collect();
        match mode {
            ProtocolMode::Easy => (set(&[&self.easy]), set(&[&self.hard, &self.junk])),
            ProtocolMode::Medium => (set(&[&self.easy, &self.hard]), set(&[&self.junk])),
            ProtocolMode::Hard => (set(&[&self.hard]), set(&[&self.easy, &self.junk])),
        }
    }
}

/// Per-query easy/hard/junk lists. Query `q` corresponds to row `q` of the
/// query descriptor file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Protocol {
    pub queries: Vec<QueryGroundTruth>,
}

impl Protocol {
    pub fn validate(&self, database_len: usize) -> Result<()> {
        for q in &self.queries {
            let mut seen = HashSet::new();
            for &i in q.easy.iter().chain(&q.hard).chain(&q.junk) {
                if i >= database_len {
                    return Err(Error::param(
                        "protocol",
                        format!("query {}: index {i} outside database of {database_len}", q.id),
                    ));
                }
                if !seen.insert(i) {
                    return Err(Error::param(
                        "protocol",
                        format!("query {}: index {i} appears in more than one set", q.id),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }

    pub fn to_writer<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}
