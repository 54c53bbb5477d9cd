//! Paired-corpus manifests and the curation filter.
//!
//! A manifest is a comma-delimited table with header
//! `pair_id,predicted_path,experimental_path,split`. Paths are resolved
//! relative to the manifest's directory. Rows are validated lazily: the
//! structures behind a row are only parsed when the pair is loaded.

use crate::error::{Result, ToolError};
use crate::pdb::{parse_structure, ParseOptions};
use desae_core::backbone::BackboneStructure;
use serde::Deserialize;
use std::collections::HashSet;
use std::path::{Path, PathBuf};

/// Default curation threshold: mean confidence must exceed this.
pub const DEFAULT_MIN_PLDDT: f64 = 70.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct PairRow {
    pub pair_id: String,
    pub predicted_path: PathBuf,
    pub experimental_path: PathBuf,
    pub split: Split,
}

#[derive(Debug, Clone)]
pub struct PairManifest {
    pub path: PathBuf,
    pub rows: Vec<PairRow>,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    pair_id: String,
    predicted_path: String,
    experimental_path: String,
    split: String,
}

/// Load and validate the table itself (ids unique, splits recognized).
pub fn load_pair_manifest(path: &Path) -> Result<PairManifest> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ToolError::BadManifest {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
    {
        let headers = reader.headers().map_err(|e| ToolError::BadManifest {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        let expected = ["pair_id", "predicted_path", "experimental_path", "split"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(ToolError::BadManifest {
                path: path.to_path_buf(),
                detail: format!("header {got:?}, expected {expected:?}"),
            });
        }
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in reader.deserialize::<RawRow>().enumerate() {
        let line = i + 2; // header is line 1
        let raw = record.map_err(|e| ToolError::BadManifest {
            path: path.to_path_buf(),
            detail: format!("line {line}: {e}"),
        })?;
        if !seen.insert(raw.pair_id.clone()) {
            return Err(ToolError::DuplicatePairId {
                path: path.to_path_buf(),
                pair_id: raw.pair_id,
            });
        }
        let split = match raw.split.to_lowercase().as_str() {
            "train" => Split::Train,
            "val" => Split::Val,
            "test" => Split::Test,
            other => {
                return Err(ToolError::UnknownSplit {
                    path: path.to_path_buf(),
                    line,
                    split: other.to_string(),
                })
            }
        };
        rows.push(PairRow {
            pair_id: raw.pair_id,
            predicted_path: resolve(base, &raw.predicted_path),
            experimental_path: resolve(base, &raw.experimental_path),
            split,
        });
    }
    Ok(PairManifest {
        path: path.to_path_buf(),
        rows,
    })
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

impl PairManifest {
    pub fn split_rows(&self, split: Split) -> Vec<&PairRow> {
        self.rows.iter().filter(|r| r.split == split).collect()
    }
}

/// Parse both structures of a row: the predicted one with confidences from
/// the B-factor column, the experimental one without.
pub fn load_pair(row: &PairRow) -> Result<(BackboneStructure, BackboneStructure)> {
    let mut pred = parse_structure(&row.predicted_path, &ParseOptions::predicted())?;
    let mut exp = parse_structure(&row.experimental_path, &ParseOptions::default())?;
    pred.id = row.pair_id.clone();
    exp.id = row.pair_id.clone();
    Ok((pred, exp))
}

/// Why a pair was rejected by the curation filter.
#[derive(Debug, Clone, PartialEq)]
pub enum RejectReason {
    /// Mean confidence not strictly above the threshold.
    LowPlddt { mean: f64, threshold: f64 },
    LengthMismatch { pred: usize, exp: usize },
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::LowPlddt { mean, threshold } => {
                write!(f, "low_plddt mean={mean:.2} threshold={threshold}")
            }
            Self::LengthMismatch { pred, exp } => {
                write!(f, "length_mismatch pred={pred} exp={exp}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FilterDecision {
    Accept,
    Reject(RejectReason),
}

/// Accept iff mean plddt of the prediction is strictly greater than
/// `min_plddt` and both structures have equal (post-parse) lengths.
pub fn filter_pair(
    pred: &BackboneStructure,
    exp: &BackboneStructure,
    min_plddt: f64,
) -> Result<FilterDecision> {
    let mean = pred.mean_plddt().ok_or_else(|| ToolError::MissingPlddt {
        id: pred.id.clone(),
    })?;
    if mean <= min_plddt {
        return Ok(FilterDecision::Reject(RejectReason::LowPlddt {
            mean,
            threshold: min_plddt,
        }));
    }
    if pred.len() != exp.len() {
        return Ok(FilterDecision::Reject(RejectReason::LengthMismatch {
            pred: pred.len(),
            exp: exp.len(),
        }));
    }
    Ok(FilterDecision::Accept)
}
