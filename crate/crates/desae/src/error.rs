//! One error type for the whole tool, with stable machine-parseable codes
//! for the CLI's diagnostic stream.

use desae_core::autodiff::AdError;
use desae_core::backbone::StructureError;
use desae_core::desae::{CheckpointError, DesaeError};
use desae_core::geometry::GeometryError;
use desae_core::loss::LossError;
use desae_core::metrics::MetricError;
use desae_core::stats::StatsError;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {detail}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("{path}: no backbone atoms for chain {chain:?}")]
    EmptyChain { path: PathBuf, chain: Option<char> },
    #[error("{path}: {source}")]
    InvalidStructure {
        path: PathBuf,
        #[source]
        source: StructureError,
    },
    #[error("{path}: coordinate or field does not fit the fixed-column format: {detail}")]
    FormatOverflow { path: PathBuf, detail: String },
    #[error("manifest {path}: duplicate pair_id {pair_id:?}")]
    DuplicatePairId { path: PathBuf, pair_id: String },
    #[error("manifest {path}:{line}: unknown split {split:?} (expected train/val/test)")]
    UnknownSplit {
        path: PathBuf,
        line: usize,
        split: String,
    },
    #[error("manifest {path}: {detail}")]
    BadManifest { path: PathBuf, detail: String },
    #[error("predicted structure {id} carries no per-residue confidence values")]
    MissingPlddt { id: String },
    #[error("train split of {path} is empty")]
    EmptySplit { path: PathBuf },
    #[error("pair {pair_id}: lengths differ ({pred} vs {exp}); curate the manifest first")]
    PairLengthMismatch {
        pair_id: String,
        pred: usize,
        exp: usize,
    },
    #[error("non-finite loss at epoch {epoch}; last good checkpoint retained at {kept}")]
    NonFiniteLoss { epoch: usize, kept: PathBuf },
    #[error("{0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("{0}")]
    Model(#[from] DesaeError),
    #[error("{0}")]
    Geometry(#[from] GeometryError),
    #[error("{0}")]
    Stats(#[from] StatsError),
    #[error("{0}")]
    Loss(#[from] LossError),
    #[error("{0}")]
    Metric(#[from] MetricError),
    #[error("{0}")]
    Autodiff(#[from] AdError),
    #[error("config {path}: {detail}")]
    BadConfig { path: PathBuf, detail: String },
    #[error("{0}")]
    InvalidArgument(String),
}

impl ToolError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-parseable code printed on the diagnostic stream.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Io { .. } => "E_IO",
            Self::MalformedRecord { .. } => "E_MALFORMED_RECORD",
            Self::EmptyChain { .. } => "E_EMPTY_CHAIN",
            Self::InvalidStructure { .. } => "E_INVALID_STRUCTURE",
            Self::FormatOverflow { .. } => "E_FORMAT_OVERFLOW",
            Self::DuplicatePairId { .. } => "E_DUPLICATE_PAIR_ID",
            Self::UnknownSplit { .. } => "E_UNKNOWN_SPLIT",
            Self::BadManifest { .. } => "E_BAD_MANIFEST",
            Self::MissingPlddt { .. } => "E_MISSING_PLDDT",
            Self::EmptySplit { .. } => "E_EMPTY_SPLIT",
            Self::PairLengthMismatch { .. } => "E_LENGTH_MISMATCH",
            Self::NonFiniteLoss { .. } => "E_NONFINITE_LOSS",
            Self::Checkpoint(_) => "E_CHECKPOINT",
            Self::Model(_) => "E_MODEL",
            Self::Geometry(_) => "E_GEOMETRY",
            Self::Stats(_) => "E_STATS",
            Self::Loss(_) => "E_LOSS",
            Self::Metric(_) => "E_METRIC",
            Self::Autodiff(_) => "E_AUTODIFF",
            Self::BadConfig { .. } => "E_BAD_CONFIG",
            Self::InvalidArgument(_) => "E_INVALID_ARG",
        }
    }
}

pub type Result<T> = std::result::Result<T, ToolError>;
