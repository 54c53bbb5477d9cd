//! Structure-file IO, paired-corpus manifests, training orchestration,
//! evaluation reports, and the CLI for the backbone debiasing toolkit.
//! All numerics live in `desae-core`; this crate owns everything that
//! touches the filesystem or the clock.

pub mod cli;
pub mod config;
pub mod error;
pub mod evalkit;
pub mod manifest;
pub mod parallel;
pub mod pdb;
pub mod report;
pub mod training;

pub use error::{Result, ToolError};
