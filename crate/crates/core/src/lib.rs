//! Core library for debiasing predicted protein backbones.
//!
//! Everything in this crate is deterministic, allocation-only compute:
//! backbone geometry (residue frames, dihedrals, kNN graphs, Kabsch
//! superposition, centroid corruption), distribution statistics for
//! corpus-vs-corpus comparison, a minimal reverse-mode autodiff engine,
//! the SE(3) frame-aggregation/frame-updating autoencoder built on top
//! of it, the multi-scale structure-consistency loss, and sequence
//! recovery metrics. File formats, training orchestration, and the CLI
//! live in the companion `desae` crate.
//!
//! The crate is `no_std` (with `alloc`); all transcendental math goes
//! through `num_traits::Float`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod backbone;
pub mod desae;
pub mod geometry;
pub mod loss;
pub mod metrics;
pub mod rng;
pub mod stats;
pub mod synthetic;

pub use backbone::BackboneStructure;
pub use desae::{DesaeConfig, DesaeModel};
pub use geometry::{FeatureTable, GraphTopology, ResidueFrame};
pub use stats::Histogram;
