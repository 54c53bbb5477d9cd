//! Training/model configuration file (TOML).
//!
//! ```toml
//! [train]
//! epochs = 60
//! lr_init = 1e-3
//! lr_min = 1e-6
//! batch_size = 16
//! corruption_fraction = 0.10
//! seed = 42
//! checkpoint_every = 10
//! grad_clip = 1.0
//! loss_neighbors = 30
//! fragment_size = 7
//!
//! [model]
//! encoder_layers = 8
//! decoder_layers = 6
//! hidden_dim = 128
//! virtual_points = 8
//! neighbors = 30
//! ```
//!
//! Every key is optional and defaults to the values above.

use crate::error::{Result, ToolError};
use crate::training::TrainConfig;
use desae_core::desae::DesaeConfig;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub model: ModelSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub lr_init: f64,
    pub lr_min: f64,
    pub batch_size: usize,
    pub corruption_fraction: f64,
    pub seed: u64,
    pub checkpoint_every: usize,
    pub grad_clip: f64,
    pub loss_neighbors: usize,
    pub fragment_size: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            epochs: d.epochs,
            lr_init: d.lr_init,
            lr_min: d.lr_min,
            batch_size: d.batch_size,
            corruption_fraction: d.corruption_fraction,
            seed: d.seed,
            checkpoint_every: d.checkpoint_every,
            grad_clip: d.grad_clip,
            loss_neighbors: d.loss_neighbors,
            fragment_size: d.fragment_size,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub hidden_dim: usize,
    pub virtual_points: usize,
    pub neighbors: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = DesaeConfig::default();
        Self {
            encoder_layers: d.encoder_layers,
            decoder_layers: d.decoder_layers,
            hidden_dim: d.hidden_dim,
            virtual_points: d.virtual_points,
            neighbors: d.neighbors,
        }
    }
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ToolError::io(path, e))?;
        toml::from_str(&text).map_err(|e| ToolError::BadConfig {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            lr_init: t.lr_init,
            lr_min: t.lr_min,
            batch_size: t.batch_size,
            corruption_fraction: t.corruption_fraction,
            seed: t.seed,
            checkpoint_every: t.checkpoint_every,
            grad_clip: t.grad_clip,
            loss_neighbors: t.loss_neighbors,
            fragment_size: t.fragment_size,
        }
    }

    pub fn model_config(&self) -> DesaeConfig {
        let m = &self.model;
        DesaeConfig {
            encoder_layers: m.encoder_layers,
            decoder_layers: m.decoder_layers,
            hidden_dim: m.hidden_dim,
            virtual_points: m.virtual_points,
            neighbors: m.neighbors,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_match_reference_recipe() {
        let s = Settings::default();
        let t = s.train_config();
        assert_eq!(t.epochs, 60);
        assert_eq!(t.lr_init, 1e-3);
        assert_eq!(t.batch_size, 16);
        assert_eq!(t.corruption_fraction, 0.10);
        let m = s.model_config();
        assert_eq!(m.encoder_layers, 8);
        assert_eq!(m.decoder_layers, 6);
        assert_eq!(m.hidden_dim, 128);
    }

    #[test]
    fn partial_file_overrides_only_given_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.toml");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "[train]\nepochs = 3\nseed = 7\n[model]\nhidden_dim = 32").unwrap();
        drop(f);
        let s = Settings::load(&path).unwrap();
        assert_eq!(s.train.epochs, 3);
        assert_eq!(s.train.seed, 7);
        assert_eq!(s.train.batch_size, 16);
        assert_eq!(s.model.hidden_dim, 32);
        assert_eq!(s.model.encoder_layers, 8);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.toml");
        std::fs::write(&path, "[train]\nlearning_rate = 1.0\n").unwrap();
        assert!(matches!(
            Settings::load(&path).unwrap_err(),
            ToolError::BadConfig { .. }
        ));
    }
}
