//! Checkpoint binary layout.
//!
//! Little-endian throughout: magic "DSAE", format version, the five config
//! integers, the parameter count, then every parameter as an f64 in
//! declaration order. An optional training-state block (epoch, optimizer
//! step, Adam first/second moments) follows for exact resume. Round-trips
//! are bitwise.

use alloc::vec::Vec;

use super::{DesaeConfig, DesaeModel, Params};
use crate::autodiff::AdamState;

const MAGIC: &[u8; 4] = b"DSAE";
const VERSION: u32 = 1;

/// Optimizer and progress state for exact training resume.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    /// Epochs completed so far.
    pub epoch: u64,
    pub adam: AdamState,
}

/// A serializable snapshot: model weights plus optional training state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: DesaeModel,
    pub train: Option<TrainState>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckpointError {
    BadMagic,
    UnsupportedVersion(u32),
    Truncated,
    TrailingBytes(usize),
    CountMismatch { stored: u64, expected: u64 },
    ConfigMismatch,
    InvalidConfig,
}

impl core::fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::BadMagic => write!(f, "not a checkpoint file (bad magic)"),
            Self::UnsupportedVersion(v) => write!(f, "unsupported checkpoint version {v}"),
            Self::Truncated => write!(f, "checkpoint is truncated"),
            Self::TrailingBytes(n) => write!(f, "{n} unexpected trailing bytes"),
            Self::CountMismatch { stored, expected } => {
                write!(f, "parameter count {stored} does not match config ({expected})")
            }
            Self::ConfigMismatch => write!(f, "checkpoint config differs from the requested one"),
            Self::InvalidConfig => write!(f, "checkpoint carries an invalid config"),
        }
    }
}

impl core::error::Error for CheckpointError {}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.buf.len() {
            return Err(CheckpointError::Truncated);
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CheckpointError> {
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = &self.model.config;
        let tensors = self.model.params.tensors();
        let count: usize = tensors.iter().map(|t| t.len()).sum();
        let mut out = Vec::with_capacity(40 + count * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [
            cfg.encoder_layers,
            cfg.decoder_layers,
            cfg.hidden_dim,
            cfg.virtual_points,
            cfg.neighbors,
        ] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&(count as u64).to_le_bytes());
        for t in &tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        match &self.train {
            None => out.push(0),
            Some(ts) => {
                out.push(1);
                out.extend_from_slice(&ts.epoch.to_le_bytes());
                out.extend_from_slice(&ts.adam.step.to_le_bytes());
                for buf in ts.adam.m.iter().chain(ts.adam.v.iter()) {
                    for v in buf {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let config = DesaeConfig {
            encoder_layers: r.u32()? as usize,
            decoder_layers: r.u32()? as usize,
            hidden_dim: r.u32()? as usize,
            virtual_points: r.u32()? as usize,
            neighbors: r.u32()? as usize,
        };
        config
            .validate()
            .map_err(|_| CheckpointError::InvalidConfig)?;
        let stored = r.u64()?;
        // Shape the parameter containers from the config, then overwrite.
        let mut params = Params::init(&config, 0);
        let expected = params.parameter_count() as u64;
        if stored != expected {
            return Err(CheckpointError::CountMismatch { stored, expected });
        }
        for t in params.tensors_mut() {
            let vals = r.f64s(t.len())?;
            t.data.copy_from_slice(&vals);
        }
        let model = DesaeModel { config, params };
        let train = match r.u8()? {
            0 => None,
            _ => {
                let epoch = r.u64()?;
                let step = r.u64()?;
                let lengths = model.params.tensor_lengths();
                let read_set = |r: &mut Reader| -> Result<Vec<Vec<f64>>, CheckpointError> {
                    lengths.iter().map(|&n| r.f64s(n)).collect()
                };
                let m = read_set(&mut r)?;
                let v = read_set(&mut r)?;
                Some(TrainState {
                    epoch,
                    adam: AdamState { step, m, v },
                })
            }
        };
        if r.pos != bytes.len() {
            return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
        }
        Ok(Self { model, train })
    }

    /// Fails unless the stored config equals `expected`.
    pub fn ensure_config(&self, expected: &DesaeConfig) -> Result<(), CheckpointError> {
        if self.model.config != *expected {
            return Err(CheckpointError::ConfigMismatch);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let model = DesaeModel::init(DesaeConfig::tiny(), 3).unwrap();
        let ckpt = Checkpoint { model, train: None };
        let bytes = ckpt.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(ckpt, back);
    }

    #[test]
    fn round_trip_with_train_state() {
        let model = DesaeModel::init(DesaeConfig::tiny(), 3).unwrap();
        let lengths = model.params.tensor_lengths();
        let mut adam = AdamState::new(&lengths);
        adam.step = 17;
        adam.m[0][0] = 0.25;
        adam.v[2][1] = 1e-9;
        let ckpt = Checkpoint {
            model,
            train: Some(TrainState { epoch: 4, adam }),
        };
        let back = Checkpoint::from_bytes(&ckpt.to_bytes()).unwrap();
        assert_eq!(ckpt, back);
    }

    #[test]
    fn rejects_garbage_and_mismatch() {
        assert_eq!(
            Checkpoint::from_bytes(b"nope").unwrap_err(),
            CheckpointError::BadMagic
        );
        let model = DesaeModel::init(DesaeConfig::tiny(), 3).unwrap();
        let ckpt = Checkpoint { model, train: None };
        let mut bytes = ckpt.to_bytes();
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(CheckpointError::Truncated)
        ));
        assert_eq!(
            ckpt.ensure_config(&DesaeConfig::default()).unwrap_err(),
            CheckpointError::ConfigMismatch
        );
    }
}
