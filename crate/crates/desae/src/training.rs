//! Pretraining loop: corrupt → reconstruct → structure-consistency loss,
//! with cosine learning-rate annealing, gradient clipping, Adam, and
//! checkpointing (optimizer state included, for exact resume). Corruption
//! is re-drawn every epoch from (seed, epoch, pair id), so epoch e is
//! reproducible from checkpoint e-1 alone.

use crate::error::{Result, ToolError};
use crate::manifest::{filter_pair, load_pair, FilterDecision, PairManifest, Split};
use crate::parallel::ordered_map;
use crate::pdb::write_structure;
use desae_core::autodiff::{adam_step, AdamConfig, AdamState, Graph};
use desae_core::backbone::BackboneStructure;
use desae_core::desae::{Checkpoint, DesaeConfig, DesaeModel, TrainState};
use desae_core::geometry::corrupt_structure;
use desae_core::loss::{composite_loss_graph_with, composite_loss_with, LossBreakdown};
use desae_core::rng::{derive_seed, label};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Training hyperparameters; defaults follow the reference recipe
/// (60 epochs, lr 1e-3 cosine-annealed, batch 16, 10% corruption).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr_init: f64,
    pub lr_min: f64,
    pub batch_size: usize,
    pub corruption_fraction: f64,
    pub seed: u64,
    /// Save a numbered checkpoint every this many epochs.
    pub checkpoint_every: usize,
    /// Global gradient-norm clip.
    pub grad_clip: f64,
    /// K nearest neighbors in the pair/neighbor loss terms.
    pub loss_neighbors: usize,
    /// Fragment size c in the fragment/pair loss terms.
    pub fragment_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            lr_init: 1e-3,
            lr_min: 1e-6,
            batch_size: 16,
            corruption_fraction: 0.10,
            seed: 42,
            checkpoint_every: 10,
            grad_clip: 1.0,
            loss_neighbors: 30,
            fragment_size: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.checkpoint_every == 0 {
            return Err(ToolError::InvalidArgument(
                "epochs, batch_size, and checkpoint_every must be positive".into(),
            ));
        }
        if !(self.corruption_fraction > 0.0 && self.corruption_fraction <= 1.0) {
            return Err(ToolError::InvalidArgument(format!(
                "corruption_fraction must be in (0, 1], got {}",
                self.corruption_fraction
            )));
        }
        if self.lr_init <= 0.0 || self.lr_min < 0.0 || self.grad_clip <= 0.0 {
            return Err(ToolError::InvalidArgument(
                "learning rates and grad_clip must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Cosine annealing with the default floor of 1e-6.
pub fn lr_schedule(step: usize, total_steps: usize, lr_init: f64) -> f64 {
    lr_schedule_with(step, total_steps, lr_init, 1e-6)
}

/// lr(step) = lr_min + ½ (lr_init − lr_min)(1 + cos(π step / total)).
pub fn lr_schedule_with(step: usize, total_steps: usize, lr_init: f64, lr_min: f64) -> f64 {
    let t = if total_steps == 0 {
        0.0
    } else {
        (step.min(total_steps)) as f64 / total_steps as f64
    };
    lr_min + 0.5 * (lr_init - lr_min) * (1.0 + (std::f64::consts::PI * t).cos())
}

/// One training-log row.
#[derive(Debug, Clone, Copy)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss: LossBreakdown,
    pub val_total: Option<f64>,
    pub seconds: f64,
}

impl EpochLog {
    pub const HEADER: &'static str =
        "epoch,lr,global,fragment,pair,neighbor,distance,total,val_total,seconds";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:.8e},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{:.3}",
            self.epoch,
            self.lr,
            self.loss.global,
            self.loss.fragment,
            self.loss.pair,
            self.loss.neighbor,
            self.loss.distance,
            self.loss.total,
            self.val_total
                .map(|v| format!("{v:.6}"))
                .unwrap_or_else(|| "".into()),
            self.seconds
        )
    }
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    pub last_checkpoint: Option<PathBuf>,
    pub best_checkpoint: Option<PathBuf>,
}

/// Load, curate, and train from a manifest's train/val splits.
pub fn train(
    manifest: &PairManifest,
    cfg: &TrainConfig,
    model_cfg: &DesaeConfig,
    out_dir: &Path,
    resume: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train_rows = manifest.split_rows(Split::Train);
    if train_rows.is_empty() {
        return Err(ToolError::EmptySplit {
            path: manifest.path.clone(),
        });
    }
    let mut items = Vec::new();
    for row in &train_rows {
        let (pred, exp) = load_pair(row)?;
        match filter_pair(&pred, &exp, crate::manifest::DEFAULT_MIN_PLDDT)? {
            FilterDecision::Accept => {}
            FilterDecision::Reject(reason) => {
                eprintln!("skipping train pair {}: {reason}", row.pair_id);
                continue;
            }
        }
        if !exp.fully_observed() {
            eprintln!(
                "skipping train pair {}: experimental structure has missing atoms",
                row.pair_id
            );
            continue;
        }
        items.push((row.pair_id.clone(), exp));
    }
    if items.is_empty() {
        return Err(ToolError::EmptySplit {
            path: manifest.path.clone(),
        });
    }
    let mut val_items = Vec::new();
    for row in manifest.split_rows(Split::Val) {
        let (_, exp) = load_pair(row)?;
        if exp.fully_observed() {
            val_items.push((row.pair_id.clone(), exp));
        }
    }
    let resume_ckpt = match resume {
        None => None,
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| ToolError::io(path, e))?;
            let ckpt = Checkpoint::from_bytes(&bytes)?;
            ckpt.ensure_config(model_cfg)?;
            Some(ckpt)
        }
    };
    train_on_structures(&items, &val_items, cfg, model_cfg, Some(out_dir), resume_ckpt)
}

/// Core loop over already-loaded ground-truth structures. With an output
/// directory, writes `train_log.csv`, `last.ckpt` (after every completed
/// epoch), numbered checkpoints, and `best.ckpt` on validation
/// improvement.
pub fn train_on_structures(
    items: &[(String, BackboneStructure)],
    val_items: &[(String, BackboneStructure)],
    cfg: &TrainConfig,
    model_cfg: &DesaeConfig,
    out_dir: Option<&Path>,
    resume: Option<Checkpoint>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| ToolError::io(dir, e))?;
    }
    let (mut model, mut adam, start_epoch) = match resume {
        Some(ckpt) => {
            ckpt.ensure_config(model_cfg)?;
            let lengths = ckpt.model.params.tensor_lengths();
            match ckpt.train {
                Some(ts) => (ckpt.model, ts.adam, ts.epoch as usize),
                None => (ckpt.model, AdamState::new(&lengths), 0),
            }
        }
        None => {
            let model = DesaeModel::init(*model_cfg, cfg.seed)?;
            let lengths = model.params.tensor_lengths();
            (model, AdamState::new(&lengths), 0)
        }
    };
    let adam_cfg = AdamConfig::default();
    let batches_per_epoch = items.len().div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * batches_per_epoch;
    let mut global_step = start_epoch * batches_per_epoch;

    let lengths = model.params.tensor_lengths();
    let mut log_rows: Vec<EpochLog> = Vec::new();
    let last_path = out_dir.map(|d| d.join("last.ckpt"));
    let best_path = out_dir.map(|d| d.join("best.ckpt"));
    let mut best_val = f64::INFINITY;
    let mut wrote_best = false;

    let log_file = match out_dir {
        Some(dir) => {
            let path = dir.join("train_log.csv");
            let fresh = start_epoch == 0 || !path.exists();
            let mut f = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|e| ToolError::io(&path, e))?;
            if fresh {
                use std::io::Write;
                writeln!(f, "{}", EpochLog::HEADER).map_err(|e| ToolError::io(&path, e))?;
            }
            Some((f, path))
        }
        None => None,
    };
    let mut log_file = log_file;

    for epoch in start_epoch..cfg.epochs {
        let started = Instant::now();
        let mut sums = LossBreakdown::default();
        let mut lr = cfg.lr_init;
        for batch in items.chunks(cfg.batch_size) {
            let mut grads: Vec<Vec<f64>> = lengths.iter().map(|&n| vec![0.0; n]).collect();
            let weight = 1.0 / batch.len() as f64;
            for (pair_id, target) in batch {
                let item_seed = derive_seed(cfg.seed, &[epoch as u64, label(pair_id)]);
                let (corrupted, _) =
                    corrupt_structure(target, cfg.corruption_fraction, item_seed)?;
                let mut g = Graph::new();
                g.set_check_finite(true);
                let run = (|| -> Result<LossBreakdown> {
                    let fwd = model.build_forward(&mut g, &corrupted, true)?;
                    let lg = composite_loss_graph_with(
                        &mut g,
                        &fwd.layer_coords,
                        target,
                        cfg.loss_neighbors,
                        cfg.fragment_size,
                    )?;
                    let values = lg.values(&g);
                    if !values.total.is_finite() {
                        return Err(ToolError::NonFiniteLoss {
                            epoch,
                            kept: last_path.clone().unwrap_or_else(|| "-".into()),
                        });
                    }
                    g.backward(lg.total)?;
                    for (slot, &id) in grads.iter_mut().zip(&fwd.param_ids) {
                        if let Some(grad) = g.grad(id) {
                            for (acc, v) in slot.iter_mut().zip(grad) {
                                *acc += weight * v;
                            }
                        }
                    }
                    Ok(values)
                })();
                let values = run.map_err(|e| match e {
                    ToolError::Autodiff(desae_core::autodiff::AdError::NonFinite { .. })
                    | ToolError::Model(desae_core::desae::DesaeError::Autodiff(
                        desae_core::autodiff::AdError::NonFinite { .. },
                    )) => ToolError::NonFiniteLoss {
                        epoch,
                        kept: last_path.clone().unwrap_or_else(|| "-".into()),
                    },
                    other => other,
                })?;
                sums.global += values.global;
                sums.fragment += values.fragment;
                sums.pair += values.pair;
                sums.neighbor += values.neighbor;
                sums.distance += values.distance;
                sums.total += values.total;
            }
            // Global gradient-norm clip.
            let norm: f64 = grads
                .iter()
                .flat_map(|g| g.iter())
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            if norm > cfg.grad_clip {
                let scale = cfg.grad_clip / norm;
                for g in grads.iter_mut() {
                    for v in g.iter_mut() {
                        *v *= scale;
                    }
                }
            }
            lr = lr_schedule_with(global_step, total_steps, cfg.lr_init, cfg.lr_min);
            let mut tensors = model.params.tensors_mut();
            let mut param_slices: Vec<&mut [f64]> = tensors
                .iter_mut()
                .map(|t| t.data.as_mut_slice())
                .collect();
            let grad_slices: Vec<&[f64]> = grads.iter().map(|g| g.as_slice()).collect();
            adam_step(&mut param_slices, &grad_slices, &mut adam, lr, &adam_cfg)
                .map_err(|e| ToolError::InvalidArgument(e.to_string()))?;
            global_step += 1;
        }

        let scale = 1.0 / items.len() as f64;
        let loss = LossBreakdown {
            global: sums.global * scale,
            fragment: sums.fragment * scale,
            pair: sums.pair * scale,
            neighbor: sums.neighbor * scale,
            distance: sums.distance * scale,
            total: sums.total * scale,
        };
        let val_total = if val_items.is_empty() {
            None
        } else {
            Some(validation_loss(&model, val_items, cfg, epoch)?)
        };
        let row = EpochLog {
            epoch,
            lr,
            loss,
            val_total,
            seconds: started.elapsed().as_secs_f64(),
        };
        if let Some((f, path)) = log_file.as_mut() {
            use std::io::Write;
            writeln!(f, "{}", row.to_csv_row()).map_err(|e| ToolError::io(&*path, e))?;
        }
        println!(
            "epoch {:>4}  lr {:.3e}  total {:.5}  (g {:.4} f {:.4} p {:.4} n {:.4} d {:.4}){}  {:.1}s",
            row.epoch,
            row.lr,
            row.loss.total,
            row.loss.global,
            row.loss.fragment,
            row.loss.pair,
            row.loss.neighbor,
            row.loss.distance,
            row.val_total
                .map(|v| format!("  val {v:.5}"))
                .unwrap_or_default(),
            row.seconds
        );
        log_rows.push(row);

        // Checkpoints only after the epoch completed with finite losses.
        let snapshot = Checkpoint {
            model: model.clone(),
            train: Some(TrainState {
                epoch: (epoch + 1) as u64,
                adam: adam.clone(),
            }),
        };
        if let Some(dir) = out_dir {
            let bytes = snapshot.to_bytes();
            write_atomically(&last_path.clone().unwrap(), &bytes)?;
            if (epoch + 1) % cfg.checkpoint_every == 0 {
                write_atomically(&dir.join(format!("epoch_{:04}.ckpt", epoch + 1)), &bytes)?;
            }
            if let Some(v) = val_total {
                if v < best_val {
                    best_val = v;
                    write_atomically(best_path.as_ref().unwrap(), &bytes)?;
                    wrote_best = true;
                }
            }
        }
    }

    let final_ckpt = Checkpoint {
        model,
        train: Some(TrainState {
            epoch: cfg.epochs as u64,
            adam,
        }),
    };
    Ok(TrainOutcome {
        checkpoint: final_ckpt,
        log: log_rows,
        last_checkpoint: last_path,
        best_checkpoint: if wrote_best { best_path } else { None },
    })
}

/// Mean composite loss on freshly corrupted validation structures, with a
/// validation-only seed stream.
fn validation_loss(
    model: &DesaeModel,
    val_items: &[(String, BackboneStructure)],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (pair_id, target) in val_items {
        let seed = derive_seed(cfg.seed ^ label("validation"), &[epoch as u64, label(pair_id)]);
        let (corrupted, _) = corrupt_structure(target, cfg.corruption_fraction, seed)?;
        let out = model.forward(&corrupted)?;
        let b = composite_loss_with(
            &out.layer_coords,
            &target.coords,
            cfg.loss_neighbors,
            cfg.fragment_size,
        )?;
        total += b.total;
    }
    Ok(total / val_items.len() as f64)
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| ToolError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| ToolError::io(path, e))
}

/// Run structures through a trained model (no corruption) and write the
/// reconstructed files; returns (input id, output path, Cα displacement).
pub fn debias(
    ckpt: &Checkpoint,
    inputs: Vec<(String, BackboneStructure)>,
    out_dir: &Path,
    threads: usize,
) -> Result<Vec<(String, PathBuf)>> {
    std::fs::create_dir_all(out_dir).map_err(|e| ToolError::io(out_dir, e))?;
    let started = Instant::now();
    let n = inputs.len();
    let model = &ckpt.model;
    let results: Vec<Result<(String, PathBuf)>> = ordered_map(inputs, threads, |(id, s)| {
        let out = model.forward(&s)?;
        let path = out_dir.join(format!("{id}.pdb"));
        write_structure(&out.structure, &path)?;
        Ok((id, path))
    });
    let mut out = Vec::with_capacity(n);
    for r in results {
        out.push(r?);
    }
    let secs = started.elapsed().as_secs_f64().max(1e-9);
    println!(
        "debiased {n} structures in {secs:.2}s ({:.1} structures/s)",
        n as f64 / secs
    );
    Ok(out)
}
