//! Command-line surface: one binary exposing the whole pipeline.
//!
//! Exit codes: 0 on success, 1 on a domain error (a one-line
//! `error[E_CODE]: message` goes to stderr), 2 on usage errors (clap).
//! Every run prints its resolved configuration, including the seed where
//! one applies, so outputs are reproducible from the log alone.

use crate::error::{Result, ToolError};
use crate::evalkit::{self, RmsdAtoms};
use crate::manifest::load_pair_manifest;
use crate::pdb::{parse_structure, write_structure, ParseOptions};
use crate::report;
use crate::training;
use clap::{Parser, Subcommand};
use desae_core::desae::Checkpoint;
use desae_core::geometry::{corrupt_structure, extract_features, kabsch_align};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(
    name = "desae",
    version,
    about = "Backbone geometry toolkit and debiasing structure autoencoder"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Extract per-residue dihedrals, bond angles, and bond lengths to CSV.
    Features {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        /// Chain identifier (default: first chain in the file).
        #[arg(long)]
        chain: Option<char>,
        /// Emit angles in degrees instead of radians.
        #[arg(long)]
        degrees: bool,
    },
    /// Compare feature distributions of two structure directories.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Displace one backbone atom of randomly chosen residues onto the
    /// centroid of its three siblings.
    Corrupt {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, default_value_t = 0.10)]
        fraction: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Also write the corrupted (residue, atom) sites as CSV.
        #[arg(long)]
        sites: Option<PathBuf>,
        #[arg(long)]
        chain: Option<char>,
        /// Read per-residue confidence from the B-factor column and carry
        /// it through to the output.
        #[arg(long)]
        plddt_from_bfactor: bool,
    },
    /// Pretrain the autoencoder on the experimental half of a paired
    /// manifest (corrupt → reconstruct).
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// TOML settings file; defaults apply for missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "out", default_value = "run")]
        output: PathBuf,
        /// Resume from a checkpoint (config must match).
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Override the seed from the settings file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run structures through a trained model and write the
    /// reconstructions.
    Debias {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Take predicted structures from a manifest...
        #[arg(long, conflicts_with = "input_dir")]
        manifest: Option<PathBuf>,
        /// ...or every .pdb file under a directory.
        #[arg(long, conflicts_with = "manifest")]
        input_dir: Option<PathBuf>,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Superpose one structure onto another and report the RMSD.
    Align {
        #[arg(long)]
        moving: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Write the aligned moving structure here.
        #[arg(long = "out")]
        output: Option<PathBuf>,
        /// Align on all observed backbone atoms instead of Cα only.
        #[arg(long)]
        all_atoms: bool,
    },
    /// Evaluation reports and sequence metrics.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Subcommand, Debug)]
pub enum EvalCommand {
    /// Paired Cα RMSD distribution over a manifest.
    Rmsd {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        /// Debias predicted structures with this checkpoint first.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Full-backbone RMSD instead of Cα only.
        #[arg(long)]
        all_atoms: bool,
    },
    /// Fraction of matching residues between two sequence files.
    Recovery {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        native: PathBuf,
    },
    /// Perplexity of an L×20 natural-log probability table against a
    /// native sequence.
    Perplexity {
        #[arg(long)]
        log_probs: PathBuf,
        #[arg(long)]
        native: PathBuf,
    },
}

fn print_resolved(what: &str, fields: &[(&str, String)]) {
    let body: Vec<String> = fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("resolved-config: command={what} {}", body.join(" "));
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| ToolError::io(path, e))?;
    Ok(Checkpoint::from_bytes(&bytes)?)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Features {
            input,
            output,
            chain,
            degrees,
        } => {
            print_resolved(
                "features",
                &[
                    ("in", input.display().to_string()),
                    ("out", output.display().to_string()),
                    ("chain", format!("{chain:?}")),
                    ("degrees", degrees.to_string()),
                ],
            );
            let opts = ParseOptions {
                chain,
                plddt_from_bfactor: false,
            };
            let s = parse_structure(&input, &opts)?;
            let table = extract_features(&s);
            report::write_feature_table(&table, &s.sequence, degrees, &output)?;
            println!("wrote {} residues to {}", s.len(), output.display());
            Ok(())
        }
        Command::Compare {
            a,
            b,
            output,
            threads,
        } => {
            print_resolved(
                "compare",
                &[
                    ("a", a.display().to_string()),
                    ("b", b.display().to_string()),
                    ("out", output.display().to_string()),
                    ("threads", threads.to_string()),
                ],
            );
            let files = evalkit::bias_report(&a, &b, &output, threads)?;
            println!("wrote {} report files to {}", files.len(), output.display());
            Ok(())
        }
        Command::Corrupt {
            input,
            output,
            fraction,
            seed,
            sites,
            chain,
            plddt_from_bfactor,
        } => {
            print_resolved(
                "corrupt",
                &[
                    ("in", input.display().to_string()),
                    ("out", output.display().to_string()),
                    ("fraction", fraction.to_string()),
                    ("seed", seed.to_string()),
                    ("chain", format!("{chain:?}")),
                ],
            );
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(ToolError::InvalidArgument(format!(
                    "--fraction must be in (0, 1], got {fraction}"
                )));
            }
            let opts = ParseOptions {
                chain,
                plddt_from_bfactor,
            };
            let s = parse_structure(&input, &opts)?;
            let (corrupted, picked) = corrupt_structure(&s, fraction, seed)?;
            write_structure(&corrupted, &output)?;
            if let Some(sites_path) = sites {
                let mut w = std::io::BufWriter::new(
                    std::fs::File::create(&sites_path).map_err(|e| ToolError::io(&sites_path, e))?,
                );
                writeln!(w, "residue,atom").map_err(|e| ToolError::io(&sites_path, e))?;
                for site in &picked {
                    writeln!(
                        w,
                        "{},{}",
                        site.residue,
                        desae_core::backbone::ATOM_NAMES[site.atom]
                    )
                    .map_err(|e| ToolError::io(&sites_path, e))?;
                }
            }
            println!(
                "corrupted {} of {} residues -> {}",
                picked.len(),
                s.len(),
                output.display()
            );
            Ok(())
        }
        Command::Train {
            manifest,
            config,
            output,
            resume,
            seed,
        } => {
            let settings = match &config {
                Some(path) => crate::config::Settings::load(path)?,
                None => crate::config::Settings::default(),
            };
            let mut train_cfg = settings.train_config();
            if let Some(s) = seed {
                train_cfg.seed = s;
            }
            let model_cfg = settings.model_config();
            print_resolved(
                "train",
                &[
                    ("manifest", manifest.display().to_string()),
                    ("out", output.display().to_string()),
                    ("seed", train_cfg.seed.to_string()),
                    ("epochs", train_cfg.epochs.to_string()),
                    ("lr_init", format!("{:e}", train_cfg.lr_init)),
                    ("batch_size", train_cfg.batch_size.to_string()),
                    ("corruption_fraction", train_cfg.corruption_fraction.to_string()),
                    ("model", format!("{model_cfg:?}")),
                    ("resume", format!("{resume:?}")),
                ],
            );
            let manifest = load_pair_manifest(&manifest)?;
            let outcome =
                training::train(&manifest, &train_cfg, &model_cfg, &output, resume.as_deref())?;
            println!(
                "trained {} epochs; parameter count {}; last checkpoint {:?}",
                outcome.log.len(),
                outcome.checkpoint.model.parameter_count(),
                outcome.last_checkpoint
            );
            Ok(())
        }
        Command::Debias {
            checkpoint,
            manifest,
            input_dir,
            output,
            threads,
        } => {
            print_resolved(
                "debias",
                &[
                    ("checkpoint", checkpoint.display().to_string()),
                    ("manifest", format!("{manifest:?}")),
                    ("input_dir", format!("{input_dir:?}")),
                    ("out", output.display().to_string()),
                    ("threads", threads.to_string()),
                ],
            );
            let ckpt = load_checkpoint(&checkpoint)?;
            let inputs: Vec<(String, desae_core::BackboneStructure)> = match (&manifest, &input_dir)
            {
                (Some(m), None) => {
                    let manifest = load_pair_manifest(m)?;
                    let mut items = Vec::new();
                    for row in &manifest.rows {
                        let s = parse_structure(&row.predicted_path, &ParseOptions::predicted())?;
                        items.push((row.pair_id.clone(), s));
                    }
                    items
                }
                (None, Some(dir)) => {
                    let corpus = evalkit::load_corpus(dir, &ParseOptions::predicted())?;
                    corpus.into_iter().map(|s| (s.id.clone(), s)).collect()
                }
                _ => {
                    return Err(ToolError::InvalidArgument(
                        "debias needs exactly one of --manifest or --input-dir".into(),
                    ))
                }
            };
            let written = training::debias(&ckpt, inputs, &output, threads)?;
            println!("wrote {} debiased structures", written.len());
            Ok(())
        }
        Command::Align {
            moving,
            target,
            output,
            all_atoms,
        } => {
            print_resolved(
                "align",
                &[
                    ("moving", moving.display().to_string()),
                    ("target", target.display().to_string()),
                    ("all_atoms", all_atoms.to_string()),
                ],
            );
            let m = parse_structure(&moving, &ParseOptions::default())?;
            let t = parse_structure(&target, &ParseOptions::default())?;
            if m.len() != t.len() {
                return Err(ToolError::PairLengthMismatch {
                    pair_id: format!("{} vs {}", m.id, t.id),
                    pred: m.len(),
                    exp: t.len(),
                });
            }
            let (pm, pt) = if all_atoms {
                evalkit::shared_backbone_points(&m, &t)
            } else {
                (m.ca_coords(), t.ca_coords())
            };
            let sp = kabsch_align(&pm, &pt, None)?;
            println!("rmsd: {:.6} A over {} atoms", sp.rmsd, pm.len());
            println!("rotation: {:?}", sp.rotation);
            println!("translation: {:?}", sp.translation);
            if let Some(out) = output {
                let aligned = m.transformed(&sp.rotation, &sp.translation);
                write_structure(&aligned, &out)?;
                println!("wrote aligned structure to {}", out.display());
            }
            Ok(())
        }
        Command::Eval(cmd) => run_eval(cmd),
    }
}

fn run_eval(cmd: EvalCommand) -> Result<()> {
    match cmd {
        EvalCommand::Rmsd {
            manifest,
            output,
            checkpoint,
            threads,
            all_atoms,
        } => {
            print_resolved(
                "eval-rmsd",
                &[
                    ("manifest", manifest.display().to_string()),
                    ("out", output.display().to_string()),
                    ("checkpoint", format!("{checkpoint:?}")),
                    ("threads", threads.to_string()),
                    ("all_atoms", all_atoms.to_string()),
                ],
            );
            let manifest = load_pair_manifest(&manifest)?;
            let ckpt = match checkpoint {
                Some(p) => Some(load_checkpoint(&p)?),
                None => None,
            };
            let atoms = if all_atoms {
                RmsdAtoms::Backbone
            } else {
                RmsdAtoms::CaOnly
            };
            let report = evalkit::paired_rmsd_with(&manifest, ckpt.as_ref(), threads, atoms)?;
            evalkit::write_rmsd_report(&report, &output)?;
            let mean =
                report.rows.iter().map(|r| r.rmsd).sum::<f64>() / report.rows.len().max(1) as f64;
            println!("{} pairs, mean rmsd {:.4} A", report.rows.len(), mean);
            Ok(())
        }
        EvalCommand::Recovery { pred, native } => {
            print_resolved(
                "eval-recovery",
                &[
                    ("pred", pred.display().to_string()),
                    ("native", native.display().to_string()),
                ],
            );
            let p = evalkit::read_sequence(&pred)?;
            let n = evalkit::read_sequence(&native)?;
            let r = desae_core::metrics::recovery_rate(&p, &n)?;
            println!("recovery_rate: {r:.6}");
            Ok(())
        }
        EvalCommand::Perplexity { log_probs, native } => {
            print_resolved(
                "eval-perplexity",
                &[
                    ("log_probs", log_probs.display().to_string()),
                    ("native", native.display().to_string()),
                ],
            );
            let lp = evalkit::read_log_probs(&log_probs)?;
            let n = evalkit::read_sequence(&native)?;
            let p = desae_core::metrics::perplexity(&lp, &n)?;
            println!("perplexity: {p:.6}");
            Ok(())
        }
    }
}
