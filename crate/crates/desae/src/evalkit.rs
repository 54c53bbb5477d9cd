//! Downstream evaluation: paired RMSD reports, corpus bias reports, and
//! file-level wrappers for the sequence metrics.

use crate::error::{Result, ToolError};
use crate::manifest::{load_pair, PairManifest};
use crate::parallel::ordered_map;
use crate::pdb::{parse_structure, ParseOptions};
use crate::report;
use desae_core::backbone::BackboneStructure;
use desae_core::desae::Checkpoint;
use desae_core::geometry::{ca_rmsd, extract_features, FeatureTable};
use desae_core::stats::{build_histogram, corpus_compare, BinSpec, Histogram};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Cα RMSD of one manifest pair after superposition.
#[derive(Debug, Clone)]
pub struct PairRmsd {
    pub pair_id: String,
    pub length: usize,
    pub rmsd: f64,
}

#[derive(Debug, Clone)]
pub struct RmsdReport {
    pub rows: Vec<PairRmsd>,
    /// 100 bins over [0, 5] Å; larger values land in `out_of_range`.
    pub histogram: Histogram,
}

/// Which atoms enter the superposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmsdAtoms {
    CaOnly,
    /// All backbone atoms observed in both structures.
    Backbone,
}

/// Backbone atoms observed in both structures, as parallel point lists.
pub fn shared_backbone_points(
    a: &BackboneStructure,
    b: &BackboneStructure,
) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let mut pa = Vec::new();
    let mut pb = Vec::new();
    for i in 0..a.len().min(b.len()) {
        for atom in 0..4 {
            if a.atom_mask[i][atom] && b.atom_mask[i][atom] {
                pa.push(a.coords[i][atom]);
                pb.push(b.coords[i][atom]);
            }
        }
    }
    (pa, pb)
}

/// Kabsch Cα RMSD per manifest pair, optionally debiasing the predicted
/// structure with a checkpoint first. Pairs must have matching lengths.
pub fn paired_rmsd(
    manifest: &PairManifest,
    transform: Option<&Checkpoint>,
    threads: usize,
) -> Result<RmsdReport> {
    paired_rmsd_with(manifest, transform, threads, RmsdAtoms::CaOnly)
}

pub fn paired_rmsd_with(
    manifest: &PairManifest,
    transform: Option<&Checkpoint>,
    threads: usize,
    atoms: RmsdAtoms,
) -> Result<RmsdReport> {
    let rows: Vec<_> = manifest.rows.clone();
    let results: Vec<Result<PairRmsd>> = ordered_map(rows, threads, |row| {
        let (pred, exp) = load_pair(&row)?;
        if pred.len() != exp.len() {
            return Err(ToolError::PairLengthMismatch {
                pair_id: row.pair_id.clone(),
                pred: pred.len(),
                exp: exp.len(),
            });
        }
        let pred = match transform {
            Some(ckpt) => ckpt.model.forward(&pred)?.structure,
            None => pred,
        };
        let rmsd = match atoms {
            RmsdAtoms::CaOnly => ca_rmsd(&pred, &exp)?,
            RmsdAtoms::Backbone => {
                let (pa, pb) = shared_backbone_points(&pred, &exp);
                desae_core::geometry::kabsch_align(&pa, &pb, None)?.rmsd
            }
        };
        Ok(PairRmsd {
            pair_id: row.pair_id.clone(),
            length: exp.len(),
            rmsd,
        })
    });
    let mut rows = Vec::new();
    for r in results {
        rows.push(r?);
    }
    let values: Vec<f64> = rows.iter().map(|r| r.rmsd).collect();
    let histogram = build_histogram(&values, &BinSpec::new(0.0, 5.0, 100))?;
    Ok(RmsdReport { rows, histogram })
}

pub fn write_rmsd_report(report: &RmsdReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| ToolError::io(dir, e))?;
    let path = dir.join("pair_rmsd.csv");
    let mut w =
        std::io::BufWriter::new(std::fs::File::create(&path).map_err(|e| ToolError::io(&path, e))?);
    writeln!(w, "pair_id,length,ca_rmsd").map_err(|e| ToolError::io(&path, e))?;
    for r in &report.rows {
        writeln!(w, "{},{},{:.6}", r.pair_id, r.length, r.rmsd)
            .map_err(|e| ToolError::io(&path, e))?;
    }
    drop(w);
    let path = dir.join("rmsd_hist.csv");
    let mut w =
        std::io::BufWriter::new(std::fs::File::create(&path).map_err(|e| ToolError::io(&path, e))?);
    writeln!(w, "bin_left,bin_right,count,density").map_err(|e| ToolError::io(&path, e))?;
    let h = &report.histogram;
    for b in 0..h.bins() {
        writeln!(
            w,
            "{:.3},{:.3},{},{:.8e}",
            h.bin_edges[b],
            h.bin_edges[b + 1],
            h.counts[b],
            h.density[b]
        )
        .map_err(|e| ToolError::io(&path, e))?;
    }
    Ok(())
}

/// Load every `*.pdb` under a directory (sorted by file name, so reports
/// accumulate deterministically).
pub fn load_corpus(dir: &Path, options: &ParseOptions) -> Result<Vec<BackboneStructure>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| ToolError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "pdb").unwrap_or(false))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(ToolError::InvalidArgument(format!(
            "no .pdb files under {}",
            dir.display()
        )));
    }
    paths
        .into_iter()
        .map(|p| parse_structure(&p, options))
        .collect()
}

pub fn corpus_features(corpus: &[BackboneStructure], threads: usize) -> Vec<FeatureTable> {
    ordered_map(corpus.iter().collect(), threads, extract_features)
}

/// Full bias report between two structure directories: all divergence
/// tables, per-feature histograms, and the Ramachandran grids (a, b, and
/// the density difference overlay). Returns the file inventory.
pub fn bias_report(
    corpus_a: &Path,
    corpus_b: &Path,
    out_dir: &Path,
    threads: usize,
) -> Result<Vec<PathBuf>> {
    let a = load_corpus(corpus_a, &ParseOptions::default())?;
    let b = load_corpus(corpus_b, &ParseOptions::default())?;
    let fa = corpus_features(&a, threads);
    let fb = corpus_features(&b, threads);
    let cmp = corpus_compare(&fa, &fb)?;
    for (feature, reason) in &cmp.skipped {
        eprintln!("warning: feature {feature} skipped: {reason}");
    }
    report::write_comparison_report(&cmp, out_dir)
}

/// Read a plain-text sequence file (letters only; whitespace ignored).
pub fn read_sequence(path: &Path) -> Result<Vec<char>> {
    let text = std::fs::read_to_string(path).map_err(|e| ToolError::io(path, e))?;
    let seq: Vec<char> = text.chars().filter(|c| c.is_ascii_alphabetic()).collect();
    if seq.is_empty() {
        return Err(ToolError::InvalidArgument(format!(
            "{}: no sequence letters found",
            path.display()
        )));
    }
    Ok(seq.into_iter().map(|c| c.to_ascii_uppercase()).collect())
}

/// Read an L×20 table of natural-log probabilities (CSV, no header).
pub fn read_log_probs(path: &Path) -> Result<Vec<[f64; 20]>> {
    let text = std::fs::read_to_string(path).map_err(|e| ToolError::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 20 {
            return Err(ToolError::InvalidArgument(format!(
                "{}:{}: expected 20 columns, found {}",
                path.display(),
                i + 1,
                cells.len()
            )));
        }
        let mut row = [0.0f64; 20];
        for (j, cell) in cells.iter().enumerate() {
            row[j] = cell.trim().parse().map_err(|_| {
                ToolError::InvalidArgument(format!(
                    "{}:{}: bad number {cell:?}",
                    path.display(),
                    i + 1
                ))
            })?;
        }
        rows.push(row);
    }
    Ok(rows)
}
