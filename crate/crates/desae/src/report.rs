//! Delimited-table and grid-file writers for comparison reports.

use crate::error::{Result, ToolError};
use desae_core::geometry::FeatureTable;
use desae_core::stats::{CorpusComparison, Rama2d};
use std::io::Write;
use std::path::Path;

/// Per-residue feature CSV; masked entries are empty cells. Angles are
/// radians unless `degrees` is set.
pub fn write_feature_table(
    table: &FeatureTable,
    sequence: &[char],
    degrees: bool,
    path: &Path,
) -> Result<()> {
    let mut w = create(path)?;
    writeln!(
        w,
        "index,residue,phi,psi,omega,alpha,beta,gamma,ca_n,c_ca,o_c,n_next_c"
    )
    .map_err(|e| ToolError::io(path, e))?;
    let scale = if degrees { 180.0 / std::f64::consts::PI } else { 1.0 };
    let angle = |v: f64, m: bool| if m { format!("{:.6}", v * scale) } else { String::new() };
    let length = |v: f64, m: bool| if m { format!("{v:.4}") } else { String::new() };
    for i in 0..table.len() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            i,
            sequence[i],
            angle(table.phi[i], table.phi_mask[i]),
            angle(table.psi[i], table.psi_mask[i]),
            angle(table.omega[i], table.omega_mask[i]),
            angle(table.alpha[i], table.alpha_mask[i]),
            angle(table.beta[i], table.beta_mask[i]),
            angle(table.gamma[i], table.gamma_mask[i]),
            length(table.bond_lengths[i][0], table.bond_mask[i][0]),
            length(table.bond_lengths[i][1], table.bond_mask[i][1]),
            length(table.bond_lengths[i][2], table.bond_mask[i][2]),
            length(table.bond_lengths[i][3], table.bond_mask[i][3]),
        )
        .map_err(|e| ToolError::io(path, e))?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| ToolError::io(path, e))?;
    Ok(std::io::BufWriter::new(f))
}

/// divergences.csv: one row per compared feature with all four metrics.
pub fn write_divergences(cmp: &CorpusComparison, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "feature,kl_nats,wasserstein,euclidean_counts,cosine_counts")
        .map_err(|e| ToolError::io(path, e))?;
    for f in &cmp.features {
        writeln!(
            w,
            "{},{:.12e},{:.12e},{:.12e},{:.12}",
            f.feature, f.kl, f.wasserstein, f.euclidean, f.cosine
        )
        .map_err(|e| ToolError::io(path, e))?;
    }
    Ok(())
}

/// summary_stats.csv: mean/variance/count per feature and corpus.
pub fn write_summary_stats(cmp: &CorpusComparison, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "feature,corpus,mean,variance,n").map_err(|e| ToolError::io(path, e))?;
    for f in &cmp.features {
        for (corpus, s) in [("a", &f.stats_a), ("b", &f.stats_b)] {
            writeln!(
                w,
                "{},{},{:.10},{:.6e},{}",
                f.feature, corpus, s.mean, s.variance, s.n
            )
            .map_err(|e| ToolError::io(path, e))?;
        }
    }
    Ok(())
}

/// records.txt: machine-readable `feature=<f> metric=<m> value=<v>` lines,
/// one per feature-metric pair.
pub fn write_records(cmp: &CorpusComparison, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    for f in &cmp.features {
        for (metric, value) in [
            ("kl_divergence", f.kl),
            ("wasserstein", f.wasserstein),
            ("euclidean_distance", f.euclidean),
            ("cosine_similarity", f.cosine),
        ] {
            writeln!(w, "feature={} metric={} value={:.12e}", f.feature, metric, value)
                .map_err(|e| ToolError::io(path, e))?;
        }
    }
    for (feature, reason) in &cmp.skipped {
        writeln!(w, "feature={feature} metric=skipped reason={reason:?}")
            .map_err(|e| ToolError::io(path, e))?;
    }
    Ok(())
}

/// hist_<feature>.csv: per-bin densities of both corpora.
pub fn write_histograms(cmp: &CorpusComparison, dir: &Path) -> Result<()> {
    for f in &cmp.features {
        let path = dir.join(format!("hist_{}.csv", f.feature));
        let mut w = create(&path)?;
        writeln!(w, "bin_left,bin_right,density_a,density_b,count_a,count_b")
            .map_err(|e| ToolError::io(&path, e))?;
        for b in 0..f.hist_a.bins() {
            writeln!(
                w,
                "{:.8},{:.8},{:.10e},{:.10e},{},{}",
                f.hist_a.bin_edges[b],
                f.hist_a.bin_edges[b + 1],
                f.hist_a.density[b],
                f.hist_b.density[b],
                f.hist_a.counts[b],
                f.hist_b.counts[b],
            )
            .map_err(|e| ToolError::io(&path, e))?;
        }
    }
    Ok(())
}

/// Dense φ×ψ grid, row-major with φ as the row index: a header line
/// describing the layout, then one comma-delimited row of values per φ
/// bin.
pub fn write_rama_grid(values: &[f64], bins: usize, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(
        w,
        "# phi_bins={bins} psi_bins={bins} range=(-pi,pi] layout=row-major rows=phi cols=psi"
    )
    .map_err(|e| ToolError::io(path, e))?;
    for row in 0..bins {
        let cells: Vec<String> = (0..bins)
            .map(|col| format!("{}", values[row * bins + col]))
            .collect();
        writeln!(w, "{}", cells.join(",")).map_err(|e| ToolError::io(path, e))?;
    }
    Ok(())
}

pub fn rama_counts_as_f64(r: &Rama2d) -> Vec<f64> {
    r.counts.iter().map(|&c| c as f64).collect()
}

/// Write the full comparison report directory; returns the file inventory.
pub fn write_comparison_report(cmp: &CorpusComparison, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| ToolError::io(dir, e))?;
    let mut inventory = Vec::new();

    let p = dir.join("divergences.csv");
    write_divergences(cmp, &p)?;
    inventory.push(p);
    let p = dir.join("summary_stats.csv");
    write_summary_stats(cmp, &p)?;
    inventory.push(p);
    let p = dir.join("records.txt");
    write_records(cmp, &p)?;
    inventory.push(p);
    write_histograms(cmp, dir)?;
    for f in &cmp.features {
        inventory.push(dir.join(format!("hist_{}.csv", f.feature)));
    }
    let p = dir.join("rama_a.csv");
    write_rama_grid(&rama_counts_as_f64(&cmp.rama_a), cmp.rama_a.bins, &p)?;
    inventory.push(p);
    let p = dir.join("rama_b.csv");
    write_rama_grid(&rama_counts_as_f64(&cmp.rama_b), cmp.rama_b.bins, &p)?;
    inventory.push(p);
    let da = cmp.rama_a.densities();
    let db = cmp.rama_b.densities();
    let overlay: Vec<f64> = da.iter().zip(&db).map(|(a, b)| a - b).collect();
    let p = dir.join("rama_overlay.csv");
    write_rama_grid(&overlay, cmp.rama_a.bins, &p)?;
    inventory.push(p);
    Ok(inventory)
}
