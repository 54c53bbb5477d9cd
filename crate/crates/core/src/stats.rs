//! Distribution statistics for corpus-vs-corpus bias characterization.
//!
//! Builds binned distributions of backbone features and compares two
//! corpora with KL divergence, 1-D Wasserstein distance, Euclidean
//! distance, and cosine similarity. KL and Wasserstein operate on
//! densities; Euclidean and cosine operate on raw bin counts, where the
//! magnitudes are meaningful.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
// Needed for f64 math in pure no_std builds; redundant when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::FeatureTable;

/// Additive smoothing for KL so empty disallowed-region bins stay finite.
const KL_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatsError {
    EmptySampleSet,
    BinMismatch,
    ZeroVector,
    EmptyCorpus { which: &'static str },
}

impl core::fmt::Display for StatsError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::EmptySampleSet => write!(f, "no finite in-range samples"),
            Self::BinMismatch => write!(f, "histograms have different bin edges"),
            Self::ZeroVector => write!(f, "cosine similarity of an all-zero count vector"),
            Self::EmptyCorpus { which } => write!(f, "corpus {which} is empty"),
        }
    }
}

impl core::error::Error for StatsError {}

/// Uniform binning over [min, max].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSpec {
    pub min: f64,
    pub max: f64,
    pub bins: usize,
}

impl BinSpec {
    pub fn new(min: f64, max: f64, bins: usize) -> Self {
        assert!(max > min && bins > 0);
        Self { min, max, bins }
    }

    /// 360 uniform bins over (-π, π] for angle features.
    pub fn angles() -> Self {
        Self::new(-core::f64::consts::PI, core::f64::consts::PI, 360)
    }

    /// 250 uniform bins over [1.1, 1.6] Å for backbone bond lengths.
    pub fn bond_lengths() -> Self {
        Self::new(1.1, 1.6, 250)
    }

    pub fn width(&self) -> f64 {
        (self.max - self.min) / self.bins as f64
    }

    fn index(&self, x: f64) -> Option<usize> {
        if !x.is_finite() || x < self.min || x > self.max {
            return None;
        }
        let i = ((x - self.min) / self.width()) as usize;
        Some(i.min(self.bins - 1))
    }
}

/// A binned, normalized 1-D distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// bins + 1 strictly increasing edges.
    pub bin_edges: Vec<f64>,
    /// Raw per-bin counts.
    pub counts: Vec<u64>,
    /// Normalized to sum to 1 over in-range samples.
    pub density: Vec<f64>,
    /// In-range sample count.
    pub count: u64,
    /// Samples outside [min, max] (or non-finite), reported but not binned.
    pub out_of_range: u64,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.bin_edges.windows(2).map(|w| w[1] - w[0])
    }

    fn same_edges(&self, other: &Self) -> bool {
        self.bin_edges == other.bin_edges
    }
}

/// Bin samples under `spec`; out-of-range samples are counted, not binned.
pub fn build_histogram(samples: &[f64], spec: &BinSpec) -> Result<Histogram, StatsError> {
    let mut counts = vec![0u64; spec.bins];
    let mut out_of_range = 0u64;
    for &x in samples {
        match spec.index(x) {
            Some(i) => counts[i] += 1,
            None => out_of_range += 1,
        }
    }
    let count: u64 = counts.iter().sum();
    if count == 0 {
        return Err(StatsError::EmptySampleSet);
    }
    let density = counts.iter().map(|&c| c as f64 / count as f64).collect();
    let bin_edges = (0..=spec.bins)
        .map(|i| spec.min + spec.width() * i as f64)
        .collect();
    Ok(Histogram {
        bin_edges,
        counts,
        density,
        count,
        out_of_range,
    })
}

/// Mean and population variance (divide by n).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub mean: f64,
    pub variance: f64,
    pub n: usize,
}

pub fn summarize(samples: &[f64]) -> Result<SummaryStats, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptySampleSet);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let variance = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok(SummaryStats {
        mean,
        variance,
        n: samples.len(),
    })
}

/// KL(p ‖ q) in nats, with ε-smoothing (add ε per bin, renormalize) so
/// zero bins in q stay finite. Identical histograms give exactly 0.
pub fn kl_divergence(p: &Histogram, q: &Histogram) -> Result<f64, StatsError> {
    if !p.same_edges(q) {
        return Err(StatsError::BinMismatch);
    }
    let b = p.bins() as f64;
    let z = 1.0 + b * KL_EPSILON;
    let mut kl = 0.0;
    for (pb, qb) in p.density.iter().zip(&q.density) {
        let ps = (pb + KL_EPSILON) / z;
        let qs = (qb + KL_EPSILON) / z;
        if pb == qb {
            continue; // ln(1) = 0, skip to keep the identity exact
        }
        kl += ps * (ps / qs).ln();
    }
    Ok(kl.max(0.0))
}

/// 1-D Wasserstein distance: Σ_b |CDF_p(b) - CDF_q(b)| · width_b.
pub fn wasserstein_1d(p: &Histogram, q: &Histogram) -> Result<f64, StatsError> {
    if !p.same_edges(q) {
        return Err(StatsError::BinMismatch);
    }
    let mut cdf_p = 0.0;
    let mut cdf_q = 0.0;
    let mut w = 0.0;
    for ((dp, dq), width) in p.density.iter().zip(&q.density).zip(p.widths()) {
        cdf_p += dp;
        cdf_q += dq;
        w += (cdf_p - cdf_q).abs() * width;
    }
    Ok(w)
}

/// Euclidean distance between the raw bin-count vectors.
pub fn euclidean_distance(p: &Histogram, q: &Histogram) -> Result<f64, StatsError> {
    if !p.same_edges(q) {
        return Err(StatsError::BinMismatch);
    }
    let ss: f64 = p
        .counts
        .iter()
        .zip(&q.counts)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(ss.sqrt())
}

/// Cosine similarity of the raw bin-count vectors.
pub fn cosine_similarity(p: &Histogram, q: &Histogram) -> Result<f64, StatsError> {
    if !p.same_edges(q) {
        return Err(StatsError::BinMismatch);
    }
    let dot: f64 = p
        .counts
        .iter()
        .zip(&q.counts)
        .map(|(&a, &b)| a as f64 * b as f64)
        .sum();
    let np: f64 = p.counts.iter().map(|&a| (a as f64) * (a as f64)).sum::<f64>().sqrt();
    let nq: f64 = q.counts.iter().map(|&a| (a as f64) * (a as f64)).sum::<f64>().sqrt();
    if np == 0.0 || nq == 0.0 {
        return Err(StatsError::ZeroVector);
    }
    if p.counts == q.counts {
        return Ok(1.0); // keep the identity exact despite sqrt rounding
    }
    Ok((dot / (np * nq)).clamp(-1.0, 1.0))
}

/// Joint (φ, ψ) counts on a square grid over (-π, π]², row-major with φ as
/// the row index.
#[derive(Debug, Clone, PartialEq)]
pub struct Rama2d {
    pub bins: usize,
    pub counts: Vec<u64>,
    pub count: u64,
}

impl Rama2d {
    pub fn densities(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

pub fn rama_histogram(pairs: &[(f64, f64)], bins: usize) -> Rama2d {
    let spec = BinSpec::new(-core::f64::consts::PI, core::f64::consts::PI, bins);
    let mut counts = vec![0u64; bins * bins];
    let mut count = 0u64;
    for &(phi, psi) in pairs {
        if let (Some(i), Some(j)) = (spec.index(phi), spec.index(psi)) {
            counts[i * bins + j] += 1;
            count += 1;
        }
    }
    Rama2d { bins, counts, count }
}

/// The ten compared features, in report order.
pub const FEATURES: [(&str, FeatureKind); 10] = [
    ("phi", FeatureKind::Angle),
    ("psi", FeatureKind::Angle),
    ("omega", FeatureKind::Angle),
    ("alpha", FeatureKind::Angle),
    ("beta", FeatureKind::Angle),
    ("gamma", FeatureKind::Angle),
    ("ca_n", FeatureKind::BondLength),
    ("c_ca", FeatureKind::BondLength),
    ("o_c", FeatureKind::BondLength),
    ("n_next_c", FeatureKind::BondLength),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Angle,
    BondLength,
}

impl FeatureKind {
    pub fn bins(&self) -> BinSpec {
        match self {
            Self::Angle => BinSpec::angles(),
            Self::BondLength => BinSpec::bond_lengths(),
        }
    }
}

/// All divergence metrics for one feature.
#[derive(Debug, Clone)]
pub struct FeatureComparison {
    pub feature: &'static str,
    pub hist_a: Histogram,
    pub hist_b: Histogram,
    pub stats_a: SummaryStats,
    pub stats_b: SummaryStats,
    pub kl: f64,
    pub wasserstein: f64,
    pub euclidean: f64,
    pub cosine: f64,
}

/// Comparison of two corpora over all features, plus Ramachandran grids.
#[derive(Debug, Clone)]
pub struct CorpusComparison {
    pub features: Vec<FeatureComparison>,
    /// (feature, reason) for features without samples on one side.
    pub skipped: Vec<(&'static str, String)>,
    pub rama_a: Rama2d,
    pub rama_b: Rama2d,
}

fn feature_samples(tables: &[FeatureTable], name: &str, kind: FeatureKind) -> Vec<f64> {
    let mut out = Vec::new();
    for t in tables {
        match kind {
            FeatureKind::Angle => out.extend(t.angle_samples(name)),
            FeatureKind::BondLength => out.extend(t.bond_samples(name)),
        }
    }
    out
}

/// Compare feature distributions of two corpora. Tables are consumed in
/// the order given, so callers control accumulation order (sort by id for
/// reproducible reports). Features with no valid samples on either side
/// are skipped with a reason instead of failing the run.
pub fn corpus_compare(
    a: &[FeatureTable],
    b: &[FeatureTable],
) -> Result<CorpusComparison, StatsError> {
    if a.is_empty() {
        return Err(StatsError::EmptyCorpus { which: "a" });
    }
    if b.is_empty() {
        return Err(StatsError::EmptyCorpus { which: "b" });
    }
    let mut features = Vec::new();
    let mut skipped = Vec::new();
    for (name, kind) in FEATURES {
        let sa = feature_samples(a, name, kind);
        let sb = feature_samples(b, name, kind);
        let spec = kind.bins();
        let (ha, hb) = match (build_histogram(&sa, &spec), build_histogram(&sb, &spec)) {
            (Ok(ha), Ok(hb)) => (ha, hb),
            (Err(_), _) => {
                skipped.push((name, String::from("no valid samples in corpus a")));
                continue;
            }
            (_, Err(_)) => {
                skipped.push((name, String::from("no valid samples in corpus b")));
                continue;
            }
        };
        features.push(FeatureComparison {
            feature: name,
            kl: kl_divergence(&ha, &hb)?,
            wasserstein: wasserstein_1d(&ha, &hb)?,
            euclidean: euclidean_distance(&ha, &hb)?,
            cosine: cosine_similarity(&ha, &hb)?,
            stats_a: summarize(&sa)?,
            stats_b: summarize(&sb)?,
            hist_a: ha,
            hist_b: hb,
        });
    }
    let pairs_of = |tables: &[FeatureTable]| {
        let mut pairs = Vec::new();
        for t in tables {
            pairs.extend(t.phi_psi_pairs());
        }
        pairs
    };
    Ok(CorpusComparison {
        features,
        skipped,
        rama_a: rama_histogram(&pairs_of(a), 360),
        rama_b: rama_histogram(&pairs_of(b), 360),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_single_bin() {
        let h = build_histogram(&[0.5], &BinSpec::new(0.0, 1.0, 1)).unwrap();
        assert_eq!(h.density, vec![1.0]);
        assert_eq!(h.count, 1);
    }

    #[test]
    fn constant_samples_one_bin() {
        let h = build_histogram(&[0.37; 1000], &BinSpec::new(0.0, 1.0, 10)).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.counts[3], 1000);
    }

    #[test]
    fn uniform_grid_uniform_density() {
        // 1000 samples on a grid that puts 100 in each of 10 bins.
        let samples: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let h = build_histogram(&samples, &BinSpec::new(0.0, 1.0, 10)).unwrap();
        for d in &h.density {
            assert!((d - 0.1).abs() < 1e-12);
        }
        let total: f64 = h.density.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_counted() {
        let h = build_histogram(&[0.5, 2.0, f64::NAN], &BinSpec::new(0.0, 1.0, 4)).unwrap();
        assert_eq!(h.count, 1);
        assert_eq!(h.out_of_range, 2);
        assert!(build_histogram(&[7.0], &BinSpec::new(0.0, 1.0, 4)).is_err());
    }

    #[test]
    fn summarize_population_variance() {
        let s = summarize(&[1.46, 1.46]).unwrap();
        assert_eq!(s.mean, 1.46);
        assert_eq!(s.variance, 0.0);
        let s = summarize(&[1.0, 2.0]).unwrap();
        assert!((s.mean - 1.5).abs() < 1e-15);
        assert!((s.variance - 0.25).abs() < 1e-15);
    }

    fn hist_from_counts(counts: &[u64]) -> Histogram {
        let n = counts.len();
        let total: u64 = counts.iter().sum();
        Histogram {
            bin_edges: (0..=n).map(|i| i as f64).collect(),
            counts: counts.to_vec(),
            density: counts.iter().map(|&c| c as f64 / total as f64).collect(),
            count: total,
            out_of_range: 0,
        }
    }

    #[test]
    fn kl_identity_and_hand_value() {
        let p = hist_from_counts(&[2, 2]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        // p=(0.5,0.5), q=(0.25,0.75): 0.5 ln 2 + 0.5 ln(2/3) = 0.14384...
        let q = hist_from_counts(&[1, 3]);
        let kl = kl_divergence(&p, &q).unwrap();
        assert!((kl - 0.1438).abs() < 1e-4, "kl {kl}");
    }

    #[test]
    fn kl_zero_bin_stays_finite() {
        let p = hist_from_counts(&[5, 5]);
        let q = hist_from_counts(&[10, 0]);
        let kl = kl_divergence(&p, &q).unwrap();
        assert!(kl.is_finite() && kl > 0.0);
    }

    #[test]
    fn wasserstein_adjacent_and_far() {
        let p = hist_from_counts(&[1, 0]);
        let q = hist_from_counts(&[0, 1]);
        assert!((wasserstein_1d(&p, &q).unwrap() - 1.0).abs() < 1e-12);
        let p = hist_from_counts(&[1, 0, 0]);
        let q = hist_from_counts(&[0, 0, 1]);
        assert!((wasserstein_1d(&p, &q).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(wasserstein_1d(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn euclid_cosine_hand_values() {
        let p = hist_from_counts(&[3, 4]);
        let q = hist_from_counts(&[3, 0]);
        assert!((euclidean_distance(&p, &q).unwrap() - 4.0).abs() < 1e-12);
        assert!((cosine_similarity(&p, &q).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(euclidean_distance(&p, &p).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&p, &p).unwrap(), 1.0);
    }

    #[test]
    fn bin_mismatch_detected() {
        let p = hist_from_counts(&[1, 1]);
        let q = build_histogram(&[0.5], &BinSpec::new(0.0, 1.0, 2)).unwrap();
        assert_eq!(kl_divergence(&p, &q), Err(StatsError::BinMismatch));
    }

    #[test]
    fn corpus_self_comparison_is_exact() {
        let tables: Vec<FeatureTable> = (0..3)
            .map(|i| {
                crate::geometry::extract_features(&crate::synthetic::mixed_chain(
                    "s", 24, 0.12, i,
                ))
            })
            .collect();
        let cmp = corpus_compare(&tables, &tables).unwrap();
        assert!(cmp.skipped.is_empty());
        for f in &cmp.features {
            assert_eq!(f.kl, 0.0, "{}", f.feature);
            assert_eq!(f.wasserstein, 0.0, "{}", f.feature);
            assert_eq!(f.euclidean, 0.0, "{}", f.feature);
            assert_eq!(f.cosine, 1.0, "{}", f.feature);
        }
        assert_eq!(cmp.rama_a.counts, cmp.rama_b.counts);
    }

    #[test]
    fn empty_feature_skipped_with_warning() {
        let mut t = crate::geometry::extract_features(&crate::synthetic::helix("s", 8, 0.0, 1));
        for m in t.phi_mask.iter_mut() {
            *m = false;
        }
        let cmp = corpus_compare(core::slice::from_ref(&t), core::slice::from_ref(&t)).unwrap();
        assert!(cmp.skipped.iter().any(|(f, _)| *f == "phi"));
        assert_eq!(cmp.features.len(), 9);
    }
}
