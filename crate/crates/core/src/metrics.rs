//! Sequence-level evaluation metrics: recovery rate and perplexity.
//!
//! Unknown residues ('X') carry no signal; positions where either sequence
//! is 'X' are excluded and the effective length reduced accordingly.

use alloc::vec::Vec;
// Needed for f64 math in pure no_std builds; redundant when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::backbone::alphabet_index;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricError {
    LengthMismatch { pred: usize, truth: usize },
    /// A log-probability row does not sum to 1 (logsumexp ≈ 0).
    InvalidDistribution { row: usize, logsumexp: f64 },
    /// No positions left after excluding unknowns.
    NoComparablePositions,
}

impl core::fmt::Display for MetricError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::LengthMismatch { pred, truth } => {
                write!(f, "sequence lengths differ: {pred} vs {truth}")
            }
            Self::InvalidDistribution { row, logsumexp } => {
                write!(f, "row {row} is not a log-distribution (logsumexp {logsumexp:.2e})")
            }
            Self::NoComparablePositions => write!(f, "all positions are unknown ('X')"),
        }
    }
}

impl core::error::Error for MetricError {}

/// Fraction of positions where the predicted residue matches the native
/// one, over positions where both are known.
pub fn recovery_rate(pred: &[char], truth: &[char]) -> Result<f64, MetricError> {
    if pred.len() != truth.len() {
        return Err(MetricError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    let mut matches = 0usize;
    let mut total = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        if *p == 'X' || *t == 'X' {
            continue;
        }
        total += 1;
        if p == t {
            matches += 1;
        }
    }
    if total == 0 {
        return Err(MetricError::NoComparablePositions);
    }
    Ok(matches as f64 / total as f64)
}

/// exp(-(1/L) Σ log P(s_i | X)) over the known positions.
///
/// `log_probs` holds one row of 20 natural-log probabilities per residue;
/// each row must satisfy logsumexp ≈ 0 within 1e-6.
pub fn perplexity(log_probs: &[[f64; 20]], truth: &[char]) -> Result<f64, MetricError> {
    if log_probs.len() != truth.len() {
        return Err(MetricError::LengthMismatch {
            pred: log_probs.len(),
            truth: truth.len(),
        });
    }
    for (row, lp) in log_probs.iter().enumerate() {
        let mx = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + lp.iter().map(|&v| (v - mx).exp()).sum::<f64>().ln();
        if !lse.is_finite() || lse.abs() > 1e-6 {
            return Err(MetricError::InvalidDistribution { row, logsumexp: lse });
        }
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for (lp, t) in log_probs.iter().zip(truth) {
        let Some(idx) = alphabet_index(*t) else {
            continue;
        };
        total += lp[idx];
        n += 1;
    }
    if n == 0 {
        return Err(MetricError::NoComparablePositions);
    }
    Ok((-total / n as f64).exp())
}

/// Uniform log-probability rows, handy for baselines and tests.
pub fn uniform_log_probs(len: usize) -> Vec<[f64; 20]> {
    let lp = (1.0f64 / 20.0).ln();
    (0..len).map(|_| [lp; 20]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn recovery_basics() {
        let a: Vec<char> = "ACDE".chars().collect();
        assert_eq!(recovery_rate(&a, &a).unwrap(), 1.0);
        let b: Vec<char> = "ACDF".chars().collect();
        assert_eq!(recovery_rate(&b, &a).unwrap(), 0.75);
        let c: Vec<char> = "GGGG".chars().collect();
        let d: Vec<char> = "AAAA".chars().collect();
        assert_eq!(recovery_rate(&c, &d).unwrap(), 0.0);
    }

    #[test]
    fn recovery_excludes_unknowns() {
        let pred: Vec<char> = "AXCD".chars().collect();
        let truth: Vec<char> = "AACD".chars().collect();
        assert_eq!(recovery_rate(&pred, &truth).unwrap(), 1.0);
        let all_x: Vec<char> = "XX".chars().collect();
        assert!(matches!(
            recovery_rate(&all_x, &all_x),
            Err(MetricError::NoComparablePositions)
        ));
    }

    #[test]
    fn recovery_length_mismatch() {
        let a: Vec<char> = "AC".chars().collect();
        let b: Vec<char> = "ACD".chars().collect();
        assert!(recovery_rate(&a, &b).is_err());
    }

    #[test]
    fn perplexity_uniform_is_alphabet_size() {
        let truth: Vec<char> = "ACDEFGHIKL".chars().collect();
        let p = perplexity(&uniform_log_probs(10), &truth).unwrap();
        assert!((p - 20.0).abs() < 1e-9);
    }

    #[test]
    fn perplexity_confident_and_half() {
        let truth: Vec<char> = "AAA".chars().collect();
        // probability 1 on the true residue: perplexity 1. Use a valid
        // distribution with ~all mass on index 0.
        let mut row = [-1e9f64; 20];
        row[0] = 0.0;
        let p = perplexity(&vec![row; 3], &truth).unwrap();
        assert!((p - 1.0).abs() < 1e-9);
        // probability 0.5 on the true residue: perplexity 2.
        let mut half = [((0.5 / 19.0) as f64).ln(); 20];
        half[0] = 0.5f64.ln();
        let p = perplexity(&vec![half; 3], &truth).unwrap();
        assert!((p - 2.0).abs() < 1e-9);
    }

    #[test]
    fn perplexity_rejects_bad_rows() {
        let truth: Vec<char> = "A".chars().collect();
        let row = [0.0f64; 20]; // sums to 20, not 1
        assert!(matches!(
            perplexity(&[row], &truth),
            Err(MetricError::InvalidDistribution { .. })
        ));
    }

    #[test]
    fn permutation_consistency() {
        let truth: Vec<char> = "ACDEFG".chars().collect();
        let pred: Vec<char> = "ACDQFG".chars().collect();
        let r1 = recovery_rate(&pred, &truth).unwrap();
        let perm = [5usize, 3, 1, 0, 2, 4];
        let truth_p: Vec<char> = perm.iter().map(|&i| truth[i]).collect();
        let pred_p: Vec<char> = perm.iter().map(|&i| pred[i]).collect();
        assert_eq!(r1, recovery_rate(&pred_p, &truth_p).unwrap());
    }
}
