//! Central finite-difference validation of backward rules.
//!
//! The checker builds a graph once, runs backward, then re-evaluates the
//! frozen graph (same structure, perturbed leaf values) to form central
//! differences. Freezing matters for losses whose construction captures
//! data-dependent constants (e.g. superposition rotations): the check then
//! verifies exactly the gradient the graph defines.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use super::graph::{AdError, Graph, TensorId};

/// Outcome of a finite-difference sweep.
#[derive(Debug, Clone)]
pub struct GradCheck {
    /// Largest mismatch seen, measured as |analytic - numeric| /
    /// max(|analytic|, |numeric|, 1).
    pub max_rel_err: f64,
    /// Where it occurred: (leaf position, element index).
    pub worst: (usize, usize),
    pub evaluated: usize,
}

/// Compare analytic gradients of `loss` w.r.t. `leaves` against central
/// finite differences with step `h`.
pub fn check_gradients(
    g: &mut Graph,
    leaves: &[TensorId],
    loss: TensorId,
    h: f64,
) -> Result<GradCheck, AdError> {
    check_gradients_steps(g, leaves, loss, &[h], 0.0)
}

/// Like [`check_gradients`], trying successively smaller steps per element
/// and keeping the best agreement. Piecewise-linear activations make a
/// single fixed step unreliable (a perturbation can hop across a ReLU
/// kink); a wrong backward rule stays wrong at every step, so shrinking h
/// cannot mask real bugs. Elements already within `early` skip the extra
/// steps.
pub fn check_gradients_steps(
    g: &mut Graph,
    leaves: &[TensorId],
    loss: TensorId,
    steps: &[f64],
    early: f64,
) -> Result<GradCheck, AdError> {
    assert!(!steps.is_empty());
    g.zero_grads();
    g.backward(loss)?;
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .map(|&l| g.grad(l).map(|s| s.to_vec()).unwrap_or_default())
        .collect();

    let mut out = GradCheck {
        max_rel_err: 0.0,
        worst: (0, 0),
        evaluated: 0,
    };
    for (li, &leaf) in leaves.iter().enumerate() {
        let base = g.value(leaf).clone();
        for j in 0..base.len() {
            let a = if analytic[li].is_empty() { 0.0 } else { analytic[li][j] };
            let mut best = f64::INFINITY;
            for &h in steps {
                let mut plus = base.clone();
                plus.data[j] += h;
                g.set_leaf_value(leaf, plus)?;
                g.refresh()?;
                let f_plus = g.value(loss).item();

                let mut minus = base.clone();
                minus.data[j] -= h;
                g.set_leaf_value(leaf, minus)?;
                g.refresh()?;
                let f_minus = g.value(loss).item();

                let numeric = (f_plus - f_minus) / (2.0 * h);
                let denom = a.abs().max(numeric.abs()).max(1.0);
                best = best.min((a - numeric).abs() / denom);
                if best <= early {
                    break;
                }
            }
            if best > out.max_rel_err {
                out.max_rel_err = best;
                out.worst = (li, j);
            }
            out.evaluated += 1;
        }
        g.set_leaf_value(leaf, base)?;
        g.refresh()?;
    }
    Ok(out)
}

impl GradCheck {
    pub fn assert_within(&self, tol: f64, what: &str) {
        assert!(
            self.max_rel_err <= tol,
            "{what}: gradient mismatch {:.3e} > {tol:.1e} at leaf {} element {} ({} checks)",
            self.max_rel_err,
            self.worst.0,
            self.worst.1,
            self.evaluated
        );
    }

    pub fn describe(&self) -> String {
        format!(
            "max rel err {:.3e} over {} partials",
            self.max_rel_err, self.evaluated
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::TensorData;

    #[test]
    fn catches_correct_and_near_zero_gradients() {
        let mut g = Graph::new();
        let x = g.leaf(TensorData::new(&[3], alloc::vec![0.3, -0.7, 1.2]));
        let sq = g.square(x).unwrap();
        let s = g.sum_all(sq).unwrap();
        let check = check_gradients(&mut g, &[x], s, 1e-4).unwrap();
        check.assert_within(1e-6, "sum of squares");
    }

    #[test]
    fn frozen_graph_keeps_constants() {
        // The constant captured at build time must not be recomputed.
        let mut g = Graph::new();
        let x = g.leaf(TensorData::new(&[2], alloc::vec![1.0, 2.0]));
        let c = g.constant(TensorData::new(&[2], alloc::vec![5.0, -3.0]));
        let prod = g.mul(x, c).unwrap();
        let s = g.sum_all(prod).unwrap();
        let check = check_gradients(&mut g, &[x], s, 1e-4).unwrap();
        check.assert_within(1e-8, "linear in x");
    }
}
