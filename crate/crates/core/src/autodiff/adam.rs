//! Adam optimizer with bias-corrected moments.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
// Needed for f64 math in pure no_std builds; redundant when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

/// Hyperparameters; the usual defaults.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates, one pair of buffers per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Fresh state for parameter tensors of the given lengths.
    pub fn new(lengths: &[usize]) -> Self {
        Self {
            step: 0,
            m: lengths.iter().map(|&n| vec![0.0; n]).collect(),
            v: lengths.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdamShapeError(pub String);

impl core::fmt::Display for AdamShapeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "adam: {}", self.0)
    }
}

impl core::error::Error for AdamShapeError {}

/// One Adam update over a set of parameter tensors.
///
/// `params` and `grads` are parallel slices; `state` is mutated in place.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<(), AdamShapeError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(AdamShapeError(alloc::format!(
            "{} params, {} grads, {} state buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, p) in params.iter().enumerate() {
        if p.len() != grads[i].len() || p.len() != state.m[i].len() {
            return Err(AdamShapeError(alloc::format!(
                "length mismatch in tensor {i}: {} vs {} vs {}",
                p.len(),
                grads[i].len(),
                state.m[i].len()
            )));
        }
    }
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - cfg.beta1.powi(state.step.min(i32::MAX as u64) as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.step.min(i32::MAX as u64) as i32);
    let _ = t;
    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i];
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        for j in 0..p.len() {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            let mhat = m[j] / bc1;
            let vhat = v[j] / bc2;
            p[j] -= lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = vec![1.0, -2.0, 3.0];
        let g = vec![0.0; 3];
        let mut state = AdamState::new(&[3]);
        let before = p.clone();
        adam_step(
            &mut [&mut p],
            &[&g],
            &mut state,
            1e-3,
            &AdamConfig::default(),
        )
        .unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_is_signed_lr() {
        // After bias correction, the first update is lr * sign(g) up to eps.
        let mut p = vec![0.0, 0.0];
        let g = vec![0.3, -7.0];
        let mut state = AdamState::new(&[2]);
        let lr = 1e-3;
        adam_step(&mut [&mut p], &[&g], &mut state, lr, &AdamConfig::default()).unwrap();
        assert!((p[0] - (-lr)).abs() / lr < 1e-6);
        assert!((p[1] - lr).abs() / lr < 1e-6);
    }

    #[test]
    fn constant_gradient_step_magnitude_approaches_lr() {
        // signSGD-like limit under a constant gradient.
        let mut p = vec![0.0];
        let g = vec![2.5];
        let mut state = AdamState::new(&[1]);
        let lr = 1e-2;
        let mut last = p[0];
        let mut step_size = 0.0;
        for _ in 0..1000 {
            adam_step(&mut [&mut p], &[&g], &mut state, lr, &AdamConfig::default()).unwrap();
            step_size = (p[0] - last).abs();
            last = p[0];
        }
        assert!((step_size - lr).abs() / lr < 0.05, "step {step_size} vs lr {lr}");
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut p = vec![0.0];
        let g = vec![1.0, 2.0];
        let mut state = AdamState::new(&[1]);
        assert!(adam_step(
            &mut [&mut p],
            &[&g],
            &mut state,
            1e-3,
            &AdamConfig::default()
        )
        .is_err());
    }
}
