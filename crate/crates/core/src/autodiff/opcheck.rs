//! Randomized per-op gradient sweeps.
//!
//! Each op gets random shapes and inputs drawn from ranges where the op is
//! smooth (away from relu kinks, sqrt/log domain edges, zero denominators)
//! so central differences are trustworthy, then its backward rule is
//! compared against finite differences.

use alloc::vec;
use alloc::vec::Vec;

use super::gradcheck::{check_gradients, GradCheck};
use super::graph::{AdError, Graph, TensorId};
use super::tensor::TensorData;
use crate::rng::SeededRng;

/// Every differentiable op, by constructor name.
pub const ALL_OPS: &[&str] = &[
    "add",
    "sub",
    "mul",
    "div",
    "add_scalar",
    "mul_scalar",
    "matmul",
    "transpose",
    "reshape",
    "concat",
    "slice_last",
    "gather",
    "scatter_add",
    "sum_axis",
    "sum_all",
    "mean_axis",
    "mean_all",
    "relu",
    "sigmoid",
    "tanh",
    "softmax",
    "layer_norm",
    "sqrt",
    "square",
    "exp",
    "log",
    "norm_axis",
    "cross",
    "atan2",
];

fn rand_shape(rng: &mut SeededRng) -> Vec<usize> {
    let rank = 1 + rng.below(3);
    (0..rank).map(|_| 1 + rng.below(4)).collect()
}

fn tensor_in(rng: &mut SeededRng, shape: &[usize], lo: f64, hi: f64) -> TensorData {
    TensorData::from_fn(shape, |_| rng.uniform_in(lo, hi))
}

/// Values bounded away from zero (for denominators and relu inputs).
fn tensor_off_zero(rng: &mut SeededRng, shape: &[usize], min_abs: f64, max_abs: f64) -> TensorData {
    TensorData::from_fn(shape, |_| {
        let sign = if rng.below(2) == 0 { -1.0 } else { 1.0 };
        sign * rng.uniform_in(min_abs, max_abs)
    })
}

/// Shapes that broadcast against `shape` (same, trailing suffix, or with
/// extent-1 axes).
fn broadcast_partner(rng: &mut SeededRng, shape: &[usize]) -> Vec<usize> {
    match rng.below(3) {
        0 => shape.to_vec(),
        1 => {
            let start = rng.below(shape.len());
            shape[start..].to_vec()
        }
        _ => shape
            .iter()
            .map(|&e| if rng.below(2) == 0 { e } else { 1 })
            .collect(),
    }
}

/// Run one randomized gradient check for the named op.
pub fn check_op(name: &str, seed: u64) -> Result<GradCheck, AdError> {
    let mut rng = SeededRng::new(seed ^ crate::rng::label(name));
    let mut g = Graph::new();

    let out: TensorId = match name {
        "add" | "sub" | "mul" | "div" => {
            let sa = rand_shape(&mut rng);
            let sb = broadcast_partner(&mut rng, &sa);
            let a = g.leaf(tensor_in(&mut rng, &sa, -2.0, 2.0));
            let b = match name {
                "div" => g.leaf(tensor_off_zero(&mut rng, &sb, 0.4, 2.0)),
                _ => g.leaf(tensor_in(&mut rng, &sb, -2.0, 2.0)),
            };
            match name {
                "add" => g.add(a, b)?,
                "sub" => g.sub(a, b)?,
                "mul" => g.mul(a, b)?,
                _ => g.div(a, b)?,
            }
        }
        "add_scalar" | "mul_scalar" => {
            let s = rand_shape(&mut rng);
            let a = g.leaf(tensor_in(&mut rng, &s, -2.0, 2.0));
            let c = rng.uniform_in(-3.0, 3.0);
            if name == "add_scalar" {
                g.add_scalar(a, c)?
            } else {
                g.mul_scalar(a, c)?
            }
        }
        "matmul" => {
            let (m, k, n) = (1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(4));
            let batched = rng.below(2) == 1;
            let (sa, sb) = if batched {
                let t = 1 + rng.below(3);
                (vec![t, m, k], vec![t, k, n])
            } else {
                (vec![m, k], vec![k, n])
            };
            let a = g.leaf(tensor_in(&mut rng, &sa, -2.0, 2.0));
            let b = g.leaf(tensor_in(&mut rng, &sb, -2.0, 2.0));
            g.matmul(a, b)?
        }
        "transpose" => {
            let s = vec![1 + rng.below(3), 1 + rng.below(4), 1 + rng.below(4)];
            let a = g.leaf(tensor_in(&mut rng, &s, -2.0, 2.0));
            g.transpose(a)?
        }
        "reshape" => {
            let s = vec![2, 3, 2];
            let a = g.leaf(tensor_in(&mut rng, &s, -2.0, 2.0));
            g.reshape(a, &[3, 4])?
        }
        "concat" => {
            let axis_extents = [1 + rng.below(3), 1 + rng.below(3)];
            let axis = rng.below(2);
            let mut s1 = vec![2, 3];
            let mut s2 = vec![2, 3];
            s1[axis] = axis_extents[0];
            s2[axis] = axis_extents[1];
            let a = g.leaf(tensor_in(&mut rng, &s1, -2.0, 2.0));
            let b = g.leaf(tensor_in(&mut rng, &s2, -2.0, 2.0));
            g.concat(&[a, b], axis)?
        }
        "slice_last" => {
            let w = 2 + rng.below(4);
            let s = vec![1 + rng.below(3), w];
            let start = rng.below(w - 1);
            let len = 1 + rng.below(w - start);
            let a = g.leaf(tensor_in(&mut rng, &s, -2.0, 2.0));
            g.slice_last(a, start, len)?
        }
        "gather" => {
            let rows = 2 + rng.below(4);
            let s = vec![rows, 1 + rng.below(3)];
            let idx: Vec<usize> = (0..3 + rng.below(4)).map(|_| rng.below(rows)).collect();
            let a = g.leaf(tensor_in(&mut rng, &s, -2.0, 2.0));
            g.gather(a, &idx)?
        }
        "scatter_add" => {
            let rows = 2 + rng.below(4);
            let n = 3 + rng.below(4);
            let s = vec![n, 1 + rng.below(3)];
            let idx: Vec<usize> = (0..n).map(|_| rng.below(rows)).collect();
            let a = g.leaf(tensor_in(&mut rng, &s, -2.0, 2.0));
            g.scatter_add(a, &idx, rows)?
        }
        "sum_axis" | "mean_axis" | "softmax" | "norm_axis" => {
            let s = rand_shape(&mut rng);
            let axis = rng.below(s.len());
            let a = match name {
                // keep lane norms bounded away from zero
                "norm_axis" => g.leaf(tensor_off_zero(&mut rng, &s, 0.3, 2.0)),
                _ => g.leaf(tensor_in(&mut rng, &s, -2.0, 2.0)),
            };
            match name {
                "sum_axis" => g.sum_axis(a, axis)?,
                "mean_axis" => g.mean_axis(a, axis)?,
                "softmax" => g.softmax(a, axis)?,
                _ => g.norm_axis(a, axis)?,
            }
        }
        "sum_all" | "mean_all" => {
            let s = rand_shape(&mut rng);
            let a = g.leaf(tensor_in(&mut rng, &s, -2.0, 2.0));
            if name == "sum_all" {
                g.sum_all(a)?
            } else {
                g.mean_all(a)?
            }
        }
        "relu" => {
            let s = rand_shape(&mut rng);
            let a = g.leaf(tensor_off_zero(&mut rng, &s, 0.05, 2.0));
            g.relu(a)?
        }
        "sigmoid" | "tanh" | "square" | "exp" => {
            let s = rand_shape(&mut rng);
            let a = g.leaf(tensor_in(&mut rng, &s, -2.0, 2.0));
            match name {
                "sigmoid" => g.sigmoid(a)?,
                "tanh" => g.tanh(a)?,
                "square" => g.square(a)?,
                _ => g.exp(a)?,
            }
        }
        "sqrt" | "log" => {
            let s = rand_shape(&mut rng);
            let a = g.leaf(tensor_in(&mut rng, &s, 0.3, 3.0));
            if name == "sqrt" {
                g.sqrt(a)?
            } else {
                g.log(a)?
            }
        }
        "layer_norm" => {
            let d = 2 + rng.below(5);
            let s = vec![1 + rng.below(4), d];
            let x = g.leaf(tensor_in(&mut rng, &s, -2.0, 2.0));
            let gamma = g.leaf(tensor_off_zero(&mut rng, &[d], 0.5, 1.5));
            let beta = g.leaf(tensor_in(&mut rng, &[d], -0.5, 0.5));
            g.layer_norm(x, gamma, beta)?
        }
        "cross" => {
            let s = vec![1 + rng.below(4), 3];
            let a = g.leaf(tensor_in(&mut rng, &s, -2.0, 2.0));
            let b = g.leaf(tensor_in(&mut rng, &s, -2.0, 2.0));
            g.cross(a, b)?
        }
        "atan2" => {
            let s = rand_shape(&mut rng);
            let y = g.leaf(tensor_off_zero(&mut rng, &s, 0.3, 2.0));
            let x = g.leaf(tensor_off_zero(&mut rng, &s, 0.3, 2.0));
            g.atan2(y, x)?
        }
        other => panic!("unknown op {other}"),
    };

    // Reduce to a scalar with weights so symmetric outputs cannot hide
    // sign errors in the backward rule.
    let w = {
        let n = g.value(out).len();
        let shape = g.shape(out).to_vec();
        g.constant(TensorData::from_fn(&shape, |i| {
            0.3 + 0.7 * ((i % 7) as f64) / 7.0 + if n > 1 { 0.01 * i as f64 } else { 0.0 }
        }))
    };
    let weighted = g.mul(out, w)?;
    let loss = g.sum_all(weighted)?;

    let leaves: Vec<TensorId> = (0..g.len())
        .filter(|&i| g.is_leaf(i) && g.requires_grad(i))
        .collect();
    check_gradients(&mut g, &leaves, loss, 1e-4)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_op_listed_runs() {
        for op in ALL_OPS {
            let check = check_op(op, 1).unwrap_or_else(|e| panic!("{op}: {e}"));
            check.assert_within(1e-4, op);
        }
    }
}
