//! Learnable parameters: construction, initialization, counting, and a
//! flat declaration-order view used for checkpoints and optimizer state.

use alloc::vec;
use alloc::vec::Vec;
// Needed for f64 math in pure no_std builds; redundant when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

use super::DesaeConfig;
use crate::autodiff::TensorData;
use crate::rng::SeededRng;

/// Dense affine map; weights stored `[fan_in, fan_out]` so rows multiply
/// from the left (x · W + b).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: TensorData,
    pub b: TensorData,
}

impl Linear {
    fn init(rng: &mut SeededRng, fan_in: usize, fan_out: usize) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Self {
            w: TensorData::from_fn(&[fan_in, fan_out], |_| rng.uniform_in(-limit, limit)),
            b: TensorData::zeros(&[fan_out]),
        }
    }
}

/// Stack of affine maps with ReLU between (not after) them.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    fn init(rng: &mut SeededRng, dims: &[usize]) -> Self {
        Self {
            layers: dims
                .windows(2)
                .map(|w| Linear::init(rng, w[0], w[1]))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub gamma: TensorData,
    pub beta: TensorData,
}

impl LayerNormParams {
    fn new(d: usize) -> Self {
        Self {
            gamma: TensorData::new(&[d], vec![1.0; d]),
            beta: TensorData::zeros(&[d]),
        }
    }
}

/// One frame-aggregation block: latent point projections, the geometric
/// edge update, and attention-weighted node aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct AggLayerParams {
    pub z_node: Mlp,
    pub z_edge: Mlp,
    pub edge_mlp: Mlp,
    pub edge_ln: LayerNormParams,
    pub attn: Mlp,
    pub node_mlp: Mlp,
    pub node_ln: LayerNormParams,
}

impl AggLayerParams {
    fn init(rng: &mut SeededRng, cfg: &DesaeConfig) -> Self {
        let d = cfg.hidden_dim;
        let hidden = 2 * d;
        let zm = 3 * cfg.virtual_points;
        Self {
            z_node: Mlp::init(rng, &[d, hidden, zm]),
            z_edge: Mlp::init(rng, &[d, hidden, zm]),
            edge_mlp: Mlp::init(rng, &[cfg.edge_feature_dim(), hidden, hidden, d]),
            edge_ln: LayerNormParams::new(d),
            attn: Mlp::init(rng, &[2 * d, hidden, 1]),
            node_mlp: Mlp::init(rng, &[d, hidden, d]),
            node_ln: LayerNormParams::new(d),
        }
    }
}

/// One frame-updating block: two attention heads, the quaternion
/// projection of the aggregated relative rotation, and the neighbor
/// translation-proposal head.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdLayerParams {
    pub rot_attn: Mlp,
    pub trans_attn: Mlp,
    /// Projects the 9-dim aggregated vec(R) to a quaternion; stored [9, 4].
    pub w_r: TensorData,
    pub v_head: Mlp,
}

impl UpdLayerParams {
    fn init(rng: &mut SeededRng, cfg: &DesaeConfig) -> Self {
        let d = cfg.hidden_dim;
        let hidden = 2 * d;
        let limit = (6.0 / (9 + 4) as f64).sqrt();
        Self {
            rot_attn: Mlp::init(rng, &[2 * d, hidden, 1]),
            trans_attn: Mlp::init(rng, &[2 * d, hidden, 1]),
            w_r: TensorData::from_fn(&[9, 4], |_| rng.uniform_in(-limit, limit)),
            v_head: Mlp::init(rng, &[d, hidden, 3]),
        }
    }
}

/// All learnable weights, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub node_init: Linear,
    pub edge_init: Linear,
    /// Maps node embeddings to four local atom offsets (norm-bounded).
    pub offset_head: Linear,
    /// Aggregation blocks: encoder layers first, then decoder layers.
    pub agg: Vec<AggLayerParams>,
    /// Updating blocks, one per decoder layer.
    pub upd: Vec<UpdLayerParams>,
}

/// Dimensionality of the invariant per-residue input features:
/// (sin, cos) of the six angles plus four bond lengths.
pub const NODE_FEATURE_DIM: usize = 16;

impl Params {
    pub fn init(cfg: &DesaeConfig, seed: u64) -> Self {
        let mut rng = SeededRng::new(seed);
        let d = cfg.hidden_dim;
        Self {
            node_init: Linear::init(&mut rng, NODE_FEATURE_DIM, d),
            edge_init: Linear::init(&mut rng, cfg.edge_feature_dim(), d),
            offset_head: Linear::init(&mut rng, d, 12),
            agg: (0..cfg.encoder_layers + cfg.decoder_layers)
                .map(|_| AggLayerParams::init(&mut rng, cfg))
                .collect(),
            upd: (0..cfg.decoder_layers)
                .map(|_| UpdLayerParams::init(&mut rng, cfg))
                .collect(),
        }
    }

    /// Every parameter tensor in declaration order. Checkpoint layout and
    /// optimizer state index into this order.
    pub fn tensors(&self) -> Vec<&TensorData> {
        let mut out: Vec<&TensorData> = Vec::new();
        collect_tensors(self, &mut |t| out.push(t));
        out
    }

    /// Mutable declaration-order view (same order as [`Params::tensors`]).
    pub fn tensors_mut(&mut self) -> Vec<&mut TensorData> {
        let mut out: Vec<&mut TensorData> = Vec::new();
        collect_tensors_mut(self, &mut |t| out.push(t));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Lengths of the flat tensors, for sizing optimizer state.
    pub fn tensor_lengths(&self) -> Vec<usize> {
        self.tensors().iter().map(|t| t.len()).collect()
    }
}

fn collect_tensors<'a>(p: &'a Params, f: &mut impl FnMut(&'a TensorData)) {
    let lin = |l: &'a Linear, f: &mut dyn FnMut(&'a TensorData)| {
        f(&l.w);
        f(&l.b);
    };
    let mlp = |m: &'a Mlp, f: &mut dyn FnMut(&'a TensorData)| {
        for l in &m.layers {
            f(&l.w);
            f(&l.b);
        }
    };
    lin(&p.node_init, f);
    lin(&p.edge_init, f);
    lin(&p.offset_head, f);
    for a in &p.agg {
        mlp(&a.z_node, f);
        mlp(&a.z_edge, f);
        mlp(&a.edge_mlp, f);
        f(&a.edge_ln.gamma);
        f(&a.edge_ln.beta);
        mlp(&a.attn, f);
        mlp(&a.node_mlp, f);
        f(&a.node_ln.gamma);
        f(&a.node_ln.beta);
    }
    for u in &p.upd {
        mlp(&u.rot_attn, f);
        mlp(&u.trans_attn, f);
        f(&u.w_r);
        mlp(&u.v_head, f);
    }
}

fn collect_tensors_mut<'a>(p: &'a mut Params, f: &mut impl FnMut(&'a mut TensorData)) {
    let lin = |l: &'a mut Linear, f: &mut dyn FnMut(&'a mut TensorData)| {
        f(&mut l.w);
        f(&mut l.b);
    };
    let mlp = |m: &'a mut Mlp, f: &mut dyn FnMut(&'a mut TensorData)| {
        for l in &mut m.layers {
            f(&mut l.w);
            f(&mut l.b);
        }
    };
    lin(&mut p.node_init, f);
    lin(&mut p.edge_init, f);
    lin(&mut p.offset_head, f);
    for a in &mut p.agg {
        mlp(&mut a.z_node, f);
        mlp(&mut a.z_edge, f);
        mlp(&mut a.edge_mlp, f);
        f(&mut a.edge_ln.gamma);
        f(&mut a.edge_ln.beta);
        mlp(&mut a.attn, f);
        mlp(&mut a.node_mlp, f);
        f(&mut a.node_ln.gamma);
        f(&mut a.node_ln.beta);
    }
    for u in &mut p.upd {
        mlp(&mut u.rot_attn, f);
        mlp(&mut u.trans_attn, f);
        f(&mut u.w_r);
        mlp(&mut u.v_head, f);
    }
}
