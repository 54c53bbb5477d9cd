//! Graph builders for the frame-aggregation encoder and the
//! frame-aggregation + frame-updating decoder.
//!
//! Edges of the kNN graph are laid out flat, row-major by (residue,
//! neighbor rank), so per-node softmax and neighbor sums are reshapes of
//! the same [E, ...] tensors to [L, k, ...]. All geometric inputs are
//! relative between frames, which is what makes node/edge embeddings
//! invariant to a global rigid motion of the input.

use alloc::vec::Vec;

use super::params::{Linear, Mlp, Params};
use crate::autodiff::{AdError, Graph, TensorData, TensorId};

/// Fixed edge layout for one structure.
pub struct EdgeIndex {
    /// Source residue of each edge (row-major by neighbor rank).
    pub src: Vec<usize>,
    /// Neighbor residue of each edge.
    pub dst: Vec<usize>,
    pub nodes: usize,
    /// Neighbors per node (uniform).
    pub degree: usize,
}

impl EdgeIndex {
    pub fn from_topology(topo: &crate::geometry::GraphTopology) -> Self {
        let (src, dst) = topo.edges();
        Self {
            src,
            dst,
            nodes: topo.len(),
            degree: topo.degree(),
        }
    }

    pub fn edge_count(&self) -> usize {
        self.src.len()
    }
}

// --- parameters bound into a graph ----------------------------------------

pub struct BoundLinear {
    pub w: TensorId,
    pub b: TensorId,
}

pub struct BoundMlp {
    pub layers: Vec<BoundLinear>,
}

pub struct BoundLayerNorm {
    pub gamma: TensorId,
    pub beta: TensorId,
}

pub struct BoundAgg {
    pub z_node: BoundMlp,
    pub z_edge: BoundMlp,
    pub edge_mlp: BoundMlp,
    pub edge_ln: BoundLayerNorm,
    pub attn: BoundMlp,
    pub node_mlp: BoundMlp,
    pub node_ln: BoundLayerNorm,
}

pub struct BoundUpd {
    pub rot_attn: BoundMlp,
    pub trans_attn: BoundMlp,
    pub w_r: TensorId,
    pub v_head: BoundMlp,
}

/// Every parameter tensor inserted into a graph, mirroring [`Params`].
/// Insertion order equals the declaration order of `Params::tensors`, so
/// gradients read back by id line up with optimizer state.
pub struct BoundParams {
    pub node_init: BoundLinear,
    pub edge_init: BoundLinear,
    pub offset_head: BoundLinear,
    pub agg: Vec<BoundAgg>,
    pub upd: Vec<BoundUpd>,
}

fn bind_tensor(g: &mut Graph, t: &TensorData, trainable: bool) -> TensorId {
    if trainable {
        g.leaf(t.clone())
    } else {
        g.constant(t.clone())
    }
}

fn bind_linear(g: &mut Graph, l: &Linear, trainable: bool) -> BoundLinear {
    BoundLinear {
        w: bind_tensor(g, &l.w, trainable),
        b: bind_tensor(g, &l.b, trainable),
    }
}

fn bind_mlp(g: &mut Graph, m: &Mlp, trainable: bool) -> BoundMlp {
    BoundMlp {
        layers: m.layers.iter().map(|l| bind_linear(g, l, trainable)).collect(),
    }
}

impl BoundParams {
    pub fn bind(g: &mut Graph, params: &Params, trainable: bool) -> Self {
        let node_init = bind_linear(g, &params.node_init, trainable);
        let edge_init = bind_linear(g, &params.edge_init, trainable);
        let offset_head = bind_linear(g, &params.offset_head, trainable);
        let agg = params
            .agg
            .iter()
            .map(|a| BoundAgg {
                z_node: bind_mlp(g, &a.z_node, trainable),
                z_edge: bind_mlp(g, &a.z_edge, trainable),
                edge_mlp: bind_mlp(g, &a.edge_mlp, trainable),
                edge_ln: BoundLayerNorm {
                    gamma: bind_tensor(g, &a.edge_ln.gamma, trainable),
                    beta: bind_tensor(g, &a.edge_ln.beta, trainable),
                },
                attn: bind_mlp(g, &a.attn, trainable),
                node_mlp: bind_mlp(g, &a.node_mlp, trainable),
                node_ln: BoundLayerNorm {
                    gamma: bind_tensor(g, &a.node_ln.gamma, trainable),
                    beta: bind_tensor(g, &a.node_ln.beta, trainable),
                },
            })
            .collect();
        let upd = params
            .upd
            .iter()
            .map(|u| BoundUpd {
                rot_attn: bind_mlp(g, &u.rot_attn, trainable),
                trans_attn: bind_mlp(g, &u.trans_attn, trainable),
                w_r: bind_tensor(g, &u.w_r, trainable),
                v_head: bind_mlp(g, &u.v_head, trainable),
            })
            .collect();
        Self {
            node_init,
            edge_init,
            offset_head,
            agg,
            upd,
        }
    }

    /// Bound ids in declaration order (matches `Params::tensors`).
    pub fn ids(&self) -> Vec<TensorId> {
        let mut out = Vec::new();
        let lin = |out: &mut Vec<TensorId>, l: &BoundLinear| {
            out.push(l.w);
            out.push(l.b);
        };
        let mlp = |out: &mut Vec<TensorId>, m: &BoundMlp| {
            for l in &m.layers {
                out.push(l.w);
                out.push(l.b);
            }
        };
        lin(&mut out, &self.node_init);
        lin(&mut out, &self.edge_init);
        lin(&mut out, &self.offset_head);
        for a in &self.agg {
            mlp(&mut out, &a.z_node);
            mlp(&mut out, &a.z_edge);
            mlp(&mut out, &a.edge_mlp);
            out.push(a.edge_ln.gamma);
            out.push(a.edge_ln.beta);
            mlp(&mut out, &a.attn);
            mlp(&mut out, &a.node_mlp);
            out.push(a.node_ln.gamma);
            out.push(a.node_ln.beta);
        }
        for u in &self.upd {
            mlp(&mut out, &u.rot_attn);
            mlp(&mut out, &u.trans_attn);
            out.push(u.w_r);
            mlp(&mut out, &u.v_head);
        }
        out
    }
}

/// x · W + b for 2-D x.
pub fn linear(g: &mut Graph, x: TensorId, l: &BoundLinear) -> Result<TensorId, AdError> {
    let wx = g.matmul(x, l.w)?;
    g.add(wx, l.b)
}

/// Apply an MLP (ReLU between layers).
pub fn mlp(g: &mut Graph, x: TensorId, m: &BoundMlp) -> Result<TensorId, AdError> {
    let mut cur = x;
    for (i, l) in m.layers.iter().enumerate() {
        cur = linear(g, cur, l)?;
        if i + 1 < m.layers.len() {
            cur = g.relu(cur)?;
        }
    }
    Ok(cur)
}

/// Per-layer relative frame geometry, shared by the aggregation and
/// updating blocks of one decoder layer.
pub struct EdgeGeometry {
    /// Rotation part of T_i⁻¹ ∘ T_j, per edge: [E, 3, 3].
    pub r_ij: TensorId,
    /// Translation part of T_i⁻¹ ∘ T_j (t_j - t_i in i's frame): [E, 3].
    pub t_ij_local: TensorId,
    /// vec(R_ij): [E, 9].
    pub vec_r: TensorId,
    /// ‖t_i - t_j‖: [E, 1].
    pub dist: TensorId,
    /// Current rotations/translations gathered per edge endpoint.
    pub r_j: TensorId,
    pub t_j: TensorId,
}

/// Relative pose features between the current frames of edge endpoints.
pub fn edge_geometry(
    g: &mut Graph,
    rot: TensorId,
    trans: TensorId,
    index: &EdgeIndex,
) -> Result<EdgeGeometry, AdError> {
    let e = index.edge_count();
    let r_i = g.gather(rot, &index.src)?;
    let r_j = g.gather(rot, &index.dst)?;
    let t_i = g.gather(trans, &index.src)?;
    let t_j = g.gather(trans, &index.dst)?;
    let r_i_t = g.transpose(r_i)?;
    let r_ij = g.matmul(r_i_t, r_j)?;
    let t_rel = g.sub(t_j, t_i)?;
    let t_rel_col = g.reshape(t_rel, &[e, 3, 1])?;
    let t_local_col = g.matmul(r_i_t, t_rel_col)?;
    let t_ij_local = g.reshape(t_local_col, &[e, 3])?;
    let dist = g.norm_axis(t_rel, 1)?;
    let vec_r = g.reshape(r_ij, &[e, 9])?;
    Ok(EdgeGeometry {
        r_ij,
        t_ij_local,
        vec_r,
        dist,
        r_j,
        t_j,
    })
}

/// Initial edge embeddings: the geometric edge features evaluated with
/// zero latent points, linearly projected.
pub fn init_edge_embeddings(
    g: &mut Graph,
    geo: &EdgeGeometry,
    index: &EdgeIndex,
    m: usize,
    edge_init: &BoundLinear,
) -> Result<TensorId, AdError> {
    let e = index.edge_count();
    // p with z = 0: the transformed half is t_ij tiled m times, the raw
    // half is zero; q is the zero matrix.
    let t_tiled: Vec<TensorId> = (0..m).map(|_| geo.t_ij_local).collect();
    let p_first = g.concat(&t_tiled, 1)?;
    let zeros_p = g.constant(TensorData::zeros(&[e, 3 * m]));
    let zeros_q = g.constant(TensorData::zeros(&[e, m * m]));
    let input = g.concat(&[p_first, zeros_p, zeros_q, geo.vec_r, geo.dist], 1)?;
    linear(g, input, edge_init)
}

/// Per-node softmax over neighbor scores: [E, 1] -> [E, 1].
fn neighbor_softmax(
    g: &mut Graph,
    scores: TensorId,
    index: &EdgeIndex,
) -> Result<TensorId, AdError> {
    let by_node = g.reshape(scores, &[index.nodes, index.degree])?;
    let soft = g.softmax(by_node, 1)?;
    g.reshape(soft, &[index.edge_count(), 1])
}

/// Sum edge values back to their source node: [E, D] -> [L, D].
fn sum_over_neighbors(
    g: &mut Graph,
    values: TensorId,
    index: &EdgeIndex,
    width: usize,
) -> Result<TensorId, AdError> {
    let by_node = g.reshape(values, &[index.nodes, index.degree, width])?;
    let summed = g.sum_axis(by_node, 1)?;
    g.reshape(summed, &[index.nodes, width])
}

/// One frame-aggregation block. Updates (h, e); frames are read-only.
pub fn frame_aggregation(
    g: &mut Graph,
    p: &BoundAgg,
    h: TensorId,
    e: TensorId,
    geo: &EdgeGeometry,
    index: &EdgeIndex,
    m: usize,
) -> Result<(TensorId, TensorId), AdError> {
    let n_edges = index.edge_count();
    let d = g.shape(h)[1];

    // Latent point clouds for nodes and edges.
    let z_node_flat = mlp(g, h, &p.z_node)?;
    let z_nodes = g.reshape(z_node_flat, &[index.nodes, m, 3])?;
    let z_edge_flat = mlp(g, e, &p.z_edge)?;
    let z_edges = g.reshape(z_edge_flat, &[n_edges, m, 3])?;

    // p: edge points carried through the relative transform, alongside raw.
    let r_ij_t = g.transpose(geo.r_ij)?;
    let z_moved = g.matmul(z_edges, r_ij_t)?;
    let t_row = g.reshape(geo.t_ij_local, &[n_edges, 1, 3])?;
    let z_moved = g.add(z_moved, t_row)?;
    let p_cat = g.concat(&[z_moved, z_edges], 1)?;
    let p_flat = g.reshape(p_cat, &[n_edges, 6 * m])?;

    // q: geometric dot products of the two endpoint clouds in i's frame.
    let z_i = g.gather(z_nodes, &index.src)?;
    let z_j = g.gather(z_nodes, &index.dst)?;
    let z_j_rot = g.matmul(z_j, r_ij_t)?;
    let z_j_rot_t = g.transpose(z_j_rot)?;
    let q = g.matmul(z_i, z_j_rot_t)?;
    let q_flat = g.reshape(q, &[n_edges, m * m])?;

    let edge_in = g.concat(&[p_flat, q_flat, geo.vec_r, geo.dist], 1)?;
    let edge_update = mlp(g, edge_in, &p.edge_mlp)?;
    let e_res = g.add(e, edge_update)?;
    let e_new = g.layer_norm(e_res, p.edge_ln.gamma, p.edge_ln.beta)?;

    // Attention-weighted edge messages into nodes.
    let h_i = g.gather(h, &index.src)?;
    let score_in = g.concat(&[h_i, e_new], 1)?;
    let scores = mlp(g, score_in, &p.attn)?;
    let weights = neighbor_softmax(g, scores, index)?;
    let weighted = g.mul(e_new, weights)?;
    let msg = sum_over_neighbors(g, weighted, index, d)?;
    let h_plus = g.add(h, msg)?;
    let node_update = mlp(g, h_plus, &p.node_mlp)?;
    let h_res = g.add(h, node_update)?;
    let h_new = g.layer_norm(h_res, p.node_ln.gamma, p.node_ln.beta)?;

    Ok((h_new, e_new))
}

/// Differentiable quaternion → rotation matrix, [L, 4] -> [L, 3, 3].
/// The quaternion is normalized first (with a tiny floor to keep the
/// division well-defined); the matrix entries are the standard quadratic
/// forms.
pub fn quat_to_rot_graph(g: &mut Graph, q: TensorId) -> Result<TensorId, AdError> {
    let l = g.shape(q)[0];
    let q2 = g.square(q)?;
    let s2 = g.sum_axis(q2, 1)?;
    let s2e = g.add_scalar(s2, 1e-12)?;
    let norm = g.sqrt(s2e)?;
    let qn = g.div(q, norm)?;
    let w = g.slice_last(qn, 0, 1)?;
    let x = g.slice_last(qn, 1, 1)?;
    let y = g.slice_last(qn, 2, 1)?;
    let z = g.slice_last(qn, 3, 1)?;

    let ww = g.square(w)?;
    let xx = g.square(x)?;
    let yy = g.square(y)?;
    let zz = g.square(z)?;
    let xy = g.mul(x, y)?;
    let xz = g.mul(x, z)?;
    let yz = g.mul(y, z)?;
    let wx = g.mul(w, x)?;
    let wy = g.mul(w, y)?;
    let wz = g.mul(w, z)?;

    let two = 2.0;
    // Row 0
    let a = g.add(ww, xx)?;
    let b = g.add(yy, zz)?;
    let r00 = g.sub(a, b)?;
    let t = g.sub(xy, wz)?;
    let r01 = g.mul_scalar(t, two)?;
    let t = g.add(xz, wy)?;
    let r02 = g.mul_scalar(t, two)?;
    // Row 1
    let t = g.add(xy, wz)?;
    let r10 = g.mul_scalar(t, two)?;
    let a = g.sub(ww, xx)?;
    let b = g.sub(yy, zz)?;
    let r11 = g.add(a, b)?;
    let t = g.sub(yz, wx)?;
    let r12 = g.mul_scalar(t, two)?;
    // Row 2
    let t = g.sub(xz, wy)?;
    let r20 = g.mul_scalar(t, two)?;
    let t = g.add(yz, wx)?;
    let r21 = g.mul_scalar(t, two)?;
    let a = g.sub(ww, xx)?;
    let b = g.sub(zz, yy)?;
    let r22 = g.add(a, b)?;

    let flat = g.concat(&[r00, r01, r02, r10, r11, r12, r20, r21, r22], 1)?;
    g.reshape(flat, &[l, 3, 3])
}

/// One frame-updating block: refines rotations via the quaternion head and
/// translations via attention-weighted neighbor proposals. With no edges
/// (single-residue graph) the frames pass through unchanged.
#[allow(clippy::too_many_arguments)]
pub fn frame_updating(
    g: &mut Graph,
    p: &BoundUpd,
    h: TensorId,
    e: TensorId,
    rot: TensorId,
    trans: TensorId,
    geo: &EdgeGeometry,
    index: &EdgeIndex,
) -> Result<(TensorId, TensorId), AdError> {
    if index.edge_count() == 0 {
        return Ok((rot, trans));
    }
    let h_i = g.gather(h, &index.src)?;
    let score_in = g.concat(&[h_i, e], 1)?;

    // Rotation: attention-aggregate vec(R_ij), project to a quaternion,
    // compose as a relative update.
    let rot_scores = mlp(g, score_in, &p.rot_attn)?;
    let rot_weights = neighbor_softmax(g, rot_scores, index)?;
    let weighted_vec = g.mul(geo.vec_r, rot_weights)?;
    let vec_agg = sum_over_neighbors(g, weighted_vec, index, 9)?;
    let quat = g.matmul(vec_agg, p.w_r)?;
    let delta = quat_to_rot_graph(g, quat)?;
    let rot_new = g.matmul(rot, delta)?;

    // Translation: each neighbor proposes a position for i in global
    // coordinates, t_j + R_j · v(h_ij); softmax weights make the result a
    // convex combination (hence rigid-equivariant).
    let trans_scores = mlp(g, score_in, &p.trans_attn)?;
    let trans_weights = neighbor_softmax(g, trans_scores, index)?;
    let v = mlp(g, e, &p.v_head)?;
    let n_edges = index.edge_count();
    let v_row = g.reshape(v, &[n_edges, 1, 3])?;
    let r_j_t = g.transpose(geo.r_j)?;
    let v_glob = g.matmul(v_row, r_j_t)?;
    let v_glob = g.reshape(v_glob, &[n_edges, 3])?;
    let proposal = g.add(geo.t_j, v_glob)?;
    let weighted_prop = g.mul(proposal, trans_weights)?;
    let trans_new = sum_over_neighbors(g, weighted_prop, index, 3)?;

    Ok((rot_new, trans_new))
}

/// Map node embeddings to the four backbone atoms: a norm-bounded local
/// offset per atom, carried to global coordinates by the residue frame.
pub fn decode_coordinates(
    g: &mut Graph,
    offset_head: &BoundLinear,
    h: TensorId,
    rot: TensorId,
    trans: TensorId,
) -> Result<TensorId, AdError> {
    let l = g.shape(h)[0];
    let u_flat = linear(g, h, offset_head)?;
    let u = g.reshape(u_flat, &[l, 4, 3])?;
    // offset = u · tanh(s)/s with s = ‖u‖/3, so ‖offset‖ = 3·tanh(‖u‖/3) < 3 Å.
    let u2 = g.square(u)?;
    let s2 = g.sum_axis(u2, 2)?;
    let s2e = g.add_scalar(s2, 1e-12)?;
    let norm = g.sqrt(s2e)?;
    let s = g.mul_scalar(norm, 1.0 / 3.0)?;
    let ts = g.tanh(s)?;
    let factor = g.div(ts, s)?;
    let offset = g.mul(u, factor)?;
    let rot_t = g.transpose(rot)?;
    let offset_glob = g.matmul(offset, rot_t)?;
    let t_row = g.reshape(trans, &[l, 1, 3])?;
    g.add(offset_glob, t_row)
}
