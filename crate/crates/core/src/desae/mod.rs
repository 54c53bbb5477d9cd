//! The debiasing structure autoencoder: an SE(3)-invariant
//! frame-aggregation encoder and a frame-aggregation + frame-updating
//! decoder that reconstructs backbone coordinates from corrupted inputs.

mod checkpoint;
pub mod layers;
mod params;

pub use checkpoint::{Checkpoint, CheckpointError, TrainState};
pub use params::{Params, NODE_FEATURE_DIM};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
// Needed for f64 math in pure no_std builds; redundant when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::autodiff::{AdError, Graph, TensorData, TensorId};
use crate::backbone::BackboneStructure;
use crate::geometry::{build_frames, extract_features, knn_graph, Mat3};
use layers::{BoundParams, EdgeGeometry, EdgeIndex};

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesaeConfig {
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub hidden_dim: usize,
    /// Latent points per node/edge cloud.
    pub virtual_points: usize,
    /// kNN graph degree.
    pub neighbors: usize,
}

impl Default for DesaeConfig {
    fn default() -> Self {
        Self {
            encoder_layers: 8,
            decoder_layers: 6,
            hidden_dim: 128,
            virtual_points: 8,
            neighbors: 30,
        }
    }
}

impl DesaeConfig {
    /// Miniature configuration for gradient checks and fast tests.
    pub fn tiny() -> Self {
        Self {
            encoder_layers: 1,
            decoder_layers: 1,
            hidden_dim: 16,
            virtual_points: 2,
            neighbors: 2,
        }
    }

    /// Width of the geometric edge features: transformed + raw latent
    /// points (6m), the point-cloud dot products (m²), vec(R_ij), and the
    /// center distance.
    pub fn edge_feature_dim(&self) -> usize {
        6 * self.virtual_points + self.virtual_points * self.virtual_points + 9 + 1
    }

    pub fn validate(&self) -> Result<(), DesaeError> {
        if self.encoder_layers == 0
            || self.decoder_layers == 0
            || self.hidden_dim == 0
            || self.virtual_points == 0
            || self.neighbors == 0
        {
            return Err(DesaeError::Config(String::from(
                "all dimensions must be positive",
            )));
        }
        if self.hidden_dim % 4 != 0 {
            return Err(DesaeError::Config(String::from(
                "hidden_dim must be divisible by 4",
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DesaeError {
    Config(String),
    Autodiff(AdError),
}

impl core::fmt::Display for DesaeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::Config(msg) => write!(f, "bad model config: {msg}"),
            Self::Autodiff(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for DesaeError {}

impl From<AdError> for DesaeError {
    fn from(e: AdError) -> Self {
        Self::Autodiff(e)
    }
}

/// Quaternion (w, x, y, z) to rotation matrix.
///
/// The quaternion is normalized first; below norm 1e-8 the identity is
/// returned. Because every entry is quadratic in q, quat_to_rot(-q) is
/// bitwise identical to quat_to_rot(q).
pub fn quat_to_rot(q: [f64; 4]) -> Mat3 {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if n < 1e-8 {
        return crate::geometry::IDENTITY3;
    }
    let [w, x, y, z] = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
    [
        [
            w * w + x * x - y * y - z * z,
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            w * w - x * x + y * y - z * z,
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            w * w - x * x - y * y + z * z,
        ],
    ]
}

/// Invariant per-residue input features: (sin, cos) of φ/ψ/ω/α/β/γ and the
/// four bond lengths; masked entries are zeroed. No sequence information.
pub fn node_features(s: &BackboneStructure) -> TensorData {
    let f = extract_features(s);
    let l = s.len();
    let mut data = vec![0.0f64; l * NODE_FEATURE_DIM];
    let angles: [(&Vec<f64>, &Vec<bool>); 6] = [
        (&f.phi, &f.phi_mask),
        (&f.psi, &f.psi_mask),
        (&f.omega, &f.omega_mask),
        (&f.alpha, &f.alpha_mask),
        (&f.beta, &f.beta_mask),
        (&f.gamma, &f.gamma_mask),
    ];
    for i in 0..l {
        let row = &mut data[i * NODE_FEATURE_DIM..(i + 1) * NODE_FEATURE_DIM];
        for (slot, (vals, mask)) in angles.iter().enumerate() {
            if mask[i] {
                row[2 * slot] = vals[i].sin();
                row[2 * slot + 1] = vals[i].cos();
            }
        }
        for b in 0..4 {
            if f.bond_mask[i][b] {
                row[12 + b] = f.bond_lengths[i][b];
            }
        }
    }
    TensorData::new(&[l, NODE_FEATURE_DIM], data)
}

/// Graph handles produced by one forward construction.
pub struct GraphForward {
    /// Bound parameter leaves in declaration order (empty for constants).
    pub param_ids: Vec<TensorId>,
    /// Decoded [L, 4, 3] coordinates after every decoder layer.
    pub layer_coords: Vec<TensorId>,
    /// Final encoder node embeddings [L, D] and edge embeddings [E, D].
    pub encoder_h: TensorId,
    pub encoder_e: TensorId,
}

/// Values extracted from an inference forward pass.
pub struct ForwardOutput {
    /// Coordinates per decoder layer, each `[L][4][3]`.
    pub layer_coords: Vec<Vec<[[f64; 3]; 4]>>,
    /// Final-layer coordinates with the input's sequence and masks.
    pub structure: BackboneStructure,
    pub encoder_h: TensorData,
    pub encoder_e: TensorData,
}

/// Model = config + parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DesaeModel {
    pub config: DesaeConfig,
    pub params: Params,
}

impl DesaeModel {
    pub fn init(config: DesaeConfig, seed: u64) -> Result<Self, DesaeError> {
        config.validate()?;
        Ok(Self {
            params: Params::init(&config, seed),
            config,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.parameter_count()
    }

    /// Build the full forward graph for one structure. With
    /// `trainable = true` parameters are differentiable leaves.
    pub fn build_forward(
        &self,
        g: &mut Graph,
        s: &BackboneStructure,
        trainable: bool,
    ) -> Result<GraphForward, DesaeError> {
        let cfg = &self.config;
        let l = s.len();
        let frame_set = build_frames(s);
        let topo = knn_graph(s, cfg.neighbors);
        let index = EdgeIndex::from_topology(&topo);

        let mut rot_data = TensorData::zeros(&[l, 3, 3]);
        let mut trans_data = TensorData::zeros(&[l, 3]);
        for (i, f) in frame_set.frames.iter().enumerate() {
            for r in 0..3 {
                for c in 0..3 {
                    rot_data.data[i * 9 + r * 3 + c] = f.rotation[r][c];
                }
                trans_data.data[i * 3 + r] = f.translation[r];
            }
        }

        let bound = BoundParams::bind(g, &self.params, trainable);
        let feats = g.constant(node_features(s));
        let mut h = layers::linear(g, feats, &bound.node_init)?;

        let rot0 = g.constant(rot_data);
        let trans0 = g.constant(trans_data);
        let enc_geo = layers::edge_geometry(g, rot0, trans0, &index)?;
        let mut e = layers::init_edge_embeddings(
            g,
            &enc_geo,
            &index,
            cfg.virtual_points,
            &bound.edge_init,
        )?;

        for layer in 0..cfg.encoder_layers {
            (h, e) = layers::frame_aggregation(
                g,
                &bound.agg[layer],
                h,
                e,
                &enc_geo,
                &index,
                cfg.virtual_points,
            )?;
        }
        let encoder_h = h;
        let encoder_e = e;

        // Decoder: refine frames, decoding coordinates after every layer.
        let mut rot = rot0;
        let mut trans = trans0;
        let mut layer_coords = Vec::with_capacity(cfg.decoder_layers);
        for layer in 0..cfg.decoder_layers {
            let geo: EdgeGeometry = layers::edge_geometry(g, rot, trans, &index)?;
            (h, e) = layers::frame_aggregation(
                g,
                &bound.agg[cfg.encoder_layers + layer],
                h,
                e,
                &geo,
                &index,
                cfg.virtual_points,
            )?;
            (rot, trans) = layers::frame_updating(
                g,
                &bound.upd[layer],
                h,
                e,
                rot,
                trans,
                &geo,
                &index,
            )?;
            let coords = layers::decode_coordinates(g, &bound.offset_head, h, rot, trans)?;
            layer_coords.push(coords);
        }

        Ok(GraphForward {
            param_ids: if trainable { bound.ids() } else { Vec::new() },
            layer_coords,
            encoder_h,
            encoder_e,
        })
    }

    /// Inference forward pass: reconstruct coordinates from (possibly
    /// corrupted) input geometry.
    pub fn forward(&self, s: &BackboneStructure) -> Result<ForwardOutput, DesaeError> {
        let mut g = Graph::new();
        let fwd = self.build_forward(&mut g, s, false)?;
        let l = s.len();
        let unpack = |t: &TensorData| -> Vec<[[f64; 3]; 4]> {
            let mut out = vec![[[0.0; 3]; 4]; l];
            for i in 0..l {
                for a in 0..4 {
                    for k in 0..3 {
                        out[i][a][k] = t.data[i * 12 + a * 3 + k];
                    }
                }
            }
            out
        };
        let layer_coords: Vec<Vec<[[f64; 3]; 4]>> = fwd
            .layer_coords
            .iter()
            .map(|&id| unpack(g.value(id)))
            .collect();
        let final_coords = layer_coords.last().expect("decoder has layers").clone();
        let structure = BackboneStructure {
            id: s.id.clone(),
            sequence: s.sequence.clone(),
            coords: final_coords,
            atom_mask: s.atom_mask.clone(),
            plddt: s.plddt.clone(),
        };
        Ok(ForwardOutput {
            layer_coords,
            structure,
            encoder_h: g.value(fwd.encoder_h).clone(),
            encoder_e: g.value(fwd.encoder_e).clone(),
        })
    }
}
