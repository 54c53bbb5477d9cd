//! Finite-difference validation: every op over many random shapes, each
//! network block, and the end-to-end model + composite loss on a
//! miniature configuration.

use desae_core::autodiff::opcheck::{check_op, ALL_OPS};
use desae_core::autodiff::gradcheck::check_gradients_steps;
use desae_core::autodiff::{Graph, TensorData, TensorId};
use desae_core::desae::layers::{self, BoundParams, EdgeIndex};
use desae_core::desae::{DesaeConfig, DesaeModel};
use desae_core::geometry::knn_graph;
use desae_core::loss::composite_loss_graph_with;
use desae_core::rng::SeededRng;
use desae_core::synthetic;

#[test]
fn every_op_fifty_random_shapes() {
    for op in ALL_OPS {
        let mut worst = 0.0f64;
        for seed in 0..50 {
            let check = check_op(op, seed).unwrap_or_else(|e| panic!("{op} seed {seed}: {e}"));
            worst = worst.max(check.max_rel_err);
            check.assert_within(1e-4, &format!("{op} seed {seed}"));
        }
        println!("op {op:12} worst rel err {worst:.3e} over 50 seeds");
    }
}

fn mini_config() -> DesaeConfig {
    DesaeConfig {
        encoder_layers: 1,
        decoder_layers: 1,
        hidden_dim: 16,
        virtual_points: 2,
        neighbors: 2,
    }
}

/// Random valid frames + embeddings for layer-level checks.
struct LayerFixture {
    g: Graph,
    h: TensorId,
    e: TensorId,
    rot: TensorId,
    trans: TensorId,
    index: EdgeIndex,
    bound: BoundParams,
    model: DesaeModel,
}

fn layer_fixture(seed: u64) -> LayerFixture {
    let cfg = mini_config();
    let model = DesaeModel::init(cfg, seed).unwrap();
    let s = synthetic::mixed_chain("gx", 5, 0.1, seed + 50);
    let topo = knn_graph(&s, cfg.neighbors);
    let index = EdgeIndex::from_topology(&topo);
    let frames = desae_core::geometry::build_frames(&s);

    let mut g = Graph::new();
    let bound = BoundParams::bind(&mut g, &model.params, true);
    let mut rng = SeededRng::new(seed + 99);
    let h = g.leaf(TensorData::from_fn(&[5, cfg.hidden_dim], |_| {
        rng.uniform_in(-1.0, 1.0)
    }));
    let e = g.leaf(TensorData::from_fn(
        &[index.edge_count(), cfg.hidden_dim],
        |_| rng.uniform_in(-1.0, 1.0),
    ));
    let mut rot_data = TensorData::zeros(&[5, 3, 3]);
    let mut trans_data = TensorData::zeros(&[5, 3]);
    for (i, f) in frames.frames.iter().enumerate() {
        for r in 0..3 {
            for c in 0..3 {
                rot_data.data[i * 9 + r * 3 + c] = f.rotation[r][c];
            }
            trans_data.data[i * 3 + r] = f.translation[r];
        }
    }
    let rot = g.constant(rot_data);
    let trans = g.constant(trans_data);
    LayerFixture {
        g,
        h,
        e,
        rot,
        trans,
        index,
        bound,
        model,
    }
}

fn differentiable_leaves(g: &Graph) -> Vec<TensorId> {
    (0..g.len())
        .filter(|&i| g.is_leaf(i) && g.requires_grad(i))
        .collect()
}

#[test]
fn frame_aggregation_layer_gradients() {
    let mut fx = layer_fixture(3);
    let geo = layers::edge_geometry(&mut fx.g, fx.rot, fx.trans, &fx.index).unwrap();
    let (h2, e2) = layers::frame_aggregation(
        &mut fx.g,
        &fx.bound.agg[0],
        fx.h,
        fx.e,
        &geo,
        &fx.index,
        fx.model.config.virtual_points,
    )
    .unwrap();
    let hs = fx.g.sum_all(h2).unwrap();
    let es = fx.g.sum_all(e2).unwrap();
    let es3 = fx.g.mul_scalar(es, 0.37).unwrap();
    let loss = fx.g.add(hs, es3).unwrap();
    let leaves = differentiable_leaves(&fx.g);
    let check =
        check_gradients_steps(&mut fx.g, &leaves, loss, &[1e-4, 1e-5, 1e-6], 1e-4).unwrap();
    println!("frame_aggregation: {}", check.describe());
    check.assert_within(1e-3, "frame_aggregation layer");
}

#[test]
fn frame_updating_layer_gradients() {
    let mut fx = layer_fixture(4);
    let geo = layers::edge_geometry(&mut fx.g, fx.rot, fx.trans, &fx.index).unwrap();
    let (rot2, trans2) = layers::frame_updating(
        &mut fx.g,
        &fx.bound.upd[0],
        fx.h,
        fx.e,
        fx.rot,
        fx.trans,
        &geo,
        &fx.index,
    )
    .unwrap();
    let rs = fx.g.sum_all(rot2).unwrap();
    let ts = fx.g.sum_all(trans2).unwrap();
    let ts2 = fx.g.mul_scalar(ts, 0.11).unwrap();
    let loss = fx.g.add(rs, ts2).unwrap();
    let leaves = differentiable_leaves(&fx.g);
    let check =
        check_gradients_steps(&mut fx.g, &leaves, loss, &[1e-4, 1e-5, 1e-6], 1e-4).unwrap();
    println!("frame_updating: {}", check.describe());
    check.assert_within(1e-3, "frame_updating layer");
}

#[test]
fn decode_coordinates_gradients() {
    let mut fx = layer_fixture(5);
    let coords = layers::decode_coordinates(
        &mut fx.g,
        &fx.bound.offset_head,
        fx.h,
        fx.rot,
        fx.trans,
    )
    .unwrap();
    let loss = fx.g.sum_all(coords).unwrap();
    let leaves = differentiable_leaves(&fx.g);
    let check =
        check_gradients_steps(&mut fx.g, &leaves, loss, &[1e-4, 1e-5, 1e-6], 1e-4).unwrap();
    println!("decode_coordinates: {}", check.describe());
    check.assert_within(1e-3, "decode_coordinates");
}

#[test]
fn end_to_end_model_and_composite_loss_gradients() {
    let cfg = mini_config();
    let model = DesaeModel::init(cfg, 11).unwrap();
    let target = synthetic::mixed_chain("gt", 5, 0.1, 12);
    let (corrupted, _) = desae_core::geometry::corrupt_structure(&target, 0.2, 13).unwrap();

    let mut g = Graph::new();
    let fwd = model.build_forward(&mut g, &corrupted, true).unwrap();
    let lg = composite_loss_graph_with(&mut g, &fwd.layer_coords, &target, 2, 2).unwrap();
    let check =
        check_gradients_steps(&mut g, &fwd.param_ids, lg.total, &[1e-4, 1e-5, 1e-6], 1e-4)
            .unwrap();
    println!(
        "end-to-end ({} params): {}",
        fwd.param_ids.len(),
        check.describe()
    );
    check.assert_within(1e-3, "model + composite loss");
}
