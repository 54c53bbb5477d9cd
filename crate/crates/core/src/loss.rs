//! Multi-scale structure-consistency loss.
//!
//! Five terms: globally aligned RMSD, per-residue fragment RMSD, pairwise
//! fragment RMSD, neighbor-block RMSD, and a pairwise Cα distance-matrix
//! MSE. Neighborhoods and fragments are selected on the target geometry.
//! The composite loss evaluates every term at every decoder layer and
//! averages over layers; the total is the unweighted sum.
//!
//! Two routes exist: plain evaluation over coordinate arrays, and a graph
//! construction for training in which each superposition is solved on the
//! current values and frozen into the tape (the rotation is a constant in
//! backward — straight-through alignment).

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{AdError, Graph, TensorData, TensorId};
use crate::backbone::{BackboneStructure, ATOM_CA};
use crate::geometry::{distance3, kabsch_align, GeometryError, Vec3};

pub const DEFAULT_FRAGMENT_SIZE: usize = 7;
pub const DEFAULT_NEIGHBORS: usize = 30;

/// Atom coordinates of one residue, N/Cα/C/O order.
pub type ResidueAtoms = [[f64; 3]; 4];

#[derive(Debug, Clone, PartialEq)]
pub enum LossError {
    Geometry(GeometryError),
    Autodiff(AdError),
    LengthMismatch { pred: usize, target: usize },
    Empty,
}

impl core::fmt::Display for LossError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::Geometry(e) => write!(f, "{e}"),
            Self::Autodiff(e) => write!(f, "{e}"),
            Self::LengthMismatch { pred, target } => {
                write!(f, "prediction has {pred} residues, target {target}")
            }
            Self::Empty => write!(f, "empty structure"),
        }
    }
}

impl core::error::Error for LossError {}

impl From<GeometryError> for LossError {
    fn from(e: GeometryError) -> Self {
        Self::Geometry(e)
    }
}

impl From<AdError> for LossError {
    fn from(e: AdError) -> Self {
        Self::Autodiff(e)
    }
}

/// Per-term values; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub global: f64,
    pub fragment: f64,
    pub pair: f64,
    pub neighbor: f64,
    pub distance: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn close(sum: Self) -> Self {
        Self {
            total: sum.global + sum.fragment + sum.pair + sum.neighbor + sum.distance,
            ..sum
        }
    }
}

// ---------------------------------------------------------------------------
// selection on target geometry

fn ca_of(coords: &[ResidueAtoms]) -> Vec<Vec3> {
    coords.iter().map(|r| r[ATOM_CA]).collect()
}

/// Residues sorted by distance to `center` (ties by index), optionally
/// including the center itself, truncated to `count`.
fn closest_residues(ca: &[Vec3], center: usize, count: usize, include_self: bool) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = (0..ca.len())
        .filter(|&j| include_self || j != center)
        .map(|j| (distance3(&ca[center], &ca[j]), j))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.into_iter().take(count).map(|(_, j)| j).collect()
}

fn flatten(coords: &[ResidueAtoms], residues: &[usize]) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(residues.len() * 4);
    for &r in residues {
        out.extend_from_slice(&coords[r]);
    }
    out
}

fn check_lengths(pred: &[ResidueAtoms], target: &[ResidueAtoms]) -> Result<usize, LossError> {
    if pred.len() != target.len() {
        return Err(LossError::LengthMismatch {
            pred: pred.len(),
            target: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(LossError::Empty);
    }
    Ok(pred.len())
}

// ---------------------------------------------------------------------------
// plain evaluation

/// Superpose `pred` onto `target` over unmasked atoms, then RMSD.
pub fn aligned_rmsd(
    pred: &[Vec3],
    target: &[Vec3],
    mask: Option<&[bool]>,
) -> Result<f64, GeometryError> {
    Ok(kabsch_align(pred, target, mask)?.rmsd)
}

/// Aligned RMSD over the full backbone (all 4L atoms at once).
pub fn loss_global(pred: &[ResidueAtoms], target: &[ResidueAtoms]) -> Result<f64, LossError> {
    check_lengths(pred, target)?;
    let all: Vec<usize> = (0..pred.len()).collect();
    Ok(aligned_rmsd(
        &flatten(pred, &all),
        &flatten(target, &all),
        None,
    )?)
}

/// Mean over residues of the aligned RMSD of each residue's `c` spatially
/// closest residues (self included), clamped to the chain length.
pub fn loss_fragment(
    pred: &[ResidueAtoms],
    target: &[ResidueAtoms],
    c: usize,
) -> Result<f64, LossError> {
    let n = check_lengths(pred, target)?;
    let c = c.min(n);
    let ca = ca_of(target);
    let mut total = 0.0;
    for i in 0..n {
        let frag = closest_residues(&ca, i, c, true);
        total += aligned_rmsd(&flatten(pred, &frag), &flatten(target, &frag), None)?;
    }
    Ok(total / n as f64)
}

/// Mean over (residue, neighbor) pairs of the aligned RMSD of both
/// residues' fragments taken together (duplicates allowed).
pub fn loss_pair(
    pred: &[ResidueAtoms],
    target: &[ResidueAtoms],
    k: usize,
    c: usize,
) -> Result<f64, LossError> {
    let n = check_lengths(pred, target)?;
    let k = k.min(n - 1);
    let c = c.min(n);
    if k == 0 {
        return Ok(0.0);
    }
    let ca = ca_of(target);
    let fragments: Vec<Vec<usize>> = (0..n).map(|i| closest_residues(&ca, i, c, true)).collect();
    let mut total = 0.0;
    for i in 0..n {
        for &j in &closest_residues(&ca, i, k, false) {
            let mut set = fragments[i].clone();
            set.extend_from_slice(&fragments[j]);
            total += aligned_rmsd(&flatten(pred, &set), &flatten(target, &set), None)?;
        }
    }
    Ok(total / (n * k) as f64)
}

/// Mean over residues of the aligned RMSD of the 4K atoms of each
/// residue's K nearest neighbors.
pub fn loss_neighbor(
    pred: &[ResidueAtoms],
    target: &[ResidueAtoms],
    k: usize,
) -> Result<f64, LossError> {
    let n = check_lengths(pred, target)?;
    let k = k.min(n - 1);
    if k == 0 {
        return Ok(0.0);
    }
    let ca = ca_of(target);
    let mut total = 0.0;
    for i in 0..n {
        let ns = closest_residues(&ca, i, k, false);
        total += aligned_rmsd(&flatten(pred, &ns), &flatten(target, &ns), None)?;
    }
    Ok(total / n as f64)
}

/// MSE between the pairwise Cα distance matrices, diagonal excluded.
pub fn loss_distance(pred: &[ResidueAtoms], target: &[ResidueAtoms]) -> Result<f64, LossError> {
    let n = check_lengths(pred, target)?;
    if n < 2 {
        return Ok(0.0);
    }
    let cp = ca_of(pred);
    let ct = ca_of(target);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = distance3(&cp[i], &cp[j]) - distance3(&ct[i], &ct[j]);
            total += d * d;
        }
    }
    Ok(total / (n * (n - 1)) as f64)
}

/// All five terms for a single prediction.
pub fn loss_breakdown(
    pred: &[ResidueAtoms],
    target: &[ResidueAtoms],
    k: usize,
    c: usize,
) -> Result<LossBreakdown, LossError> {
    Ok(LossBreakdown::close(LossBreakdown {
        global: loss_global(pred, target)?,
        fragment: loss_fragment(pred, target, c)?,
        pair: loss_pair(pred, target, k, c)?,
        neighbor: loss_neighbor(pred, target, k)?,
        distance: loss_distance(pred, target)?,
        total: 0.0,
    }))
}

/// Each term evaluated at every decoder layer and averaged over layers.
pub fn composite_loss(
    per_layer_preds: &[Vec<ResidueAtoms>],
    target: &[ResidueAtoms],
) -> Result<LossBreakdown, LossError> {
    composite_loss_with(per_layer_preds, target, DEFAULT_NEIGHBORS, DEFAULT_FRAGMENT_SIZE)
}

pub fn composite_loss_with(
    per_layer_preds: &[Vec<ResidueAtoms>],
    target: &[ResidueAtoms],
    k: usize,
    c: usize,
) -> Result<LossBreakdown, LossError> {
    if per_layer_preds.is_empty() {
        return Err(LossError::Empty);
    }
    let mut acc = LossBreakdown::default();
    for pred in per_layer_preds {
        let b = loss_breakdown(pred, target, k, c)?;
        acc.global += b.global;
        acc.fragment += b.fragment;
        acc.pair += b.pair;
        acc.neighbor += b.neighbor;
        acc.distance += b.distance;
    }
    let scale = 1.0 / per_layer_preds.len() as f64;
    acc.global *= scale;
    acc.fragment *= scale;
    acc.pair *= scale;
    acc.neighbor *= scale;
    acc.distance *= scale;
    Ok(LossBreakdown::close(acc))
}

// ---------------------------------------------------------------------------
// graph construction for training

/// Graph ids of the averaged terms and the total.
pub struct LossGraph {
    pub global: TensorId,
    pub fragment: TensorId,
    pub pair: TensorId,
    pub neighbor: TensorId,
    pub distance: TensorId,
    pub total: TensorId,
}

impl LossGraph {
    /// Read the current values into a breakdown.
    pub fn values(&self, g: &Graph) -> LossBreakdown {
        LossBreakdown {
            global: g.value(self.global).item(),
            fragment: g.value(self.fragment).item(),
            pair: g.value(self.pair).item(),
            neighbor: g.value(self.neighbor).item(),
            distance: g.value(self.distance).item(),
            total: g.value(self.total).item(),
        }
    }
}

/// Build `Σ_sets rmsd(aligned pred_set, target_set) / n_sets` for a batch
/// of atom sets gathered from a `[L, 4, 3]` coordinate tensor.
///
/// `sets` lists the residue members of every set; alignment transforms are
/// solved on the tensor's current values and enter the tape as constants.
fn batched_aligned_rmsd(
    g: &mut Graph,
    coords: TensorId,
    target: &[ResidueAtoms],
    sets: &[Vec<usize>],
) -> Result<TensorId, LossError> {
    let n_sets = sets.len();
    let set_len = sets[0].len();
    let atoms = set_len * 4;
    debug_assert!(sets.iter().all(|s| s.len() == set_len));

    // Current prediction values drive the (frozen) superpositions.
    let pred_now = g.value(coords).data.clone();
    let read_pred = |r: usize, a: usize| -> Vec3 {
        [
            pred_now[r * 12 + a * 3],
            pred_now[r * 12 + a * 3 + 1],
            pred_now[r * 12 + a * 3 + 2],
        ]
    };

    let mut rot_t = TensorData::zeros(&[n_sets, 3, 3]);
    let mut trans = TensorData::zeros(&[n_sets, 1, 3]);
    let mut target_gathered = TensorData::zeros(&[n_sets, atoms, 3]);
    let mut rows = Vec::with_capacity(n_sets * set_len);
    for (si, set) in sets.iter().enumerate() {
        let mut p = Vec::with_capacity(atoms);
        let mut t = Vec::with_capacity(atoms);
        for &r in set {
            rows.push(r);
            for a in 0..4 {
                p.push(read_pred(r, a));
                t.push(target[r][a]);
            }
        }
        let sp = kabsch_align(&p, &t, None)?;
        for i in 0..3 {
            for j in 0..3 {
                // store Rᵀ so row vectors multiply from the right
                rot_t.data[si * 9 + i * 3 + j] = sp.rotation[j][i];
            }
            trans.data[si * 3 + i] = sp.translation[i];
        }
        for (ai, atom) in t.iter().enumerate() {
            for k in 0..3 {
                target_gathered.data[(si * atoms + ai) * 3 + k] = atom[k];
            }
        }
    }

    let l = g.shape(coords)[0];
    let flat = g.reshape(coords, &[l * 4, 3])?;
    let atom_rows: Vec<usize> = rows
        .iter()
        .flat_map(|&r| (0..4).map(move |a| r * 4 + a))
        .collect();
    let gathered = g.gather(flat, &atom_rows)?;
    let by_set = g.reshape(gathered, &[n_sets, atoms, 3])?;
    let rot_c = g.constant(rot_t);
    let trans_c = g.constant(trans);
    let target_c = g.constant(target_gathered);
    let moved = g.matmul(by_set, rot_c)?;
    let aligned = g.add(moved, trans_c)?;
    let diff = g.sub(aligned, target_c)?;
    let sq = g.square(diff)?;
    let s2 = g.sum_axis(sq, 2)?;
    let s1 = g.sum_axis(s2, 1)?;
    let msd = g.mul_scalar(s1, 1.0 / atoms as f64)?;
    let rmsd = g.sqrt(msd)?;
    Ok(g.mean_all(rmsd)?)
}

/// Pairwise Cα distance-matrix MSE as graph ops. The diagonal is excluded
/// by pinning both matrices to the same constant there.
fn distance_term(
    g: &mut Graph,
    coords: TensorId,
    target: &[ResidueAtoms],
) -> Result<TensorId, LossError> {
    let n = target.len();
    let l = g.shape(coords)[0];
    let flat = g.reshape(coords, &[l * 4, 3])?;
    let ca_rows: Vec<usize> = (0..n).map(|r| r * 4 + ATOM_CA).collect();
    let ca = g.gather(flat, &ca_rows)?;
    let a = g.reshape(ca, &[n, 1, 3])?;
    let b = g.reshape(ca, &[1, n, 3])?;
    let diff = g.sub(a, b)?;
    let sq = g.square(diff)?;
    let s2 = g.sum_axis(sq, 2)?;
    // 1 on the diagonal keeps sqrt differentiable at the zero
    // self-distances; both matrices agree there so the MSE is unaffected.
    let floor = TensorData::from_fn(&[n, n, 1], |i| if i / n == i % n { 1.0 } else { 1e-12 });
    let floor_c = g.constant(floor);
    let s2f = g.add(s2, floor_c)?;
    let d_pred = g.sqrt(s2f)?;

    let ct = ca_of(target);
    let d_target = TensorData::from_fn(&[n, n, 1], |i| {
        let (r, c) = (i / n, i % n);
        if r == c {
            1.0
        } else {
            distance3(&ct[r], &ct[c])
        }
    });
    let d_target_c = g.constant(d_target);
    let d = g.sub(d_pred, d_target_c)?;
    let dsq = g.square(d)?;
    let total = g.sum_all(dsq)?;
    Ok(g.mul_scalar(total, 1.0 / (n * (n - 1)).max(1) as f64)?)
}

/// Build the composite loss over all decoder layers against a target
/// structure, with default fragment/neighbor sizes.
pub fn composite_loss_graph(
    g: &mut Graph,
    layer_coords: &[TensorId],
    target: &BackboneStructure,
) -> Result<LossGraph, LossError> {
    composite_loss_graph_with(
        g,
        layer_coords,
        target,
        DEFAULT_NEIGHBORS,
        DEFAULT_FRAGMENT_SIZE,
    )
}

pub fn composite_loss_graph_with(
    g: &mut Graph,
    layer_coords: &[TensorId],
    target: &BackboneStructure,
    k: usize,
    c: usize,
) -> Result<LossGraph, LossError> {
    if layer_coords.is_empty() {
        return Err(LossError::Empty);
    }
    let n = target.len();
    if n == 0 {
        return Err(LossError::Empty);
    }
    let target_atoms: Vec<ResidueAtoms> = target.coords.clone();
    let k_eff = k.min(n - 1);
    let c_eff = c.min(n);
    let ca = ca_of(&target_atoms);

    let whole: Vec<Vec<usize>> = vec![(0..n).collect()];
    let fragments: Vec<Vec<usize>> = (0..n)
        .map(|i| closest_residues(&ca, i, c_eff, true))
        .collect();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| closest_residues(&ca, i, k_eff, false))
        .collect();
    let mut pair_sets: Vec<Vec<usize>> = Vec::with_capacity(n * k_eff);
    for i in 0..n {
        for &j in &neighbors[i] {
            let mut set = fragments[i].clone();
            set.extend_from_slice(&fragments[j]);
            pair_sets.push(set);
        }
    }

    let mut sums: Option<[TensorId; 5]> = None;
    for &coords in layer_coords {
        let global = batched_aligned_rmsd(g, coords, &target_atoms, &whole)?;
        let fragment = batched_aligned_rmsd(g, coords, &target_atoms, &fragments)?;
        let (pair, neighbor) = if k_eff == 0 {
            let zero = g.scalar_constant(0.0);
            (zero, zero)
        } else {
            (
                batched_aligned_rmsd(g, coords, &target_atoms, &pair_sets)?,
                batched_aligned_rmsd(g, coords, &target_atoms, &neighbors)?,
            )
        };
        let distance = distance_term(g, coords, &target_atoms)?;
        sums = Some(match sums {
            None => [global, fragment, pair, neighbor, distance],
            Some([sg, sf, sp, sn, sd]) => [
                g.add(sg, global)?,
                g.add(sf, fragment)?,
                g.add(sp, pair)?,
                g.add(sn, neighbor)?,
                g.add(sd, distance)?,
            ],
        });
    }
    let [sg, sf, sp, sn, sd] = sums.expect("at least one layer");
    let scale = 1.0 / layer_coords.len() as f64;
    let global = g.mul_scalar(sg, scale)?;
    let fragment = g.mul_scalar(sf, scale)?;
    let pair = g.mul_scalar(sp, scale)?;
    let neighbor = g.mul_scalar(sn, scale)?;
    let distance = g.mul_scalar(sd, scale)?;
    let t1 = g.add(global, fragment)?;
    let t2 = g.add(t1, pair)?;
    let t3 = g.add(t2, neighbor)?;
    let total = g.add(t3, distance)?;
    Ok(LossGraph {
        global,
        fragment,
        pair,
        neighbor,
        distance,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn jostle(coords: &[ResidueAtoms], sigma: f64, seed: u64) -> Vec<ResidueAtoms> {
        let mut rng = SeededRng::new(seed);
        coords
            .iter()
            .map(|res| {
                let mut out = *res;
                for atom in out.iter_mut() {
                    for v in atom.iter_mut() {
                        *v += sigma * rng.normal();
                    }
                }
                out
            })
            .collect()
    }

    fn rigid(coords: &[ResidueAtoms], seed: u64) -> Vec<ResidueAtoms> {
        let mut rng = SeededRng::new(seed);
        let r = rng.rotation();
        let t = [
            rng.uniform_in(-8.0, 8.0),
            rng.uniform_in(-8.0, 8.0),
            rng.uniform_in(-8.0, 8.0),
        ];
        coords
            .iter()
            .map(|res| {
                let mut out = *res;
                for atom in out.iter_mut() {
                    let m = crate::geometry::mat_vec(&r, atom);
                    *atom = [m[0] + t[0], m[1] + t[1], m[2] + t[2]];
                }
                out
            })
            .collect()
    }

    #[test]
    fn all_terms_zero_on_identity() {
        let s = crate::synthetic::mixed_chain("l", 9, 0.1, 1);
        let b = loss_breakdown(&s.coords, &s.coords, 30, 7).unwrap();
        assert!(b.global < 1e-9 && b.fragment < 1e-9 && b.pair < 1e-9);
        assert!(b.neighbor < 1e-9 && b.distance < 1e-12);
        assert!(b.total < 1e-8);
    }

    #[test]
    fn rigid_motion_is_absorbed() {
        let s = crate::synthetic::mixed_chain("l", 8, 0.1, 2);
        let moved = rigid(&s.coords, 3);
        let b = loss_breakdown(&moved, &s.coords, 30, 7).unwrap();
        assert!(b.total < 1e-6, "total {}", b.total);
    }

    #[test]
    fn distance_two_residue_hand_value() {
        // Two Cα at distance 3 vs distance 4: squared error 1 in both
        // off-diagonal cells, mean 1.
        let mut a = vec![[[0.0; 3]; 4]; 2];
        a[1][ATOM_CA] = [3.0, 0.0, 0.0];
        let mut b = vec![[[0.0; 3]; 4]; 2];
        b[1][ATOM_CA] = [4.0, 0.0, 0.0];
        assert!((loss_distance(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn neighbor_k1_is_nearest_residue_rmsd() {
        let s = crate::synthetic::mixed_chain("l", 5, 0.1, 4);
        let pred = jostle(&s.coords, 0.2, 5);
        let k1 = loss_neighbor(&pred, &s.coords, 1).unwrap();
        // recompute by hand
        let ca = ca_of(&s.coords);
        let mut total = 0.0;
        for i in 0..5 {
            let j = closest_residues(&ca, i, 1, false)[0];
            total += aligned_rmsd(&pred[j], &s.coords[j], None).unwrap();
        }
        assert!((k1 - total / 5.0).abs() < 1e-12);
    }

    #[test]
    fn clamping_small_chains() {
        let s = crate::synthetic::mixed_chain("l", 3, 0.1, 6);
        let pred = jostle(&s.coords, 0.1, 7);
        // c > n and k > n-1 both clamp without error.
        assert!(loss_fragment(&pred, &s.coords, 7).is_ok());
        assert!(loss_pair(&pred, &s.coords, 30, 7).is_ok());
        assert!(loss_neighbor(&pred, &s.coords, 30).is_ok());
    }

    #[test]
    fn composite_two_layers_is_mean_of_singles() {
        let s = crate::synthetic::mixed_chain("l", 6, 0.1, 8);
        let p1 = jostle(&s.coords, 0.3, 9);
        let p2 = jostle(&s.coords, 0.05, 10);
        let both = composite_loss(&[p1.clone(), p2.clone()], &s.coords).unwrap();
        let b1 = composite_loss(&[p1], &s.coords).unwrap();
        let b2 = composite_loss(&[p2], &s.coords).unwrap();
        for (two, (one, other)) in [
            (both.global, (b1.global, b2.global)),
            (both.fragment, (b1.fragment, b2.fragment)),
            (both.pair, (b1.pair, b2.pair)),
            (both.neighbor, (b1.neighbor, b2.neighbor)),
            (both.distance, (b1.distance, b2.distance)),
        ] {
            assert!((two - 0.5 * (one + other)).abs() < 1e-12);
        }
        assert!(
            (both.total
                - (both.global + both.fragment + both.pair + both.neighbor + both.distance))
                .abs()
                < 1e-10
        );
    }

    #[test]
    fn graph_loss_matches_plain_evaluation() {
        let s = crate::synthetic::mixed_chain("l", 7, 0.1, 11);
        let pred = jostle(&s.coords, 0.25, 12);
        let plain = composite_loss(&[pred.clone()], &s.coords).unwrap();

        let mut g = Graph::new();
        let mut data = TensorData::zeros(&[7, 4, 3]);
        for (i, res) in pred.iter().enumerate() {
            for a in 0..4 {
                for k in 0..3 {
                    data.data[i * 12 + a * 3 + k] = res[a][k];
                }
            }
        }
        let coords = g.leaf(data);
        let lg = composite_loss_graph(&mut g, &[coords], &s).unwrap();
        let values = lg.values(&g);
        assert!((values.global - plain.global).abs() < 1e-9);
        assert!((values.fragment - plain.fragment).abs() < 1e-9);
        assert!((values.pair - plain.pair).abs() < 1e-9);
        assert!((values.neighbor - plain.neighbor).abs() < 1e-9);
        assert!((values.distance - plain.distance).abs() < 1e-9);
        assert!((values.total - plain.total).abs() < 1e-8);
    }

    #[test]
    fn graph_loss_gradients_match_finite_differences() {
        let s = crate::synthetic::mixed_chain("l", 5, 0.1, 13);
        let pred = jostle(&s.coords, 0.2, 14);
        let mut g = Graph::new();
        let mut data = TensorData::zeros(&[5, 4, 3]);
        for (i, res) in pred.iter().enumerate() {
            for a in 0..4 {
                for k in 0..3 {
                    data.data[i * 12 + a * 3 + k] = res[a][k];
                }
            }
        }
        let coords = g.leaf(data);
        let lg = composite_loss_graph_with(&mut g, &[coords], &s, 3, 3).unwrap();
        let check = crate::autodiff::check_gradients(&mut g, &[coords], lg.total, 1e-4).unwrap();
        check.assert_within(1e-3, "composite loss vs frozen-alignment FD");
    }
}
