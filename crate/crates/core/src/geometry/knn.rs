//! k-nearest-neighbor graph on Cα positions.

use alloc::vec::Vec;

use super::distance3;
use crate::backbone::{BackboneStructure, ATOM_CA};

/// Neighbor lists, one per residue, sorted by ascending Cα distance with
/// ties broken by ascending index; self excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphTopology {
    pub neighbors: Vec<Vec<usize>>,
}

impl GraphTopology {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// Neighbor count per node; uniform by construction.
    pub fn degree(&self) -> usize {
        self.neighbors.first().map_or(0, Vec::len)
    }

    /// Flattened (source, neighbor) pairs in row-major order.
    pub fn edges(&self) -> (Vec<usize>, Vec<usize>) {
        let mut src = Vec::new();
        let mut dst = Vec::new();
        for (i, ns) in self.neighbors.iter().enumerate() {
            for &j in ns {
                src.push(i);
                dst.push(j);
            }
        }
        (src, dst)
    }
}

/// Each node gets min(k, L-1) neighbors.
pub fn knn_graph(s: &BackboneStructure, k: usize) -> GraphTopology {
    let ca: Vec<[f64; 3]> = s.coords.iter().map(|r| r[ATOM_CA]).collect();
    knn_of_points(&ca, k)
}

/// kNN over raw points, used for both structures and loss neighborhoods.
pub fn knn_of_points(points: &[[f64; 3]], k: usize) -> GraphTopology {
    let l = points.len();
    let take = k.min(l.saturating_sub(1));
    let mut neighbors = Vec::with_capacity(l);
    for i in 0..l {
        let mut order: Vec<(f64, usize)> = (0..l)
            .filter(|&j| j != i)
            .map(|j| (distance3(&points[i], &points[j]), j))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        neighbors.push(order.into_iter().take(take).map(|(_, j)| j).collect());
    }
    GraphTopology { neighbors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use alloc::vec;

    fn collinear_three() -> BackboneStructure {
        let mut coords = vec![[[0.0; 3]; 4]; 3];
        for (i, c) in coords.iter_mut().enumerate() {
            c[ATOM_CA] = [3.8 * i as f64, 0.0, 0.0];
        }
        BackboneStructure {
            id: "k".into(),
            sequence: vec!['A'; 3],
            coords,
            atom_mask: vec![[true; 4]; 3],
            plddt: None,
        }
    }

    #[test]
    fn tie_breaks_by_index() {
        let g = knn_graph(&collinear_three(), 1);
        // The middle residue is 3.8 Å from both ends; index 0 wins.
        assert_eq!(g.neighbors[1], vec![0]);
    }

    #[test]
    fn k_clamped_to_l_minus_one() {
        let mut s = collinear_three();
        s.sequence.push('A');
        s.sequence.push('A');
        s.coords.push([[0.0; 3]; 4]);
        s.coords.push([[0.0; 3]; 4]);
        s.coords[3][ATOM_CA] = [0.0, 3.8, 0.0];
        s.coords[4][ATOM_CA] = [0.0, 0.0, 3.8];
        s.atom_mask.push([true; 4]);
        s.atom_mask.push([true; 4]);
        let g = knn_graph(&s, 10);
        for ns in &g.neighbors {
            assert_eq!(ns.len(), 4);
        }
    }

    #[test]
    fn matches_brute_force_on_random_cloud() {
        let mut rng = SeededRng::new(99);
        let points: Vec<[f64; 3]> = (0..50)
            .map(|_| {
                [
                    rng.uniform_in(-20.0, 20.0),
                    rng.uniform_in(-20.0, 20.0),
                    rng.uniform_in(-20.0, 20.0),
                ]
            })
            .collect();
        let g = knn_of_points(&points, 30);
        for i in 0..points.len() {
            let mut pairs: Vec<(f64, usize)> = (0..points.len())
                .filter(|&j| j != i)
                .map(|j| (distance3(&points[i], &points[j]), j))
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let want: Vec<usize> = pairs.into_iter().take(30).map(|(_, j)| j).collect();
            assert_eq!(g.neighbors[i], want);
        }
    }
}
