//! Property tests for the geometry and statistics invariants.

use desae_core::geometry::{
    dihedral, extract_features, kabsch_align, wrap_angle,
};
use desae_core::rng::SeededRng;
use desae_core::stats::{
    build_histogram, cosine_similarity, euclidean_distance, kl_divergence, wasserstein_1d,
    BinSpec, Histogram,
};
use desae_core::synthetic;
use proptest::prelude::*;

fn finite_point() -> impl Strategy<Value = [f64; 3]> {
    [-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0]
}

fn counts_to_hist(counts: Vec<u32>) -> Option<Histogram> {
    let samples: Vec<f64> = counts
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| core::iter::repeat(i as f64 + 0.5).take(c as usize))
        .collect();
    build_histogram(&samples, &BinSpec::new(0.0, counts.len() as f64, counts.len())).ok()
}

proptest! {
    #[test]
    fn dihedral_symmetric_under_reversal_antisymmetric_under_mirror(
        p1 in finite_point(), p2 in finite_point(),
        p3 in finite_point(), p4 in finite_point(),
    ) {
        // Reversing the atom order preserves the signed torsion (both
        // atan2 arguments are invariant: n1 → -n2, n2 → -n1, b2 → -b2);
        // mirroring flips its sign.
        if let (Ok(fwd), Ok(rev)) = (dihedral(&p1, &p2, &p3, &p4), dihedral(&p4, &p3, &p2, &p1)) {
            prop_assert!(wrap_angle(fwd - rev).abs() < 1e-9, "fwd {fwd} rev {rev}");
        }
        let m = |p: &[f64; 3]| [-p[0], p[1], p[2]];
        if let (Ok(fwd), Ok(mir)) = (
            dihedral(&p1, &p2, &p3, &p4),
            dihedral(&m(&p1), &m(&p2), &m(&p3), &m(&p4)),
        ) {
            // modulo the wrap at the ±π branch point
            let diff = wrap_angle(fwd + mir).abs();
            let at_branch = (fwd.abs() - core::f64::consts::PI).abs() < 1e-9;
            prop_assert!(diff < 1e-9 || at_branch, "fwd {fwd} mirrored {mir}");
        }
    }

    #[test]
    fn histogram_density_sums_to_one(samples in prop::collection::vec(-0.999f64..0.999, 1..200)) {
        let h = build_histogram(&samples, &BinSpec::new(-1.0, 1.0, 16)).unwrap();
        let total: f64 = h.density.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert_eq!(h.out_of_range, 0);
    }

    #[test]
    fn kl_nonnegative_and_zero_iff_equal(
        a in prop::collection::vec(0u32..40, 8),
        b in prop::collection::vec(0u32..40, 8),
    ) {
        let (Some(p), Some(q)) = (counts_to_hist(a.clone()), counts_to_hist(b.clone())) else {
            return Ok(());
        };
        let kl = kl_divergence(&p, &q).unwrap();
        prop_assert!(kl >= 0.0);
        if p.density == q.density {
            prop_assert!(kl < 1e-12);
        } else {
            prop_assert!(kl > 0.0);
        }
    }

    #[test]
    fn wasserstein_symmetry_and_triangle(
        a in prop::collection::vec(0u32..30, 6),
        b in prop::collection::vec(0u32..30, 6),
        c in prop::collection::vec(0u32..30, 6),
    ) {
        let (Some(p), Some(q), Some(r)) =
            (counts_to_hist(a), counts_to_hist(b), counts_to_hist(c))
        else {
            return Ok(());
        };
        let pq = wasserstein_1d(&p, &q).unwrap();
        let qp = wasserstein_1d(&q, &p).unwrap();
        prop_assert!((pq - qp).abs() < 1e-9, "symmetry");
        let qr = wasserstein_1d(&q, &r).unwrap();
        let pr = wasserstein_1d(&p, &r).unwrap();
        prop_assert!(pr <= pq + qr + 1e-9, "triangle: {pr} > {pq} + {qr}");
    }

    #[test]
    fn cosine_invariant_to_positive_scaling(
        a in prop::collection::vec(0u32..30, 6),
        b in prop::collection::vec(0u32..30, 6),
        scale in 2usize..5,
    ) {
        let (Some(p), Some(q)) = (counts_to_hist(a.clone()), counts_to_hist(b)) else {
            return Ok(());
        };
        let scaled: Vec<u32> = a.iter().map(|&v| v * scale as u32).collect();
        let Some(ps) = counts_to_hist(scaled) else { return Ok(()); };
        match (cosine_similarity(&p, &q), cosine_similarity(&ps, &q)) {
            (Ok(c1), Ok(c2)) => prop_assert!((c1 - c2).abs() < 1e-9),
            (Err(_), Err(_)) => {}
            (l, r) => prop_assert!(false, "zero-vector disagreement: {l:?} vs {r:?}"),
        }
    }

    #[test]
    fn euclidean_zero_iff_identical_counts(
        a in prop::collection::vec(0u32..30, 6),
    ) {
        let Some(p) = counts_to_hist(a) else { return Ok(()); };
        prop_assert_eq!(euclidean_distance(&p, &p).unwrap(), 0.0);
    }
}

#[test]
fn features_invariant_under_rigid_motion() {
    let mut rng = SeededRng::new(31);
    for trial in 0..20 {
        let s = synthetic::mixed_chain("ri", 10, 0.1, 400 + trial);
        let rot = rng.rotation();
        let trans = [
            rng.uniform_in(-20.0, 20.0),
            rng.uniform_in(-20.0, 20.0),
            rng.uniform_in(-20.0, 20.0),
        ];
        let moved = s.transformed(&rot, &trans);
        let fa = extract_features(&s);
        let fb = extract_features(&moved);
        for i in 0..s.len() {
            assert!((wrap_angle(fa.phi[i] - fb.phi[i])).abs() < 1e-6);
            assert!((wrap_angle(fa.psi[i] - fb.psi[i])).abs() < 1e-6);
            assert!((wrap_angle(fa.omega[i] - fb.omega[i])).abs() < 1e-6);
            assert!((fa.alpha[i] - fb.alpha[i]).abs() < 1e-6);
            assert!((fa.beta[i] - fb.beta[i]).abs() < 1e-6);
            assert!((fa.gamma[i] - fb.gamma[i]).abs() < 1e-6);
            for b in 0..4 {
                assert!((fa.bond_lengths[i][b] - fb.bond_lengths[i][b]).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn kabsch_absorbs_rigid_motion_of_self() {
    let mut rng = SeededRng::new(32);
    for trial in 0..20 {
        let s = synthetic::mixed_chain("ka", 12, 0.1, 500 + trial);
        let rot = rng.rotation();
        let trans = [rng.uniform_in(-20.0, 20.0), 0.0, 4.0];
        let moved = s.transformed(&rot, &trans);
        let a: Vec<[f64; 3]> = s.coords.iter().flatten().copied().collect();
        let b: Vec<[f64; 3]> = moved.coords.iter().flatten().copied().collect();
        let sp = kabsch_align(&a, &b, None).unwrap();
        assert!(sp.rmsd <= 1e-6, "trial {trial}: rmsd {}", sp.rmsd);
    }
}
