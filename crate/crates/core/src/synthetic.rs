//! Synthetic backbone generators for tests, demos, and smoke runs.
//!
//! Chains are grown atom by atom from ideal peptide bond lengths and
//! angles plus caller-supplied (φ, ψ, ω) torsions, so generated structures
//! have exactly known local geometry.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
// Needed for f64 math in pure no_std builds; redundant when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::backbone::{BackboneStructure, AMINO_ACIDS, ATOM_C, ATOM_CA, ATOM_N, ATOM_O};
use crate::geometry::{add3, cross3, normalize3, scale3, sub3, wrap_angle, Vec3};
use crate::rng::SeededRng;

/// Ideal backbone bond lengths in Å.
pub const IDEAL_N_CA: f64 = 1.458;
pub const IDEAL_CA_C: f64 = 1.525;
pub const IDEAL_C_N: f64 = 1.329;
pub const IDEAL_C_O: f64 = 1.231;

/// Ideal backbone bond angles in radians.
pub const IDEAL_N_CA_C: f64 = 111.0 * DEG;
pub const IDEAL_CA_C_N: f64 = 116.6 * DEG;
pub const IDEAL_C_N_CA: f64 = 121.7 * DEG;
pub const IDEAL_CA_C_O: f64 = 120.5 * DEG;

const DEG: f64 = core::f64::consts::PI / 180.0;

/// Salt mixed into the seed for the (independent) sequence draw.
const SEQ_SALT: u64 = 0x5e75_eed5;

/// Place the next atom D from the last three placed atoms (A, B, C) given
/// |C-D|, the angle B-C-D, and the dihedral A-B-C-D.
fn extend(a: &Vec3, b: &Vec3, c: &Vec3, length: f64, angle: f64, torsion: f64) -> Vec3 {
    let bc = normalize3(&sub3(c, b));
    let n = normalize3(&cross3(&sub3(b, a), &bc));
    let m = cross3(&n, &bc);
    let d_local = [
        -length * angle.cos(),
        length * angle.sin() * torsion.cos(),
        length * angle.sin() * torsion.sin(),
    ];
    let mut out = *c;
    out = add3(&out, &scale3(&bc, d_local[0]));
    out = add3(&out, &scale3(&m, d_local[1]));
    out = add3(&out, &scale3(&n, d_local[2]));
    out
}

/// Per-residue torsions; `phi[0]` is ignored, `psi`/`omega` of the last
/// residue steer only its carbonyl oxygen.
#[derive(Debug, Clone, Copy)]
pub struct Torsions {
    pub phi: f64,
    pub psi: f64,
    pub omega: f64,
}

/// Build a backbone with ideal bond geometry from explicit torsions.
/// The sequence is drawn uniformly from the 20-letter alphabet.
pub fn from_torsions(id: &str, torsions: &[Torsions], seq_seed: u64) -> BackboneStructure {
    let l = torsions.len();
    assert!(l >= 2, "need at least two residues");
    let mut coords = vec![[[0.0f64; 3]; 4]; l];

    coords[0][ATOM_N] = [0.0, 0.0, 0.0];
    coords[0][ATOM_CA] = [IDEAL_N_CA, 0.0, 0.0];
    coords[0][ATOM_C] = {
        let dir = [-IDEAL_N_CA_C.cos(), IDEAL_N_CA_C.sin(), 0.0];
        add3(&coords[0][ATOM_CA], &scale3(&dir, IDEAL_CA_C))
    };

    for i in 0..l {
        let n = coords[i][ATOM_N];
        let ca = coords[i][ATOM_CA];
        let c = coords[i][ATOM_C];
        // Carbonyl oxygen sits anti to the next nitrogen about the C=O plane.
        coords[i][ATOM_O] = extend(
            &n,
            &ca,
            &c,
            IDEAL_C_O,
            IDEAL_CA_C_O,
            wrap_angle(torsions[i].psi + core::f64::consts::PI),
        );
        if i + 1 == l {
            break;
        }
        let n_next = extend(&n, &ca, &c, IDEAL_C_N, IDEAL_CA_C_N, torsions[i].psi);
        let ca_next = extend(&ca, &c, &n_next, IDEAL_N_CA, IDEAL_C_N_CA, torsions[i].omega);
        let c_next = extend(
            &c,
            &n_next,
            &ca_next,
            IDEAL_CA_C,
            IDEAL_N_CA_C,
            torsions[i + 1].phi,
        );
        coords[i + 1][ATOM_N] = n_next;
        coords[i + 1][ATOM_CA] = ca_next;
        coords[i + 1][ATOM_C] = c_next;
    }

    let mut rng = SeededRng::new(seq_seed);
    let sequence: Vec<char> = (0..l).map(|_| AMINO_ACIDS[rng.below(20)]).collect();
    BackboneStructure {
        id: String::from(id),
        sequence,
        coords,
        atom_mask: vec![[true; 4]; l],
        plddt: None,
    }
}

/// An α-helix with Gaussian jitter (σ in radians) on all torsions.
pub fn helix(id: &str, len: usize, jitter: f64, seed: u64) -> BackboneStructure {
    let mut rng = SeededRng::new(seed);
    let torsions: Vec<Torsions> = (0..len)
        .map(|_| Torsions {
            phi: wrap_angle(-57.0 * DEG + jitter * rng.normal()),
            psi: wrap_angle(-47.0 * DEG + jitter * rng.normal()),
            omega: wrap_angle(core::f64::consts::PI + jitter * rng.normal()),
        })
        .collect();
    from_torsions(id, &torsions, seed ^ SEQ_SALT)
}

/// A chain mixing helix and sheet torsion basins, with jitter; closer to a
/// small real protein than a pure helix.
pub fn mixed_chain(id: &str, len: usize, jitter: f64, seed: u64) -> BackboneStructure {
    let mut rng = SeededRng::new(seed);
    let torsions: Vec<Torsions> = (0..len)
        .map(|_| {
            let (phi0, psi0) = match rng.below(10) {
                0..=5 => (-60.0 * DEG, -45.0 * DEG),
                6..=8 => (-120.0 * DEG, 120.0 * DEG),
                _ => (-75.0 * DEG, 150.0 * DEG),
            };
            Torsions {
                phi: wrap_angle(phi0 + jitter * rng.normal()),
                psi: wrap_angle(psi0 + jitter * rng.normal()),
                omega: wrap_angle(core::f64::consts::PI + 0.5 * jitter * rng.normal()),
            }
        })
        .collect();
    from_torsions(id, &torsions, seed ^ SEQ_SALT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dihedral, extract_features};
    use core::f64::consts::PI;

    #[test]
    fn ideal_trans_peptide_has_omega_pi() {
        let t = Torsions {
            phi: -60.0 * DEG,
            psi: -45.0 * DEG,
            omega: PI,
        };
        let s = from_torsions("w", &[t; 4], 0);
        let f = extract_features(&s);
        for i in 0..3 {
            assert!(f.omega_mask[i]);
            assert!((f.omega[i].abs() - PI).abs() < 1e-3, "omega {}", f.omega[i]);
        }
    }

    #[test]
    fn torsions_round_trip() {
        let want = [
            Torsions { phi: -1.1, psi: 2.4, omega: 3.0 },
            Torsions { phi: -2.0, psi: -0.7, omega: -3.1 },
            Torsions { phi: 1.4, psi: 2.9, omega: 3.14 },
            Torsions { phi: -0.9, psi: -1.3, omega: -2.9 },
        ];
        let s = from_torsions("rt", &want, 1);
        let f = extract_features(&s);
        for i in 1..4 {
            assert!((f.phi[i] - want[i].phi).abs() < 1e-9, "phi {i}");
        }
        for i in 0..3 {
            assert!((f.psi[i] - want[i].psi).abs() < 1e-9, "psi {i}");
            assert!((f.omega[i] - want[i].omega).abs() < 1e-9, "omega {i}");
        }
    }

    #[test]
    fn bond_lengths_are_ideal() {
        let s = helix("h", 10, 0.0, 2);
        let f = extract_features(&s);
        for i in 0..10 {
            assert!((f.bond_lengths[i][0] - IDEAL_N_CA).abs() < 1e-9);
            assert!((f.bond_lengths[i][1] - IDEAL_CA_C).abs() < 1e-9);
            assert!((f.bond_lengths[i][2] - IDEAL_C_O).abs() < 1e-9);
            if i + 1 < 10 {
                assert!((f.bond_lengths[i][3] - IDEAL_C_N).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn oxygen_is_anti_to_next_nitrogen() {
        let s = helix("h", 5, 0.0, 3);
        // dihedral N-CA-C-O should be psi + π.
        let d = dihedral(
            &s.coords[1][ATOM_N],
            &s.coords[1][ATOM_CA],
            &s.coords[1][ATOM_C],
            &s.coords[1][ATOM_O],
        )
        .unwrap();
        let f = extract_features(&s);
        let expect = wrap_angle(f.psi[1] + PI);
        assert!((d - expect).abs() < 1e-6);
    }
}
