//! Dihedral angles, bond angles, and bond lengths.

use alloc::vec;
use alloc::vec::Vec;
// Needed for f64 math in pure no_std builds; redundant when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

use super::{cross3, degenerate, distance3, dot3, norm3, normalize3, sub3, GeometryError, Vec3};
use crate::backbone::{BackboneStructure, ATOM_C, ATOM_CA, ATOM_N, ATOM_O};

const TINY: f64 = 1e-8;

/// Signed dihedral of four points in (-π, π].
///
/// With b1 = p2-p1, b2 = p3-p2, b3 = p4-p3 and plane normals n1 = b1×b2,
/// n2 = b2×b3, the angle is atan2(⟨n1×n2, b̂2⟩, ⟨n1, n2⟩).
pub fn dihedral(p1: &Vec3, p2: &Vec3, p3: &Vec3, p4: &Vec3) -> Result<f64, GeometryError> {
    let b1 = sub3(p2, p1);
    let b2 = sub3(p3, p2);
    let b3 = sub3(p4, p3);
    for (name, b) in [("b1", &b1), ("b2", &b2), ("b3", &b3)] {
        if norm3(b) < TINY {
            return Err(degenerate(format_args!("bond vector {name} is ~zero")));
        }
    }
    let n1 = cross3(&b1, &b2);
    let n2 = cross3(&b2, &b3);
    for (name, n) in [("n1", &n1), ("n2", &n2)] {
        if norm3(n) < TINY {
            return Err(degenerate(format_args!("plane normal {name} is ~zero")));
        }
    }
    let b2_hat = normalize3(&b2);
    let y = dot3(&cross3(&n1, &n2), &b2_hat);
    let x = dot3(&n1, &n2);
    let a = y.atan2(x);
    // atan2 returns [-π, π]; fold the closed end onto +π.
    Ok(if a == -core::f64::consts::PI {
        core::f64::consts::PI
    } else {
        a
    })
}

/// Bond angle at p2, in (0, π).
pub fn bond_angle(p1: &Vec3, p2: &Vec3, p3: &Vec3) -> Result<f64, GeometryError> {
    let u = sub3(p1, p2);
    let v = sub3(p3, p2);
    let (nu, nv) = (norm3(&u), norm3(&v));
    if nu < TINY || nv < TINY {
        return Err(degenerate("zero-length bond in angle"));
    }
    let c = (dot3(&u, &v) / (nu * nv)).clamp(-1.0, 1.0);
    Ok(c.acos())
}

/// Per-residue backbone features with validity masks.
///
/// Dihedrals: phi_i over C_{i-1}, N_i, Cα_i, C_i; psi_i over N_i, Cα_i,
/// C_i, N_{i+1}; omega_i over Cα_i, C_i, N_{i+1}, Cα_{i+1}. Bond angles:
/// alpha = N-Cα-C, beta = C_{i-1}-N-Cα, gamma = Cα-C-N_{i+1}. Bond lengths,
/// in order: Cα-N, C-Cα, O-C, N_{i+1}-C.
#[derive(Debug, Clone, Default)]
pub struct FeatureTable {
    pub phi: Vec<f64>,
    pub phi_mask: Vec<bool>,
    pub psi: Vec<f64>,
    pub psi_mask: Vec<bool>,
    pub omega: Vec<f64>,
    pub omega_mask: Vec<bool>,
    pub alpha: Vec<f64>,
    pub alpha_mask: Vec<bool>,
    pub beta: Vec<f64>,
    pub beta_mask: Vec<bool>,
    pub gamma: Vec<f64>,
    pub gamma_mask: Vec<bool>,
    pub bond_lengths: Vec<[f64; 4]>,
    pub bond_mask: Vec<[bool; 4]>,
}

/// Names of the four per-residue bond lengths, in storage order.
pub const BOND_NAMES: [&str; 4] = ["ca_n", "c_ca", "o_c", "n_next_c"];

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Masked values of one angle feature by name.
    pub fn angle_samples(&self, name: &str) -> Vec<f64> {
        let (vals, mask) = match name {
            "phi" => (&self.phi, &self.phi_mask),
            "psi" => (&self.psi, &self.psi_mask),
            "omega" => (&self.omega, &self.omega_mask),
            "alpha" => (&self.alpha, &self.alpha_mask),
            "beta" => (&self.beta, &self.beta_mask),
            "gamma" => (&self.gamma, &self.gamma_mask),
            _ => return Vec::new(),
        };
        vals.iter()
            .zip(mask)
            .filter_map(|(&v, &m)| m.then_some(v))
            .collect()
    }

    /// Masked values of one bond-length feature by name.
    pub fn bond_samples(&self, name: &str) -> Vec<f64> {
        let Some(slot) = BOND_NAMES.iter().position(|&b| b == name) else {
            return Vec::new();
        };
        self.bond_lengths
            .iter()
            .zip(&self.bond_mask)
            .filter_map(|(v, m)| m[slot].then_some(v[slot]))
            .collect()
    }

    /// (phi, psi) pairs where both are valid, for Ramachandran statistics.
    pub fn phi_psi_pairs(&self) -> Vec<(f64, f64)> {
        (0..self.len())
            .filter(|&i| self.phi_mask[i] && self.psi_mask[i])
            .map(|i| (self.phi[i], self.psi[i]))
            .collect()
    }
}

/// Extract dihedrals, bond angles, and bond lengths; masks are false at
/// chain boundaries and wherever a required atom is missing.
pub fn extract_features(s: &BackboneStructure) -> FeatureTable {
    let l = s.len();
    let mut t = FeatureTable {
        phi: vec![0.0; l],
        phi_mask: vec![false; l],
        psi: vec![0.0; l],
        psi_mask: vec![false; l],
        omega: vec![0.0; l],
        omega_mask: vec![false; l],
        alpha: vec![0.0; l],
        alpha_mask: vec![false; l],
        beta: vec![0.0; l],
        beta_mask: vec![false; l],
        gamma: vec![0.0; l],
        gamma_mask: vec![false; l],
        bond_lengths: vec![[0.0; 4]; l],
        bond_mask: vec![[false; 4]; l],
    };
    let have = |i: usize, a: usize| s.atom_mask[i][a];
    let at = |i: usize, a: usize| &s.coords[i][a];

    for i in 0..l {
        if i > 0 && have(i - 1, ATOM_C) && have(i, ATOM_N) && have(i, ATOM_CA) && have(i, ATOM_C) {
            if let Ok(v) = dihedral(at(i - 1, ATOM_C), at(i, ATOM_N), at(i, ATOM_CA), at(i, ATOM_C))
            {
                t.phi[i] = v;
                t.phi_mask[i] = true;
            }
        }
        if i + 1 < l
            && have(i, ATOM_N)
            && have(i, ATOM_CA)
            && have(i, ATOM_C)
            && have(i + 1, ATOM_N)
        {
            if let Ok(v) = dihedral(at(i, ATOM_N), at(i, ATOM_CA), at(i, ATOM_C), at(i + 1, ATOM_N))
            {
                t.psi[i] = v;
                t.psi_mask[i] = true;
            }
        }
        if i + 1 < l
            && have(i, ATOM_CA)
            && have(i, ATOM_C)
            && have(i + 1, ATOM_N)
            && have(i + 1, ATOM_CA)
        {
            if let Ok(v) = dihedral(
                at(i, ATOM_CA),
                at(i, ATOM_C),
                at(i + 1, ATOM_N),
                at(i + 1, ATOM_CA),
            ) {
                t.omega[i] = v;
                t.omega_mask[i] = true;
            }
        }
        if have(i, ATOM_N) && have(i, ATOM_CA) && have(i, ATOM_C) {
            if let Ok(v) = bond_angle(at(i, ATOM_N), at(i, ATOM_CA), at(i, ATOM_C)) {
                t.alpha[i] = v;
                t.alpha_mask[i] = true;
            }
        }
        if i > 0 && have(i - 1, ATOM_C) && have(i, ATOM_N) && have(i, ATOM_CA) {
            if let Ok(v) = bond_angle(at(i - 1, ATOM_C), at(i, ATOM_N), at(i, ATOM_CA)) {
                t.beta[i] = v;
                t.beta_mask[i] = true;
            }
        }
        if i + 1 < l && have(i, ATOM_CA) && have(i, ATOM_C) && have(i + 1, ATOM_N) {
            if let Ok(v) = bond_angle(at(i, ATOM_CA), at(i, ATOM_C), at(i + 1, ATOM_N)) {
                t.gamma[i] = v;
                t.gamma_mask[i] = true;
            }
        }
        if have(i, ATOM_CA) && have(i, ATOM_N) {
            t.bond_lengths[i][0] = distance3(at(i, ATOM_CA), at(i, ATOM_N));
            t.bond_mask[i][0] = true;
        }
        if have(i, ATOM_C) && have(i, ATOM_CA) {
            t.bond_lengths[i][1] = distance3(at(i, ATOM_C), at(i, ATOM_CA));
            t.bond_mask[i][1] = true;
        }
        if have(i, ATOM_O) && have(i, ATOM_C) {
            t.bond_lengths[i][2] = distance3(at(i, ATOM_O), at(i, ATOM_C));
            t.bond_mask[i][2] = true;
        }
        if i + 1 < l && have(i + 1, ATOM_N) && have(i, ATOM_C) {
            t.bond_lengths[i][3] = distance3(at(i + 1, ATOM_N), at(i, ATOM_C));
            t.bond_mask[i][3] = true;
        }
    }
    t
}
