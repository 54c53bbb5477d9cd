//! Per-residue rigid frames anchored at Cα.

use alloc::vec::Vec;

use super::{
    add3, cross3, dot3, mat_mul, mat_transpose, mat_vec, norm3, normalize3, scale3, sub3, Mat3,
    Vec3, IDENTITY3,
};
use crate::backbone::{BackboneStructure, ATOM_C, ATOM_CA, ATOM_N};

/// A residue is degenerate when C-Cα and N-Cα are within this angle of the
/// same line (or an atom is missing); its rotation falls back to identity.
const COLLINEAR_SIN: f64 = 1e-3;

/// Rigid transform (R, t): local coordinates map to global as R·x + t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidueFrame {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl ResidueFrame {
    pub fn identity() -> Self {
        Self {
            rotation: IDENTITY3,
            translation: [0.0; 3],
        }
    }

    /// Apply to a point: R·x + t.
    pub fn apply(&self, x: &Vec3) -> Vec3 {
        add3(&mat_vec(&self.rotation, x), &self.translation)
    }

    /// Inverse transform (Rᵀ, -Rᵀt).
    pub fn inverse(&self) -> Self {
        let rt = mat_transpose(&self.rotation);
        Self {
            translation: scale3(&mat_vec(&rt, &self.translation), -1.0),
            rotation: rt,
        }
    }

    /// Composition: (self ∘ other)(x) = self(other(x)).
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: mat_mul(&self.rotation, &other.rotation),
            translation: self.apply(&other.translation),
        }
    }
}

/// Frames for every residue plus a degeneracy flag per residue.
#[derive(Debug, Clone)]
pub struct FrameSet {
    pub frames: Vec<ResidueFrame>,
    pub degenerate: Vec<bool>,
}

/// Build a frame per residue by Gram-Schmidt on (C-Cα, N-Cα):
/// e1 = ĉ, e2 = (n - ⟨n,e1⟩e1)^, e3 = e1 × e2, columns (e1, e2, e3),
/// translation at Cα. Missing atoms or collinear inputs yield the identity
/// rotation and a degeneracy flag instead of an error.
pub fn build_frames(s: &BackboneStructure) -> FrameSet {
    let l = s.len();
    let mut frames = Vec::with_capacity(l);
    let mut degenerate = Vec::with_capacity(l);
    for i in 0..l {
        let mask = s.atom_mask[i];
        let ca = s.coords[i][ATOM_CA];
        if !(mask[ATOM_N] && mask[ATOM_CA] && mask[ATOM_C]) {
            frames.push(ResidueFrame {
                rotation: IDENTITY3,
                translation: if mask[ATOM_CA] { ca } else { [0.0; 3] },
            });
            degenerate.push(true);
            continue;
        }
        let c_dir = sub3(&s.coords[i][ATOM_C], &ca);
        let n_dir = sub3(&s.coords[i][ATOM_N], &ca);
        let (nc, nn) = (norm3(&c_dir), norm3(&n_dir));
        let sin_angle = if nc > 0.0 && nn > 0.0 {
            norm3(&cross3(&c_dir, &n_dir)) / (nc * nn)
        } else {
            0.0
        };
        if sin_angle < COLLINEAR_SIN {
            frames.push(ResidueFrame {
                rotation: IDENTITY3,
                translation: ca,
            });
            degenerate.push(true);
            continue;
        }
        let e1 = normalize3(&c_dir);
        let proj = dot3(&n_dir, &e1);
        let e2 = normalize3(&sub3(&n_dir, &scale3(&e1, proj)));
        let e3 = cross3(&e1, &e2);
        let rotation = [
            [e1[0], e2[0], e3[0]],
            [e1[1], e2[1], e3[1]],
            [e1[2], e2[2], e3[2]],
        ];
        frames.push(ResidueFrame {
            rotation,
            translation: ca,
        });
        degenerate.push(false);
    }
    FrameSet { frames, degenerate }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::orthonormality_error;
    use alloc::vec;

    fn structure_with(n: Vec3, ca: Vec3, c: Vec3) -> BackboneStructure {
        let mut coords = vec![[[0.0; 3]; 4]; 2];
        coords[0][ATOM_N] = n;
        coords[0][ATOM_CA] = ca;
        coords[0][ATOM_C] = c;
        coords[1][ATOM_CA] = [3.8, 0.0, 0.0];
        BackboneStructure {
            id: "f".into(),
            sequence: vec!['A', 'A'],
            coords,
            atom_mask: vec![[true, true, true, false], [false, true, false, false]],
            plddt: None,
        }
    }

    #[test]
    fn hand_checked_gram_schmidt() {
        // N=(-1,1,0), Ca=origin, C=(1,0,0): e1=x, e2=y, e3=z.
        let s = structure_with([-1.0, 1.0, 0.0], [0.0; 3], [1.0, 0.0, 0.0]);
        let fs = build_frames(&s);
        assert!(!fs.degenerate[0]);
        let f = &fs.frames[0];
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((f.rotation[i][j] - want).abs() < 1e-12);
            }
        }
        assert_eq!(f.translation, [0.0; 3]);
    }

    #[test]
    fn frames_are_rotations() {
        let s = structure_with([1.1, -0.3, 0.7], [0.2, 0.1, -0.5], [-0.9, 0.8, 0.4]);
        let fs = build_frames(&s);
        let f = &fs.frames[0];
        assert!(orthonormality_error(&f.rotation) < 1e-12);
        assert!((super::super::det3(&f.rotation) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_flagged_degenerate() {
        let s = structure_with([-1.0, 0.0, 0.0], [0.0; 3], [2.0, 0.0, 0.0]);
        let fs = build_frames(&s);
        assert!(fs.degenerate[0]);
        assert_eq!(fs.frames[0].rotation, IDENTITY3);
    }

    #[test]
    fn missing_backbone_atom_flagged() {
        let mut s = structure_with([-1.0, 1.0, 0.0], [0.0; 3], [1.0, 0.0, 0.0]);
        s.atom_mask[0][ATOM_N] = false;
        let fs = build_frames(&s);
        assert!(fs.degenerate[0]);
    }

    #[test]
    fn compose_inverse_is_identity() {
        let s = structure_with([1.1, -0.3, 0.7], [0.2, 0.1, -0.5], [-0.9, 0.8, 0.4]);
        let f = build_frames(&s).frames[0];
        let id = f.compose(&f.inverse());
        assert!(orthonormality_error(&id.rotation) < 1e-12);
        for k in 0..3 {
            assert!(id.translation[k].abs() < 1e-12);
        }
    }
}
