//! Deterministic backbone geometry.
//!
//! Residue frames, dihedral and bond features, kNN graph construction,
//! Kabsch superposition, and the centroid corruption operator. Everything
//! here is a pure function; angle results are radians in (-π, π].

mod corrupt;
mod features;
mod frames;
mod kabsch;
mod knn;

pub use corrupt::{corrupt_structure, CorruptionSite};
pub use features::{bond_angle, dihedral, extract_features, FeatureTable};
pub use frames::{build_frames, FrameSet, ResidueFrame};
pub use kabsch::{ca_rmsd, kabsch_align, Superposition};
pub use knn::{knn_graph, GraphTopology};

use alloc::format;
use alloc::string::String;
// Needed for f64 math in pure no_std builds; redundant when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

/// Errors from geometric operations.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    /// A dihedral involves a near-zero bond or normal vector.
    DegenerateGeometry { detail: String },
    /// Superposition needs at least three unmasked points.
    TooFewPoints { got: usize },
    /// Corruption found no residue with all four atoms observed.
    NoEligibleResidues,
}

impl core::fmt::Display for GeometryError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::DegenerateGeometry { detail } => write!(f, "degenerate geometry: {detail}"),
            Self::TooFewPoints { got } => {
                write!(f, "superposition needs >= 3 unmasked points, got {got}")
            }
            Self::NoEligibleResidues => write!(f, "no residue has all four backbone atoms"),
        }
    }
}

impl core::error::Error for GeometryError {}

pub(crate) fn degenerate(detail: impl core::fmt::Display) -> GeometryError {
    GeometryError::DegenerateGeometry {
        detail: format!("{detail}"),
    }
}

// --- small fixed-size linear algebra ---------------------------------------

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

#[inline]
pub fn sub3(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add3(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale3(v: &Vec3, s: f64) -> Vec3 {
    [v[0] * s, v[1] * s, v[2] * s]
}

#[inline]
pub fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross3(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm3(v: &Vec3) -> f64 {
    dot3(v, v).sqrt()
}

#[inline]
pub fn normalize3(v: &Vec3) -> Vec3 {
    let n = norm3(v);
    if n == 0.0 {
        [0.0; 3]
    } else {
        scale3(v, 1.0 / n)
    }
}

#[inline]
pub fn distance3(a: &Vec3, b: &Vec3) -> f64 {
    norm3(&sub3(a, b))
}

pub const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[inline]
pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

#[inline]
pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

#[inline]
pub fn mat_transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
    }
    out
}

#[inline]
pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Max-norm deviation of RᵀR from the identity.
pub fn orthonormality_error(m: &Mat3) -> f64 {
    let rtr = mat_mul(&mat_transpose(m), m);
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((rtr[i][j] - want).abs());
        }
    }
    worst
}

/// Wrap an angle into (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a % core::f64::consts::TAU;
    if x <= -core::f64::consts::PI {
        x += core::f64::consts::TAU;
    } else if x > core::f64::consts::PI {
        x -= core::f64::consts::TAU;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_is_right_handed() {
        let x = [1.0, 0.0, 0.0];
        let y = [0.0, 1.0, 0.0];
        assert_eq!(cross3(&x, &y), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn wrap_angle_range() {
        use core::f64::consts::PI;
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn orthonormality_error_detects_scaling() {
        let mut m = IDENTITY3;
        m[0][0] = 1.1;
        assert!(orthonormality_error(&m) > 0.2);
        assert_eq!(orthonormality_error(&IDENTITY3), 0.0);
    }
}
