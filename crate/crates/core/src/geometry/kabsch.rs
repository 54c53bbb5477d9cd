//! Kabsch superposition: the proper rotation + translation minimizing RMSD.

use alloc::vec::Vec;
// Needed for f64 math in pure no_std builds; redundant when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

use super::{
    cross3, dot3, mat_vec, norm3, normalize3, scale3, sub3, GeometryError, Mat3, Vec3,
};

/// Result of superposing `moving` onto `target`: x → R·x + t.
#[derive(Debug, Clone, Copy)]
pub struct Superposition {
    pub rotation: Mat3,
    pub translation: Vec3,
    /// Root-mean-square deviation over the superposed points, in Å.
    pub rmsd: f64,
}

impl Superposition {
    pub fn apply(&self, x: &Vec3) -> Vec3 {
        let r = mat_vec(&self.rotation, x);
        [
            r[0] + self.translation[0],
            r[1] + self.translation[1],
            r[2] + self.translation[2],
        ]
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric 3×3 matrix.
/// Returns eigenvalues (descending) and matching eigenvectors as columns.
fn jacobi_eigen3(mut a: Mat3) -> ([f64; 3], Mat3) {
    let mut v = super::IDENTITY3;
    for _ in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off < 1e-30 {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let (app, aqq, apq) = (a[p][p], a[q][q], a[p][q]);
            a[p][p] = app - t * apq;
            a[q][q] = aqq + t * apq;
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            let r = 3 - p - q;
            let (arp, arq) = (a[r][p], a[r][q]);
            a[r][p] = c * arp - s * arq;
            a[p][r] = a[r][p];
            a[r][q] = s * arp + c * arq;
            a[q][r] = a[r][q];
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let vals = [a[order[0]][order[0]], a[order[1]][order[1]], a[order[2]][order[2]]];
    let mut vecs = [[0.0; 3]; 3];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..3 {
            vecs[row][col] = v[row][src];
        }
    }
    (vals, vecs)
}

fn column(m: &Mat3, c: usize) -> Vec3 {
    [m[0][c], m[1][c], m[2][c]]
}

/// Any unit vector orthogonal to u.
fn any_orthogonal(u: &Vec3) -> Vec3 {
    let pick = if u[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    normalize3(&cross3(u, &pick))
}

/// Superpose `moving` onto `target` over the unmasked points.
///
/// The rotation comes from the singular decomposition of the cross
/// covariance; the smallest singular direction carries the sign correction
/// that excludes reflections, so the result is always a proper rotation.
/// Needs at least three unmasked points; collinear sets are allowed (the
/// optimum is then not unique but the returned transform attains it).
pub fn kabsch_align(
    moving: &[Vec3],
    target: &[Vec3],
    mask: Option<&[bool]>,
) -> Result<Superposition, GeometryError> {
    assert_eq!(moving.len(), target.len(), "point sets differ in length");
    let selected: Vec<usize> = (0..moving.len())
        .filter(|&i| mask.map_or(true, |m| m[i]))
        .collect();
    let n = selected.len();
    if n < 3 {
        return Err(GeometryError::TooFewPoints { got: n });
    }
    let nf = n as f64;
    let mut cm = [0.0; 3];
    let mut ct = [0.0; 3];
    for &i in &selected {
        for k in 0..3 {
            cm[k] += moving[i][k];
            ct[k] += target[i][k];
        }
    }
    for k in 0..3 {
        cm[k] /= nf;
        ct[k] /= nf;
    }

    // Cross covariance M[j][k] = Σ m_j t_k over centered points.
    let mut m = [[0.0; 3]; 3];
    for &i in &selected {
        let p = sub3(&moving[i], &cm);
        let q = sub3(&target[i], &ct);
        for j in 0..3 {
            for k in 0..3 {
                m[j][k] += p[j] * q[k];
            }
        }
    }

    // Right singular vectors from MᵀM (columns of v), forced right-handed.
    let mut mtm = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            mtm[i][j] = (0..3).map(|k| m[k][i] * m[k][j]).sum();
        }
    }
    let (vals, mut v) = jacobi_eigen3(mtm);
    let v3 = cross3(&column(&v, 0), &column(&v, 1));
    for row in 0..3 {
        v[row][2] = v3[row];
    }

    // Left singular vectors u_k = M v_k / σ_k, completed by cross product;
    // u3 = u1 × u2 bakes in the reflection sign correction on the smallest
    // singular value.
    let rotation = if vals[0] <= 1e-24 {
        // All points coincide after centering; any rotation is optimal.
        super::IDENTITY3
    } else {
        let mv1 = mat_vec(&m, &column(&v, 0));
        let u1 = normalize3(&mv1);
        let mv2 = mat_vec(&m, &column(&v, 1));
        let mv2_perp = sub3(&mv2, &scale3(&u1, dot3(&mv2, &u1)));
        let u2 = if norm3(&mv2_perp) > 1e-12 * norm3(&mv1).max(1.0) {
            normalize3(&mv2_perp)
        } else {
            any_orthogonal(&u1)
        };
        let u3 = cross3(&u1, &u2);
        // R maps moving onto target: R[i][j] = Σ_k u_k[i] ... built as V Uᵀ
        // with U = [u1 u2 u3], V right-handed.
        let u = [
            [u1[0], u2[0], u3[0]],
            [u1[1], u2[1], u3[1]],
            [u1[2], u2[2], u3[2]],
        ];
        super::mat_mul(&v, &super::mat_transpose(&u))
    };

    let translation = sub3(&ct, &mat_vec(&rotation, &cm));
    let mut ss = 0.0;
    for &i in &selected {
        let mapped = mat_vec(&rotation, &moving[i]);
        for k in 0..3 {
            let d = mapped[k] + translation[k] - target[i][k];
            ss += d * d;
        }
    }
    Ok(Superposition {
        rotation,
        translation,
        rmsd: (ss / nf).sqrt(),
    })
}

/// Cα RMSD of two equal-length structures after superposition.
pub fn ca_rmsd(
    a: &crate::backbone::BackboneStructure,
    b: &crate::backbone::BackboneStructure,
) -> Result<f64, GeometryError> {
    let pa = a.ca_coords();
    let pb = b.ca_coords();
    Ok(kabsch_align(&pa, &pb, None)?.rmsd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{det3, orthonormality_error};
    use crate::rng::SeededRng;
    use alloc::vec;
    use alloc::vec::Vec;

    fn random_points(rng: &mut SeededRng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                [
                    rng.uniform_in(-10.0, 10.0),
                    rng.uniform_in(-10.0, 10.0),
                    rng.uniform_in(-10.0, 10.0),
                ]
            })
            .collect()
    }

    #[test]
    fn identity_alignment() {
        let mut rng = SeededRng::new(1);
        let pts = random_points(&mut rng, 8);
        let sp = kabsch_align(&pts, &pts, None).unwrap();
        assert!(sp.rmsd < 1e-9);
    }

    #[test]
    fn recovers_random_rigid_motion() {
        let mut rng = SeededRng::new(2);
        for _ in 0..20 {
            let pts = random_points(&mut rng, 12);
            let r = rng.rotation();
            let t = [rng.uniform_in(-5.0, 5.0), 3.0, rng.uniform_in(-5.0, 5.0)];
            let moved: Vec<Vec3> = pts
                .iter()
                .map(|p| {
                    let m = mat_vec(&r, p);
                    [m[0] + t[0], m[1] + t[1], m[2] + t[2]]
                })
                .collect();
            let sp = kabsch_align(&pts, &moved, None).unwrap();
            assert!(sp.rmsd <= 1e-6, "rmsd {}", sp.rmsd);
            assert!(orthonormality_error(&sp.rotation) < 1e-9);
            assert!((det3(&sp.rotation) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_points() {
        let pts = vec![[0.0; 3], [1.0, 0.0, 0.0]];
        assert!(matches!(
            kabsch_align(&pts, &pts, None),
            Err(GeometryError::TooFewPoints { got: 2 })
        ));
        let four = vec![[0.0; 3]; 4];
        let mask = vec![true, true, false, false];
        assert!(matches!(
            kabsch_align(&four, &four, Some(&mask)),
            Err(GeometryError::TooFewPoints { got: 2 })
        ));
    }

    #[test]
    fn collinear_points_still_align() {
        let line: Vec<Vec3> = (0..5).map(|i| [i as f64, 0.0, 0.0]).collect();
        let mut rng = SeededRng::new(3);
        let r = rng.rotation();
        let moved: Vec<Vec3> = line.iter().map(|p| mat_vec(&r, p)).collect();
        let sp = kabsch_align(&line, &moved, None).unwrap();
        assert!(sp.rmsd < 1e-9, "rmsd {}", sp.rmsd);
        assert!((det3(&sp.rotation) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reflection_is_excluded() {
        // A mirrored tetrahedron cannot be superposed by a proper rotation;
        // the result must still be a rotation (det +1), not a reflection.
        let pts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let mirrored: Vec<Vec3> = pts.iter().map(|p| [-p[0], p[1], p[2]]).collect();
        let sp = kabsch_align(&pts, &mirrored, None).unwrap();
        assert!((det3(&sp.rotation) - 1.0).abs() < 1e-9);
        assert!(sp.rmsd > 0.1);
    }
}
