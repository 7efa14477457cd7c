//! Surface normals from affine correspondences and calibrated cameras.
//!
//! For a surface point `X` with normal `n`, the affinity between the two
//! views is
//!
//! ```text
//!         1      [ n.w1  n.w2 ]
//! A = -------- * [            ]
//!       n.w5     [ n.w3  n.w4 ]
//! ```
//!
//! where the `w` vectors are cross products of the projection gradients
//! `gu1 = grad u1`, `gv1 = grad v1`, `gu2`, `gv2` (each over `X, Y, Z`):
//!
//! ```text
//! w1 = gv1 x gu2    w2 = gu2 x gu1    w3 = gv1 x gv2
//! w4 = gv2 x gu1    w5 = gv1 x gu1
//! ```
//!
//! Derivation: a tangent step `dX` with `n.dX = 0` and image-1 offset
//! `(du1, dv1)` is `dX = (du1 (gv1 x n) + dv1 (n x gu1)) / n.(gu1 x gv1)`;
//! applying `gu2`, `gv2` and the triple-product identity gives the pairs
//! above. The same identity shows `w1` must involve `gu2` (not `gu1`, which
//! would make `w1 = w5`).

use nalgebra::{DMatrix, Matrix4x3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{projection_gradients, AffineCorrespondence, AffineMap, CameraP, PixelPoint, WorldPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WVectors {
    pub w: [Vector3<f64>; 5],
}

impl WVectors {
    /// The affinity predicted for a surface normal `n`.
    pub fn affine_for_normal(&self, n: &Vector3<f64>) -> AffineMap {
        let den = n.dot(&self.w[4]);
        AffineMap::new(
            n.dot(&self.w[0]) / den,
            n.dot(&self.w[1]) / den,
            n.dot(&self.w[2]) / den,
            n.dot(&self.w[3]) / den,
        )
    }
}

/// Euclidean point plus unit normal facing the first camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedPoint {
    pub position: WorldPoint,
    #[serde(with = "crate::geometry::vec3_array")]
    pub normal: Vector3<f64>,
    /// Smallest singular value of the normal system.
    pub residual: f64,
}

pub fn compute_w_vectors(
    cam1: &CameraP,
    cam2: &CameraP,
    p1: PixelPoint,
    p2: PixelPoint,
    x: WorldPoint,
) -> Result<WVectors> {
    let g1 = projection_gradients(cam1, p1, x)?;
    let g2 = projection_gradients(cam2, p2, x)?;
    let gu1 = g1.row(0).transpose();
    let gv1 = g1.row(1).transpose();
    let gu2 = g2.row(0).transpose();
    let gv2 = g2.row(1).transpose();
    Ok(WVectors {
        w: [
            gv1.cross(&gu2),
            gu2.cross(&gu1),
            gv1.cross(&gv2),
            gv2.cross(&gu1),
            gv1.cross(&gu1),
        ],
    })
}

/// Least-squares normal: the unit `n` minimizing `sum_k (n.(w_k - a_k w5))^2`.
///
/// Returns `IllConditioned` when the two smallest singular values of the
/// 4x3 system differ by less than `1e-6` of the largest (the minimizer is
/// not unique).
pub fn estimate_normal(
    ac: &AffineCorrespondence,
    cam1: &CameraP,
    cam2: &CameraP,
    x: WorldPoint,
) -> Result<OrientedPoint> {
    let w = compute_w_vectors(cam1, cam2, ac.p1, ac.p2, x)?;
    normal_from_w(&w, &ac.affine, cam1, x)
}

pub(crate) fn normal_from_w(w: &WVectors, a: &AffineMap, cam1: &CameraP, x: WorldPoint) -> Result<OrientedPoint> {
    let m = normal_system(w, a);
    // scale-free: the w vectors carry units of (pixels / scene unit)^2
    let scale = m.norm();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::IllConditioned(0.0, 0.0));
    }
    let m = m / scale;
    let svd = crate::linalg::svd(&DMatrix::from_column_slice(4, 3, m.as_slice()));
    let sv = svd.s;
    if sv[1] - sv[2] <= 1e-6 * sv[0] {
        return Err(Error::IllConditioned(sv[1], sv[2]));
    }
    let mut n = Vector3::new(svd.v_t[(2, 0)], svd.v_t[(2, 1)], svd.v_t[(2, 2)]);
    n /= n.norm();
    let to_camera = cam1.center() - x.to_vector();
    if n.dot(&to_camera) < 0.0 {
        n = -n;
    }
    Ok(OrientedPoint {
        position: x,
        normal: n,
        residual: sv[2],
    })
}

/// Matrix whose rows are the four `w_k - a_k w5`; exposed for diagnostics.
pub fn normal_system(w: &WVectors, a: &AffineMap) -> Matrix4x3<f64> {
    let e = a.entries();
    Matrix4x3::from_rows(&[
        (w.w[0] - w.w[4] * e[0]).transpose(),
        (w.w[1] - w.w[4] * e[1]).transpose(),
        (w.w[2] - w.w[4] * e[2]).transpose(),
        (w.w[3] - w.w[4] * e[3]).transpose(),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epipolar::{affine_from_homography, homography_from_plane, Plane};
    use crate::geometry::{compose_camera, intrinsics, project, Pose};
    use nalgebra::Matrix3;

    #[test]
    fn identical_cameras_give_identity_affinity() {
        let cam = compose_camera(&Matrix3::identity(), &Pose::identity());
        let x = WorldPoint::new(0.0, 0.0, 1.0);
        let p = project(&cam, x).unwrap();
        let w = compute_w_vectors(&cam, &cam, p, p, x).unwrap();
        for n in [
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(0.3, -0.2, 1.0),
            Vector3::new(1.0, 1.0, 0.5),
        ] {
            let a = w.affine_for_normal(&n);
            assert!(a.relative_error(&AffineMap::IDENTITY) < 1e-14, "{a:?}");
        }
    }

    #[test]
    fn fronto_parallel_standard_stereo() {
        let k = intrinsics(800.0, 640.0, 480.0);
        let c1 = compose_camera(&k, &Pose::identity());
        let c2 = compose_camera(&k, &Pose::new(Matrix3::identity(), Vector3::new(300.0, 0.0, 0.0)));
        let x = WorldPoint::new(40.0, -25.0, 1000.0);
        let p1 = project(&c1, x).unwrap();
        let p2 = project(&c2, x).unwrap();
        let w = compute_w_vectors(&c1, &c2, p1, p2, x).unwrap();
        let a = w.affine_for_normal(&Vector3::new(0.0, 0.0, 1.0));
        assert!(a.relative_error(&AffineMap::IDENTITY) < 1e-12);

        let ac = AffineCorrespondence { p1, p2, affine: AffineMap::IDENTITY };
        let op = estimate_normal(&ac, &c1, &c2, x).unwrap();
        assert!((op.normal - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
    }

    #[test]
    fn recovers_tilted_plane() {
        let k = intrinsics(800.0, 640.0, 480.0);
        let rot = nalgebra::Rotation3::from_euler_angles(0.1, -0.2, 0.05);
        let c1 = compose_camera(&k, &Pose::identity());
        let c2 = compose_camera(&k, &Pose::new(*rot.matrix(), Vector3::new(-200.0, 30.0, 50.0)));
        let plane = Plane::new(Vector3::new(0.3, -0.4, -1.0), -900.0);
        let h = homography_from_plane(&c1, &c2, &plane).unwrap();
        // plane point above (50, 20): n.X = d
        let n = plane.normal;
        let z = (plane.offset - n.x * 50.0 - n.y * 20.0) / n.z;
        let x = WorldPoint::new(50.0, 20.0, z);
        let ac = affine_from_homography(&h, project(&c1, x).unwrap()).unwrap();
        let op = estimate_normal(&ac, &c1, &c2, x).unwrap();
        let err = op.normal.cross(&n).norm();
        assert!(err < 1e-8, "{err}");
        assert!(op.normal.dot(&(c1.center() - x.to_vector())) > 0.0);
    }

    #[test]
    fn degenerate_system_is_ill_conditioned() {
        let w = WVectors { w: [Vector3::zeros(); 5] };
        let cam = compose_camera(&Matrix3::identity(), &Pose::identity());
        let r = normal_from_w(&w, &AffineMap::IDENTITY, &cam, WorldPoint::new(0.0, 0.0, 1.0));
        assert!(matches!(r, Err(Error::IllConditioned(..))));
    }
}
