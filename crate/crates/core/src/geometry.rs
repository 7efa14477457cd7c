//! Geometric value types and pin-hole projection.
//!
//! Pixel coordinates are always stored after homogeneous division. All types
//! here are plain immutable values.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix3x4, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.u, self.v)
    }

    pub fn homogeneous(self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, 1.0)
    }

    pub fn from_vector(v: &Vector2<f64>) -> Self {
        Self::new(v.x, v.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn homogeneous(self) -> Vector4<f64> {
        Vector4::new(self.x, self.y, self.z, 1.0)
    }
}

/// A 3x4 projective camera. Serialized as the twelve elements `p1..p12`
/// in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 12]", from = "[f64; 12]")]
pub struct CameraP {
    pub p: Matrix3x4<f64>,
}

impl From<CameraP> for [f64; 12] {
    fn from(c: CameraP) -> Self {
        c.elements()
    }
}

impl From<[f64; 12]> for CameraP {
    fn from(e: [f64; 12]) -> Self {
        CameraP::from_elements(e)
    }
}

impl CameraP {
    pub fn new(p: Matrix3x4<f64>) -> Self {
        Self { p }
    }

    /// Builds a camera from `p1..p12` (row-major).
    pub fn from_elements(e: [f64; 12]) -> Self {
        Self {
            p: Matrix3x4::from_row_slice(&e),
        }
    }

    pub fn elements(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for r in 0..3 {
            for c in 0..4 {
                out[4 * r + c] = self.p[(r, c)];
            }
        }
        out
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self { p: self.p * lambda }
    }

    /// Camera center (right null vector of `P`), for finite cameras.
    pub fn center(&self) -> Vector3<f64> {
        let m = self.p.fixed_view::<3, 3>(0, 0).into_owned();
        let p4 = self.p.column(3).into_owned();
        match m.try_inverse() {
            Some(inv) => -(inv * p4),
            None => Vector3::from_element(f64::NAN),
        }
    }

    /// Viewing direction of the ray through a pixel (not normalized).
    pub fn ray_direction(&self, x: PixelPoint) -> Option<Vector3<f64>> {
        let m = self.p.fixed_view::<3, 3>(0, 0).into_owned();
        m.try_inverse().map(|inv| inv * x.homogeneous())
    }

    /// Homogeneous depth denominator `q = p9 X + p10 Y + p11 Z + p12`.
    pub fn denominator(&self, x: WorldPoint) -> f64 {
        self.p.row(2).dot(&x.homogeneous().transpose())
    }

    /// Depth of a point in front of the camera (positive when visible),
    /// invariant to the overall scale and sign of `P`.
    pub fn depth(&self, x: WorldPoint) -> f64 {
        let m = self.p.fixed_view::<3, 3>(0, 0).into_owned();
        let det = m.determinant();
        let row3 = self.p.fixed_view::<1, 3>(2, 0).norm();
        det.signum() * self.denominator(x) / row3
    }

    fn check_denominator(&self, x: WorldPoint) -> Result<f64> {
        let q = self.denominator(x);
        let row3 = self.p.row(2).norm();
        let xn = x.homogeneous().norm();
        if q.abs() < 1e-12 * row3 * xn {
            return Err(Error::PointAtInfinity);
        }
        Ok(q)
    }
}

/// Pin-hole projection, `(u, v)` = dehomogenized `P [X; 1]`.
pub fn project(cam: &CameraP, x: WorldPoint) -> Result<PixelPoint> {
    let q = cam.check_denominator(x)?;
    let p = &cam.p;
    let u = (p[(0, 0)] * x.x + p[(0, 1)] * x.y + p[(0, 2)] * x.z + p[(0, 3)]) / q;
    let v = (p[(1, 0)] * x.x + p[(1, 1)] * x.y + p[(1, 2)] * x.z + p[(1, 3)]) / q;
    Ok(PixelPoint::new(u, v))
}

/// Jacobian of the pin-hole projection with respect to `(X, Y, Z)`.
///
/// Row 0 is the gradient of `u`, row 1 that of `v`:
/// `du/dX = (p1 - u p9) / q`, etc. `x` must be the projection of `point`.
pub fn projection_gradients(cam: &CameraP, x: PixelPoint, point: WorldPoint) -> Result<Matrix2x3<f64>> {
    let q = cam.check_denominator(point)?;
    let p = &cam.p;
    let mut g = Matrix2x3::zeros();
    for c in 0..3 {
        g[(0, c)] = (p[(0, c)] - x.u * p[(2, c)]) / q;
        g[(1, c)] = (p[(1, c)] - x.v * p[(2, c)]) / q;
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    #[serde(with = "mat3_rows")]
    pub rotation: Matrix3<f64>,
    #[serde(with = "vec3_array")]
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    /// Camera center in the reference frame, `-R^T t`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }
}

/// `P = K [R | t]`.
pub fn compose_camera(k: &Matrix3<f64>, pose: &Pose) -> CameraP {
    let mut rt = Matrix3x4::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&pose.rotation);
    rt.set_column(3, &pose.translation);
    CameraP::new(k * rt)
}

/// Intrinsics with square pixels and zero skew.
pub fn intrinsics(focal: f64, cx: f64, cy: f64) -> Matrix3<f64> {
    Matrix3::new(focal, 0.0, cx, 0.0, focal, cy, 0.0, 0.0, 1.0)
}

/// Local affine map between two image neighbourhoods, stored row-major
/// as `[[a1, a2], [a3, a4]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 4]", from = "[f64; 4]")]
pub struct AffineMap {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

impl From<AffineMap> for [f64; 4] {
    fn from(a: AffineMap) -> Self {
        [a.a1, a.a2, a.a3, a.a4]
    }
}

impl From<[f64; 4]> for AffineMap {
    fn from(a: [f64; 4]) -> Self {
        AffineMap::new(a[0], a[1], a[2], a[3])
    }
}

impl AffineMap {
    pub const IDENTITY: AffineMap = AffineMap::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a1: f64, a2: f64, a3: f64, a4: f64) -> Self {
        Self { a1, a2, a3, a4 }
    }

    pub fn from_matrix(m: &Matrix2<f64>) -> Self {
        Self::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.a1, self.a2, self.a3, self.a4)
    }

    pub fn entries(&self) -> [f64; 4] {
        (*self).into()
    }

    pub fn determinant(&self) -> f64 {
        self.a1 * self.a4 - self.a2 * self.a3
    }

    pub fn apply(&self, d: &Vector2<f64>) -> Vector2<f64> {
        self.matrix() * d
    }

    /// Largest absolute entry difference relative to the largest entry of `other`.
    pub fn relative_error(&self, other: &AffineMap) -> f64 {
        let diff = (self.matrix() - other.matrix()).abs().max();
        diff / other.matrix().abs().max().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCorrespondence {
    pub p1: PixelPoint,
    pub p2: PixelPoint,
    pub affine: AffineMap,
}

/// Matched image directions. With a known scale `alpha`,
/// `alpha * d2 = A * d1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionPair {
    #[serde(with = "vec2_array")]
    pub d1: Vector2<f64>,
    #[serde(with = "vec2_array")]
    pub d2: Vector2<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl DirectionPair {
    pub fn unscaled(d1: Vector2<f64>, d2: Vector2<f64>) -> Self {
        Self { d1, d2, scale: None }
    }

    pub fn scaled(d1: Vector2<f64>, d2: Vector2<f64>, scale: f64) -> Self {
        Self {
            d1,
            d2,
            scale: Some(scale),
        }
    }

    pub fn without_scale(&self) -> Self {
        Self {
            scale: None,
            ..*self
        }
    }
}

pub(crate) mod vec2_array {
    use nalgebra::Vector2;
    use serde::{Deserialize, Deserializer, Serializer, Serialize};

    pub fn serialize<S: Serializer>(v: &Vector2<f64>, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector2<f64>, D::Error> {
        let a = <[f64; 2]>::deserialize(d)?;
        Ok(Vector2::new(a[0], a[1]))
    }
}

pub(crate) mod vec3_array {
    use nalgebra::Vector3;
    use serde::{Deserialize, Deserializer, Serializer, Serialize};

    pub fn serialize<S: Serializer>(v: &Vector3<f64>, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector3<f64>, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        Ok(Vector3::new(a[0], a[1], a[2]))
    }
}

/// 3x3 matrices as nine row-major elements.
pub(crate) mod mat3_rows {
    use nalgebra::Matrix3;
    use serde::{Deserialize, Deserializer, Serializer, Serialize};

    pub fn serialize<S: Serializer>(m: &Matrix3<f64>, s: S) -> Result<S::Ok, S::Error> {
        let mut a = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                a[3 * r + c] = m[(r, c)];
            }
        }
        a.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix3<f64>, D::Error> {
        let a = <[f64; 9]>::deserialize(d)?;
        Ok(Matrix3::from_row_slice(&a))
    }
}
