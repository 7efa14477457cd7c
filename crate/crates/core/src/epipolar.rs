//! Two-view epipolar geometry.
//!
//! Fundamental matrices follow the convention `x2^T F x1 = 0`; relative poses
//! map camera-1 coordinates into camera 2 as `X2 = R X1 + t`.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix4, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    mat3_rows, AffineCorrespondence, AffineMap, CameraP, PixelPoint, Pose, WorldPoint,
};
use crate::linalg::{null_vector, skew, svd_square};

/// Rank-2 fundamental matrix with unit Frobenius norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FundamentalMatrix {
    #[serde(with = "mat3_rows")]
    f: Matrix3<f64>,
}

impl FundamentalMatrix {
    /// Projects onto rank 2 (smallest singular value zeroed) and
    /// rescales to unit Frobenius norm.
    pub fn new(m: Matrix3<f64>) -> Self {
        let (u, mut s, v_t) = svd_square(&m);
        s[2] = 0.0;
        let f = u * Matrix3::from_diagonal(&s) * v_t;
        Self { f: f / f.norm() }
    }

    /// Frobenius normalization only, for matrices that are rank 2 by
    /// construction. Avoids the rounding an SVD round trip adds to the small
    /// entries of a pixel-space `F`.
    pub fn from_rank2(m: Matrix3<f64>) -> Self {
        Self { f: m / m.norm() }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.f
    }

    /// Same matrix with the sign chosen to have a non-negative inner product
    /// with `reference`.
    pub fn oriented_like(self, reference: &FundamentalMatrix) -> Self {
        if self.f.dot(&reference.f) < 0.0 {
            Self { f: -self.f }
        } else {
            self
        }
    }

    /// Fundamental matrix induced by two finite cameras.
    pub fn from_cameras(cam1: &CameraP, cam2: &CameraP) -> Self {
        Self::from_rank2(raw_fundamental(cam1, cam2))
    }

    /// `F = K2^{-T} [t]_x R K1^{-1}`.
    pub fn from_pose(k1: &Matrix3<f64>, k2: &Matrix3<f64>, pose: &Pose) -> Self {
        let k1i = k1.try_inverse().expect("nonsingular K1");
        let k2i = k2.try_inverse().expect("nonsingular K2");
        Self::from_rank2(k2i.transpose() * skew(&pose.translation) * pose.rotation * k1i)
    }

    /// Algebraic error `x2^T F x1` divided by the norms of both epipolar
    /// line normals.
    pub fn normalized_residual(&self, p1: PixelPoint, p2: PixelPoint) -> f64 {
        let x1 = p1.homogeneous();
        let x2 = p2.homogeneous();
        let l2 = self.f * x1;
        let l1 = self.f.transpose() * x2;
        let e = x2.dot(&l2);
        let scale = (l2.fixed_rows::<2>(0).norm() * l1.fixed_rows::<2>(0).norm()).sqrt();
        e / scale
    }

    /// First-order geometric (Sampson) error, in squared pixels.
    pub fn sampson_error(&self, p1: PixelPoint, p2: PixelPoint) -> f64 {
        let x1 = p1.homogeneous();
        let x2 = p2.homogeneous();
        let l2 = self.f * x1;
        let l1 = self.f.transpose() * x2;
        let e = x2.dot(&l2);
        e * e / (l2.x * l2.x + l2.y * l2.y + l1.x * l1.x + l1.y * l1.y)
    }
}

fn raw_fundamental(cam1: &CameraP, cam2: &CameraP) -> Matrix3<f64> {
    let c1 = cam1.center();
    let e2 = cam2.p * c1.push(1.0);
    let p1 = cam1.p;
    let pinv = p1.transpose() * (p1 * p1.transpose()).try_inverse().expect("rank-3 camera");
    skew(&e2) * cam2.p * pinv
}

/// Epipolar-line normals `(n1, n2)` at a point pair: `n2` from `F x1`,
/// `n1` from `F^T x2`. Left unnormalized; zero at the epipoles.
pub fn epipolar_normals(f: &FundamentalMatrix, p1: PixelPoint, p2: PixelPoint) -> (Vector2<f64>, Vector2<f64>) {
    let l2 = f.matrix() * p1.homogeneous();
    let l1 = f.matrix().transpose() * p2.homogeneous();
    (Vector2::new(l1.x, l1.y), Vector2::new(l2.x, l2.y))
}

/// Plane-induced image-to-image homography with unit Frobenius norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Homography {
    #[serde(with = "mat3_rows")]
    h: Matrix3<f64>,
}

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Self {
        Self { h: m / m.norm() }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.h
    }

    pub fn apply(&self, p: PixelPoint) -> Result<PixelPoint> {
        let h = &self.h;
        let s = h[(2, 0)] * p.u + h[(2, 1)] * p.v + h[(2, 2)];
        if s.abs() < 1e-12 * h.row(2).norm() {
            return Err(Error::PointOnHorizon);
        }
        Ok(PixelPoint::new(
            (h[(0, 0)] * p.u + h[(0, 1)] * p.v + h[(0, 2)]) / s,
            (h[(1, 0)] * p.u + h[(1, 1)] * p.v + h[(1, 2)]) / s,
        ))
    }
}

/// Local affinity at `p1` as the Jacobian of the homography map.
///
/// With `s = h7 u1 + h8 v1 + h9`:
/// `a1 = (h1 - h7 u2)/s`, `a2 = (h2 - h8 u2)/s`,
/// `a3 = (h4 - h7 v2)/s`, `a4 = (h5 - h8 v2)/s`.
pub fn affine_from_homography(h: &Homography, p1: PixelPoint) -> Result<AffineCorrespondence> {
    let p2 = h.apply(p1)?;
    let m = h.matrix();
    let s = m[(2, 0)] * p1.u + m[(2, 1)] * p1.v + m[(2, 2)];
    let affine = AffineMap::new(
        (m[(0, 0)] - m[(2, 0)] * p2.u) / s,
        (m[(0, 1)] - m[(2, 1)] * p2.u) / s,
        (m[(1, 0)] - m[(2, 0)] * p2.v) / s,
        (m[(1, 1)] - m[(2, 1)] * p2.v) / s,
    );
    Ok(AffineCorrespondence { p1, p2, affine })
}

/// A scene plane `normal . X = offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    #[serde(with = "crate::geometry::vec3_array")]
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    pub fn new(normal: Vector3<f64>, offset: f64) -> Self {
        let n = normal.norm();
        Self {
            normal: normal / n,
            offset: offset / n,
        }
    }

    pub fn signed_distance(&self, x: &Vector3<f64>) -> f64 {
        self.normal.dot(x) - self.offset
    }
}

/// Homography mapping view-1 pixels of plane points to their view-2 pixels.
///
/// Back-projects `x1` onto the plane, `X ~ [(pi.C1) I - C1 pi^T] P1^+ x1`,
/// and reprojects through the second camera.
pub fn homography_from_plane(cam1: &CameraP, cam2: &CameraP, plane: &Plane) -> Result<Homography> {
    let pi = plane.normal.push(-plane.offset);
    let c1 = cam1.center().push(1.0);
    let c2 = cam2.center().push(1.0);
    for c in [&c1, &c2] {
        let tol = 1e-12 * plane.offset.abs().max(c.fixed_rows::<3>(0).norm()).max(1.0);
        if !c.iter().all(|v| v.is_finite()) || pi.dot(c).abs() <= tol {
            return Err(Error::DegeneratePlane);
        }
    }
    let p1 = cam1.p;
    let pinv = p1.transpose() * (p1 * p1.transpose()).try_inverse().ok_or(Error::DegeneratePlane)?;
    let lift = Matrix4::identity() * pi.dot(&c1) - c1 * pi.transpose();
    Ok(Homography::new(cam2.p * lift * pinv))
}

/// Hartley similarity: centroid to the origin, mean distance sqrt(2).
fn hartley_normalization(points: &[PixelPoint]) -> Matrix3<f64> {
    let n = points.len() as f64;
    let cu = points.iter().map(|p| p.u).sum::<f64>() / n;
    let cv = points.iter().map(|p| p.v).sum::<f64>() / n;
    let mean = points
        .iter()
        .map(|p| ((p.u - cu).powi(2) + (p.v - cv).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let s = if mean > 0.0 { std::f64::consts::SQRT_2 / mean } else { 1.0 };
    Matrix3::new(s, 0.0, -s * cu, 0.0, s, -s * cv, 0.0, 0.0, 1.0)
}

fn apply_similarity(t: &Matrix3<f64>, p: PixelPoint) -> PixelPoint {
    PixelPoint::new(t[(0, 0)] * p.u + t[(0, 2)], t[(1, 1)] * p.v + t[(1, 2)])
}

fn point_row(x1: PixelPoint, x2: PixelPoint) -> [f64; 9] {
    [
        x2.u * x1.u,
        x2.u * x1.v,
        x2.u,
        x2.v * x1.u,
        x2.v * x1.v,
        x2.v,
        x1.u,
        x1.v,
        1.0,
    ]
}

/// The two rows of `A^T (F x1)[0..2] + (F^T x2)[0..2] = 0`, linear in the
/// nine entries of `F` (row-major).
fn affine_rows(ac: &AffineCorrespondence) -> [[f64; 9]; 2] {
    let x1 = ac.p1.homogeneous();
    let x2 = ac.p2.homogeneous();
    let a = ac.affine.matrix();
    let mut rows = [[0.0; 9]; 2];
    for (k, row) in rows.iter_mut().enumerate() {
        for i in 0..3 {
            for m in 0..3 {
                let mut c = 0.0;
                if i < 2 {
                    c += a[(i, k)] * x1[m];
                }
                if m == k {
                    c += x2[i];
                }
                row[3 * i + m] = c;
            }
        }
    }
    rows
}

fn solve_fundamental(rows: &[[f64; 9]], t1: &Matrix3<f64>, t2: &Matrix3<f64>) -> Result<FundamentalMatrix> {
    if rows.len() < 8 {
        return Err(Error::NotEnoughData {
            needed: 8,
            got: rows.len(),
        });
    }
    let design = DMatrix::from_fn(rows.len(), 9, |r, c| rows[r][c]);
    let (f, sv) = null_vector(&design);
    if sv[7] - sv[8] <= 1e-10 * sv[0] {
        return Err(Error::DegenerateConfiguration);
    }
    let normalized = FundamentalMatrix::new(Matrix3::from_row_slice(f.as_slice()));
    Ok(FundamentalMatrix::from_rank2(t2.transpose() * normalized.matrix() * t1))
}

/// Normalized eight-point algorithm.
pub fn estimate_f_8point(matches: &[(PixelPoint, PixelPoint)]) -> Result<FundamentalMatrix> {
    if matches.len() < 8 {
        return Err(Error::NotEnoughData {
            needed: 8,
            got: matches.len(),
        });
    }
    let (pts1, pts2): (Vec<_>, Vec<_>) = matches.iter().copied().unzip();
    let t1 = hartley_normalization(&pts1);
    let t2 = hartley_normalization(&pts2);
    let rows: Vec<_> = matches
        .iter()
        .map(|&(a, b)| point_row(apply_similarity(&t1, a), apply_similarity(&t2, b)))
        .collect();
    solve_fundamental(&rows, &t1, &t2)
}

/// Linear re-estimation of `F` from point rows plus two rows per affine
/// correspondence. Works in Hartley-normalized coordinates; affine rows are
/// scaled to unit norm. `f0` only fixes the sign of the result.
pub fn refine_f_with_acs(
    matches: &[(PixelPoint, PixelPoint)],
    acs: &[AffineCorrespondence],
    f0: &FundamentalMatrix,
) -> Result<FundamentalMatrix> {
    let pts1: Vec<_> = matches.iter().map(|m| m.0).chain(acs.iter().map(|a| a.p1)).collect();
    let pts2: Vec<_> = matches.iter().map(|m| m.1).chain(acs.iter().map(|a| a.p2)).collect();
    if pts1.is_empty() {
        return Err(Error::NotEnoughData { needed: 8, got: 0 });
    }
    let t1 = hartley_normalization(&pts1);
    let t2 = hartley_normalization(&pts2);
    let mut rows: Vec<[f64; 9]> = matches
        .iter()
        .map(|&(a, b)| point_row(apply_similarity(&t1, a), apply_similarity(&t2, b)))
        .collect();
    let ratio = t2[(0, 0)] / t1[(0, 0)];
    for ac in acs {
        let a = ac.affine.matrix() * ratio;
        let normalized = AffineCorrespondence {
            p1: apply_similarity(&t1, ac.p1),
            p2: apply_similarity(&t2, ac.p2),
            affine: AffineMap::from_matrix(&a),
        };
        for mut r in affine_rows(&normalized) {
            let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                r.iter_mut().for_each(|v| *v /= n);
                rows.push(r);
            }
        }
    }
    Ok(solve_fundamental(&rows, &t1, &t2)?.oriented_like(f0))
}

/// Essential matrix with singular values `(s, s, 0)`, unit Frobenius norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EssentialMatrix {
    #[serde(with = "mat3_rows")]
    e: Matrix3<f64>,
}

impl EssentialMatrix {
    /// Projects onto the essential manifold.
    pub fn new(m: Matrix3<f64>) -> Self {
        let (u, sv, v_t) = svd_square(&m);
        let sigma = 0.5 * (sv[0] + sv[1]);
        let e = u * Matrix3::from_diagonal(&Vector3::new(sigma, sigma, 0.0)) * v_t;
        Self { e: e / e.norm() }
    }

    pub fn from_pose(pose: &Pose) -> Self {
        Self::new(skew(&pose.translation) * pose.rotation)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.e
    }
}

/// `E = K2^T F K1`, projected onto the essential manifold.
pub fn essential_from_f(f: &FundamentalMatrix, k1: &Matrix3<f64>, k2: &Matrix3<f64>) -> EssentialMatrix {
    EssentialMatrix::new(k2.transpose() * f.matrix() * k1)
}

fn normalized_camera(pose: &Pose) -> Matrix3x4<f64> {
    let mut p = Matrix3x4::zeros();
    p.fixed_view_mut::<3, 3>(0, 0).copy_from(&pose.rotation);
    p.set_column(3, &pose.translation);
    p
}

/// Splits `E` into the unique `(R, t)` (with `|t| = 1`) that puts the
/// majority of the sample matches in front of both cameras.
pub fn decompose_essential(
    e: &EssentialMatrix,
    sample_matches: &[(PixelPoint, PixelPoint)],
    k1: &Matrix3<f64>,
    k2: &Matrix3<f64>,
) -> Result<Pose> {
    if sample_matches.is_empty() {
        return Err(Error::NotEnoughData { needed: 1, got: 0 });
    }
    let (mut u, _, mut v_t) = svd_square(e.matrix());
    if u.determinant() < 0.0 {
        u = -u;
    }
    if v_t.determinant() < 0.0 {
        v_t = -v_t;
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let t = u.column(2).into_owned();
    let candidates = [
        Pose::new(u * w * v_t, t),
        Pose::new(u * w * v_t, -t),
        Pose::new(u * w.transpose() * v_t, t),
        Pose::new(u * w.transpose() * v_t, -t),
    ];

    let k1i = k1.try_inverse().ok_or(Error::InvalidConfig("singular K1".into()))?;
    let k2i = k2.try_inverse().ok_or(Error::InvalidConfig("singular K2".into()))?;
    let normalized: Vec<_> = sample_matches
        .iter()
        .map(|(a, b)| {
            let x1 = k1i * a.homogeneous();
            let x2 = k2i * b.homogeneous();
            (
                PixelPoint::new(x1.x / x1.z, x1.y / x1.z),
                PixelPoint::new(x2.x / x2.z, x2.y / x2.z),
            )
        })
        .collect();

    let reference = CameraP::new(normalized_camera(&Pose::identity()));
    let mut counts = [0usize; 4];
    for (count, pose) in counts.iter_mut().zip(&candidates) {
        let cam2 = CameraP::new(normalized_camera(pose));
        for &(a, b) in &normalized {
            if let Some(x) = triangulate_dlt(&reference, &cam2, a, b) {
                let p = WorldPoint::from_vector(&x);
                if reference.depth(p) > 0.0 && cam2.depth(p) > 0.0 {
                    *count += 1;
                }
            }
        }
    }
    let (best, &count) = counts
        .iter()
        .enumerate()
        .max_by_key(|(_, c)| **c)
        .expect("four candidates");
    if 2 * count <= normalized.len() {
        return Err(Error::NoCheiralityWinner);
    }
    Ok(candidates[best])
}

/// Outcome of a two-view triangulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triangulation {
    pub point: WorldPoint,
    /// Set when the optimal correction failed and the uncorrected pair
    /// was lifted directly.
    pub used_fallback: bool,
}

/// Linear (DLT) triangulation with row normalization.
pub fn triangulate_dlt(cam1: &CameraP, cam2: &CameraP, p1: PixelPoint, p2: PixelPoint) -> Option<Vector3<f64>> {
    let mut a = Matrix4::zeros();
    let rows = [
        cam1.p.row(0) - cam1.p.row(2) * p1.u,
        cam1.p.row(1) - cam1.p.row(2) * p1.v,
        cam2.p.row(0) - cam2.p.row(2) * p2.u,
        cam2.p.row(1) - cam2.p.row(2) * p2.v,
    ];
    for (i, r) in rows.iter().enumerate() {
        let n = r.norm();
        if n > 0.0 {
            a.set_row(i, &(r / n));
        }
    }
    let (_, _, v_t) = svd_square(&a);
    let x = v_t.row(3).transpose();
    if x[3].abs() < f64::EPSILON * x.norm() {
        return None;
    }
    Some(Vector3::new(x[0] / x[3], x[1] / x[3], x[2] / x[3]))
}

type Poly = Vec<f64>;

fn poly_mul(a: &[f64], b: &[f64]) -> Poly {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Poly {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0))
        .collect()
}

fn poly_scale(a: &[f64], s: f64) -> Poly {
    a.iter().map(|x| x * s).collect()
}

/// Real roots of a polynomial given by ascending coefficients, via the
/// companion matrix.
fn real_roots(coeffs: &[f64]) -> Option<Vec<f64>> {
    let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if max == 0.0 {
        return None;
    }
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.len() > 1 && c.last().unwrap().abs() <= 1e-14 * max {
        c.pop();
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return Some(Vec::new());
    }
    let lead = c[deg];
    let mut comp = DMatrix::zeros(deg, deg);
    for i in 0..deg {
        comp[(0, i)] = -c[deg - 1 - i] / lead;
        if i + 1 < deg {
            comp[(i + 1, i)] = 1.0;
        }
    }
    let ev = comp.try_schur(f64::EPSILON, 10_000)?.complex_eigenvalues();
    Some(
        ev.iter()
            .filter(|z| z.im.abs() <= 1e-7 * (1.0 + z.re.abs()))
            .map(|z| z.re)
            .collect(),
    )
}

/// Optimal two-view triangulation: the pixel pair is corrected to the
/// closest pair satisfying the epipolar constraint (minimizing the sum of
/// squared reprojection distances, via the roots of a degree-6 polynomial),
/// then lifted linearly. Chirality is not checked here.
pub fn triangulate(cam1: &CameraP, cam2: &CameraP, p1: PixelPoint, p2: PixelPoint) -> Result<Triangulation> {
    let c1 = cam1.center();
    let c2 = cam2.center();
    let baseline = (c1 - c2).norm();
    if !(baseline > 1e-12 * c1.norm().max(c2.norm()).max(1.0)) {
        return Err(Error::ParallelRays);
    }
    let d1 = cam1.ray_direction(p1).ok_or(Error::ParallelRays)?;
    let d2 = cam2.ray_direction(p2).ok_or(Error::ParallelRays)?;
    if d1.cross(&d2).norm() <= 1e-12 * d1.norm() * d2.norm() {
        return Err(Error::ParallelRays);
    }

    let f = raw_fundamental(cam1, cam2);
    let corrected = optimal_correction(&(f / f.norm()), p1, p2);
    let (q1, q2, fallback) = match corrected {
        Some((a, b)) => (a, b, false),
        None => (p1, p2, true),
    };
    let x = match triangulate_dlt(cam1, cam2, q1, q2) {
        Some(x) => x,
        None if !fallback => triangulate_dlt(cam1, cam2, p1, p2).ok_or(Error::ParallelRays)?,
        None => return Err(Error::ParallelRays),
    };
    Ok(Triangulation {
        point: WorldPoint::from_vector(&x),
        used_fallback: fallback,
    })
}

fn optimal_correction(f: &Matrix3<f64>, p1: PixelPoint, p2: PixelPoint) -> Option<(PixelPoint, PixelPoint)> {
    let t1 = Matrix3::new(1.0, 0.0, -p1.u, 0.0, 1.0, -p1.v, 0.0, 0.0, 1.0);
    let t2 = Matrix3::new(1.0, 0.0, -p2.u, 0.0, 1.0, -p2.v, 0.0, 0.0, 1.0);
    let t1i = t1.try_inverse()?;
    let t2i = t2.try_inverse()?;
    let f = t2i.transpose() * f * t1i;

    let (u, _, v_t) = svd_square(&f);
    let e1 = v_t.row(2).transpose();
    let e2 = u.column(2).into_owned();
    let n1 = (e1.x * e1.x + e1.y * e1.y).sqrt();
    let n2 = (e2.x * e2.x + e2.y * e2.y).sqrt();
    if n1 < 1e-300 || n2 < 1e-300 {
        return None;
    }
    let e1 = e1 / n1;
    let e2 = e2 / n2;
    let r1 = Matrix3::new(e1.x, e1.y, 0.0, -e1.y, e1.x, 0.0, 0.0, 0.0, 1.0);
    let r2 = Matrix3::new(e2.x, e2.y, 0.0, -e2.y, e2.x, 0.0, 0.0, 0.0, 1.0);
    let f = r2 * f * r1.transpose();

    let (f1, f2) = (e1.z, e2.z);
    let (a, b, c, d) = (f[(1, 1)], f[(1, 2)], f[(2, 1)], f[(2, 2)]);

    // g(t) = t((at+b)^2 + f2^2 (ct+d)^2)^2 - (ad-bc)(1+f1^2 t^2)^2 (at+b)(ct+d)
    let atb = [b, a];
    let ctd = [d, c];
    let p = poly_add(&poly_mul(&atb, &atb), &poly_scale(&poly_mul(&ctd, &ctd), f2 * f2));
    let q = [1.0, 0.0, f1 * f1];
    let lhs = poly_mul(&[0.0, 1.0], &poly_mul(&p, &p));
    let rhs = poly_scale(
        &poly_mul(&poly_mul(&q, &q), &poly_mul(&atb, &ctd)),
        a * d - b * c,
    );
    let g = poly_add(&lhs, &poly_scale(&rhs, -1.0));
    let roots = real_roots(&g)?;

    let cost = |t: f64| {
        let den = (a * t + b).powi(2) + f2 * f2 * (c * t + d).powi(2);
        t * t / (1.0 + f1 * f1 * t * t) + (c * t + d).powi(2) / den
    };
    let inf_den = a * a + f2 * f2 * c * c;
    let mut best: Option<(f64, Option<f64>)> = if f1 != 0.0 && inf_den > 0.0 {
        Some((1.0 / (f1 * f1) + c * c / inf_den, None))
    } else {
        None
    };
    for t in roots {
        let s = cost(t);
        if s.is_finite() && best.is_none_or(|(b, _)| s < b) {
            best = Some((s, Some(t)));
        }
    }
    let (_, tmin) = best?;
    let (l1, l2) = match tmin {
        Some(t) => (
            Vector3::new(t * f1, 1.0, -t),
            Vector3::new(-f2 * (c * t + d), a * t + b, c * t + d),
        ),
        None => (Vector3::new(f1, 0.0, -1.0), Vector3::new(-f2 * c, a, c)),
    };
    let closest = |l: Vector3<f64>| Vector3::new(-l.x * l.z, -l.y * l.z, l.x * l.x + l.y * l.y);
    let x1 = t1i * r1.transpose() * closest(l1);
    let x2 = t2i * r2.transpose() * closest(l2);
    if x1.z.abs() < 1e-300 || x2.z.abs() < 1e-300 {
        return None;
    }
    let q1 = PixelPoint::new(x1.x / x1.z, x1.y / x1.z);
    let q2 = PixelPoint::new(x2.x / x2.z, x2.y / x2.z);
    if [q1.u, q1.v, q2.u, q2.v].iter().all(|v| v.is_finite()) {
        Some((q1, q2))
    } else {
        None
    }
}
