//! Estimation of a local affine map from matched image directions.
//!
//! Every direction pair contributes the two rows of `alpha * d2 = A * d1`.
//! With known scales the rows are inhomogeneous in `(a1..a4)`; without them
//! the scale joins the unknown vector and the system becomes homogeneous,
//! so extra information is needed to fix the overall magnitude: either a
//! determinant (`estimate_det3udir`, `solve_det_constrained`) or the two
//! epipolar rows `A^T n2 = -n1` of a known fundamental matrix
//! (`estimate_f2udir`, `estimate_f3udir`).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::epipolar::{epipolar_normals, FundamentalMatrix};
use crate::error::{Error, Result};
use crate::geometry::{AffineMap, DirectionPair, PixelPoint};
use crate::linalg::{least_squares, null_vector, svd_square};

/// The five direction-based estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    /// Fundamental matrix plus horizontal and vertical unscaled directions.
    #[serde(rename = "F2UDIR")]
    F2UDir,
    /// Fundamental matrix plus three unscaled directions (least squares).
    #[serde(rename = "F3UDIR")]
    F3UDir,
    /// Three unscaled directions with a known determinant.
    #[serde(rename = "DET3UDIR")]
    Det3UDir,
    /// Two scaled directions, solved exactly.
    #[serde(rename = "2SDIR")]
    TwoSDir,
    /// Three scaled directions (least squares).
    #[serde(rename = "3SDIR")]
    ThreeSDir,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::F2UDir,
        EstimatorKind::F3UDir,
        EstimatorKind::Det3UDir,
        EstimatorKind::TwoSDir,
        EstimatorKind::ThreeSDir,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::F2UDir => "F2UDIR",
            EstimatorKind::F3UDir => "F3UDIR",
            EstimatorKind::Det3UDir => "DET3UDIR",
            EstimatorKind::TwoSDir => "2SDIR",
            EstimatorKind::ThreeSDir => "3SDIR",
        }
    }

    pub fn uses_fundamental(self) -> bool {
        matches!(self, EstimatorKind::F2UDir | EstimatorKind::F3UDir)
    }

    /// Number of directions per corner the estimator consumes.
    pub fn direction_count(self) -> usize {
        match self {
            EstimatorKind::F2UDir | EstimatorKind::TwoSDir => 2,
            _ => 3,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == up)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown estimator '{s}'")))
    }
}

/// An estimated affine map with the residual of the system it solved.
///
/// For the scaled estimators the residual is `max_i |A d1_i - alpha_i d2_i|`;
/// for the others it is the 2-norm of the stacked linear-system residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineEstimate {
    pub affine: AffineMap,
    pub residual: f64,
}

fn check_independent(a: &Vector2<f64>, b: &Vector2<f64>) -> bool {
    let det = a.x * b.y - a.y * b.x;
    det.abs() >= 1e-10 * a.norm() * b.norm()
}

fn require_scale(d: &DirectionPair) -> Result<f64> {
    d.scale
        .ok_or_else(|| Error::InvalidConfig("scaled estimator needs direction scales".into()))
}

fn scaled_rows(dirs: &[DirectionPair]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = dirs.len();
    let mut m = DMatrix::zeros(2 * n, 4);
    let mut b = DVector::zeros(2 * n);
    for (i, d) in dirs.iter().enumerate() {
        let alpha = require_scale(d)?;
        m[(2 * i, 0)] = d.d1.x;
        m[(2 * i, 1)] = d.d1.y;
        m[(2 * i + 1, 2)] = d.d1.x;
        m[(2 * i + 1, 3)] = d.d1.y;
        b[2 * i] = alpha * d.d2.x;
        b[2 * i + 1] = alpha * d.d2.y;
    }
    Ok((m, b))
}

fn max_direction_residual(a: &AffineMap, dirs: &[DirectionPair]) -> f64 {
    dirs.iter()
        .map(|d| (a.apply(&d.d1) - d.scale.unwrap_or(1.0) * d.d2).norm())
        .fold(0.0, f64::max)
}

/// Exact solution from two scaled directions (4x4 inhomogeneous system).
pub fn estimate_2sdir(dirs: &[DirectionPair; 2]) -> Result<AffineEstimate> {
    if !check_independent(&dirs[0].d1, &dirs[1].d1) {
        return Err(Error::DegenerateDirections);
    }
    let (m, b) = scaled_rows(dirs)?;
    let m4 = Matrix4::from_iterator(m.iter().copied());
    let b4 = Vector4::from_iterator(b.iter().copied());
    let x = m4.lu().solve(&b4).ok_or(Error::DegenerateDirections)?;
    let affine = AffineMap::new(x[0], x[1], x[2], x[3]);
    Ok(AffineEstimate {
        affine,
        residual: max_direction_residual(&affine, dirs),
    })
}

/// Least-squares solution from three (or more) scaled directions.
pub fn estimate_3sdir(dirs: &[DirectionPair]) -> Result<AffineEstimate> {
    if dirs.len() < 2 {
        return Err(Error::NotEnoughData {
            needed: 2,
            got: dirs.len(),
        });
    }
    let independent = dirs.iter().enumerate().any(|(i, a)| {
        dirs[i + 1..]
            .iter()
            .any(|b| check_independent(&a.d1, &b.d1))
    });
    if !independent {
        return Err(Error::DegenerateDirections);
    }
    let (m, b) = scaled_rows(dirs)?;
    let (x, _) = least_squares(&m, &b).ok_or(Error::DegenerateDirections)?;
    let affine = AffineMap::new(x[0], x[1], x[2], x[3]);
    Ok(AffineEstimate {
        affine,
        residual: max_direction_residual(&affine, dirs),
    })
}

/// Homogeneous least-squares problem `min |M x|` subject to
/// `a1 a4 - a2 a3 = s`, where `x = [a1, a2, a3, a4, alpha_1, .., alpha_N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedSystem {
    pub m: DMatrix<f64>,
    pub s: f64,
}

impl ConstrainedSystem {
    pub fn new(m: DMatrix<f64>, s: f64) -> Result<Self> {
        if m.ncols() < 5 || m.nrows() < 6 {
            return Err(Error::NotEnoughData {
                needed: 6,
                got: m.nrows(),
            });
        }
        if s == 0.0 || !s.is_finite() {
            return Err(Error::InvalidConfig("target determinant must be nonzero".into()));
        }
        Ok(Self { m, s })
    }

    /// Stacks the unscaled-direction rows
    /// `[u1 v1 0 0 .. -u2 ..; 0 0 u1 v1 .. -v2 ..]` of every pair.
    pub fn from_directions(dirs: &[DirectionPair], s: f64) -> Result<Self> {
        Self::new(unscaled_rows(dirs), s)
    }

    pub fn direction_count(&self) -> usize {
        self.m.ncols() - 4
    }
}

fn unscaled_rows(dirs: &[DirectionPair]) -> DMatrix<f64> {
    let n = dirs.len();
    let mut m = DMatrix::zeros(2 * n, 4 + n);
    for (i, d) in dirs.iter().enumerate() {
        m[(2 * i, 0)] = d.d1.x;
        m[(2 * i, 1)] = d.d1.y;
        m[(2 * i, 4 + i)] = -d.d2.x;
        m[(2 * i + 1, 2)] = d.d1.x;
        m[(2 * i + 1, 3)] = d.d1.y;
        m[(2 * i + 1, 4 + i)] = -d.d2.y;
    }
    m
}

/// Result of the determinant-constrained solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedSolution {
    pub affine: AffineMap,
    pub scales: Vec<f64>,
    /// `|M x|` at the solution.
    pub residual: f64,
}

impl ConstrainedSolution {
    pub fn vector(&self) -> DVector<f64> {
        let mut x = DVector::zeros(4 + self.scales.len());
        x.rows_mut(0, 4).copy_from_slice(&self.affine.entries());
        x.rows_mut(4, self.scales.len()).copy_from_slice(&self.scales);
        x
    }
}

/// Flips the sign of the whole solution so that the scales sum positive.
/// `x` and `-x` share residual and determinant; matched directions point the
/// same way in both images, so the scales must be positive.
fn orient_positive_scales(x: &mut DVector<f64>) {
    let sum: f64 = x.rows(4, x.len() - 4).sum();
    if sum < 0.0 {
        x.neg_mut();
    }
}

fn det_of(x: &DVector<f64>) -> f64 {
    x[0] * x[3] - x[1] * x[2]
}

fn split_solution(x: &DVector<f64>, m: &DMatrix<f64>) -> ConstrainedSolution {
    ConstrainedSolution {
        affine: AffineMap::new(x[0], x[1], x[2], x[3]),
        scales: x.rows(4, x.len() - 4).iter().copied().collect(),
        residual: (m * x).norm(),
    }
}

/// Minimizes `|M x|` subject to `a1 a4 - a2 a3 = s`.
///
/// Stationary points satisfy the generalized eigenproblem
/// `M^T M x = mu B x` with the constraint matrix `B` (ones on the affine
/// anti-diagonal, signs `+ - - +`, zero elsewhere). Rows of that system for
/// the scale unknowns carry no `B` term, so they are eliminated in closed form
/// and the remaining 4x4 pencil `S a = mu B4 a` is solved, `S` being the
/// Schur complement of the scale block. Eigenvectors whose determinant sign
/// differs from `s` cannot be rescaled onto the constraint and are dropped;
/// the rest are rescaled and the candidate with the least `|M x|` wins.
pub fn solve_det_constrained(sys: &ConstrainedSystem) -> Result<ConstrainedSolution> {
    let m = &sys.m;
    let s = sys.s;
    let n = m.ncols() - 4;
    let ma = m.columns(0, 4).into_owned();
    let mal = m.columns(4, n).into_owned();

    // alpha*(a) = -(Mal^T Mal)^+ Mal^T Ma a
    let gram = mal.transpose() * &mal;
    let gram_pinv = gram
        .clone()
        .pseudo_inverse(1e-14 * gram.norm().max(f64::MIN_POSITIVE))
        .map_err(|_| Error::NoAdmissibleEigenvector)?;
    let elim = -(&gram_pinv * mal.transpose() * &ma);
    let reduced = &ma + &mal * &elim;
    let schur_dyn = reduced.transpose() * &reduced;
    let schur = Matrix4::from_iterator(schur_dyn.iter().copied());
    let b4 = Matrix4::new(
        0.0, 0.0, 0.0, 1.0, //
        0.0, 0.0, -1.0, 0.0, //
        0.0, -1.0, 0.0, 0.0, //
        1.0, 0.0, 0.0, 0.0,
    );
    // B4 is its own inverse, so S a = mu B4 a  <=>  (B4 S) a = mu a.
    let pencil = b4 * schur;
    let scale = pencil.abs().max().max(f64::MIN_POSITIVE);
    let eigenvalues = pencil
        .try_schur(f64::EPSILON, 10_000)
        .ok_or(Error::NoAdmissibleEigenvector)?
        .complex_eigenvalues();

    let mut best: Option<(f64, DVector<f64>)> = None;
    for ev in eigenvalues.iter() {
        if ev.im.abs() > 1e-6 * scale {
            continue;
        }
        let mu = ev.re;
        let shifted = pencil - Matrix4::identity() * mu;
        let (_, _, v_t) = svd_square(&shifted);
        let a = v_t.row(3).transpose();
        let det = a[0] * a[3] - a[1] * a[2];
        if det == 0.0 || det.signum() != s.signum() {
            continue;
        }
        let a = a * (s / det).sqrt();
        let alpha = &elim * DVector::from_column_slice(a.as_slice());
        let mut x = DVector::zeros(4 + n);
        x.rows_mut(0, 4).copy_from(&a);
        x.rows_mut(4, n).copy_from(&alpha);
        let r = (m * &x).norm();
        if best.as_ref().is_none_or(|(br, _)| r < *br) {
            best = Some((r, x));
        }
    }
    let (_, mut x) = best.ok_or(Error::NoAdmissibleEigenvector)?;
    // the SVD eigenvector is only approximately on the constraint after
    // rescaling; re-impose it exactly
    let det = det_of(&x);
    let fix = (s / det).sqrt();
    for i in 0..4 {
        x[i] *= fix;
    }
    orient_positive_scales(&mut x);
    Ok(split_solution(&x, m))
}

/// Affine map from three (or more) unscaled directions and a determinant.
///
/// With exactly three directions the 6x7 system has a one-dimensional null
/// space that is scaled onto the determinant; more directions go through
/// [`solve_det_constrained`].
pub fn estimate_det3udir(dirs: &[DirectionPair], det_hint: f64) -> Result<AffineEstimate> {
    if dirs.len() < 3 {
        return Err(Error::NotEnoughData {
            needed: 3,
            got: dirs.len(),
        });
    }
    if det_hint == 0.0 || !det_hint.is_finite() {
        return Err(Error::InvalidConfig("determinant hint must be nonzero".into()));
    }
    let m = unscaled_rows(dirs);
    if dirs.len() > 3 {
        let sol = solve_det_constrained(&ConstrainedSystem::new(m, det_hint)?)?;
        return Ok(AffineEstimate {
            affine: sol.affine,
            residual: sol.residual,
        });
    }
    let (mut x, sv) = null_vector(&m);
    let k = sv.len();
    if sv[k - 2] - sv[k - 1] <= 1e-8 * sv[0] {
        return Err(Error::RankDeficient);
    }
    let det = det_of(&x);
    if det == 0.0 || det.signum() != det_hint.signum() {
        return Err(Error::SignMismatch);
    }
    x *= (det_hint / det).sqrt();
    orient_positive_scales(&mut x);
    let sol = split_solution(&x, &m);
    Ok(AffineEstimate {
        affine: sol.affine,
        residual: sol.residual,
    })
}

/// `|A^T n2 + n1|` with unnormalized epipolar-line normals.
pub fn epipolar_constraint_residual(
    a: &AffineMap,
    f: &FundamentalMatrix,
    p1: PixelPoint,
    p2: PixelPoint,
) -> f64 {
    let (n1, n2) = epipolar_normals(f, p1, p2);
    (a.matrix().transpose() * n2 + n1).norm()
}

fn fundamental_system(
    f: &FundamentalMatrix,
    p1: PixelPoint,
    p2: PixelPoint,
    dirs: &[DirectionPair],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if dirs.len() < 2 {
        return Err(Error::NotEnoughData {
            needed: 2,
            got: dirs.len(),
        });
    }
    let (n1, n2) = epipolar_normals(f, p1, p2);
    let fnorm = f.matrix().norm();
    if n1.norm() <= 1e-12 * fnorm * p2.homogeneous().norm()
        || n2.norm() <= 1e-12 * fnorm * p1.homogeneous().norm()
    {
        return Err(Error::EpipoleAtPoint);
    }
    let n = dirs.len();
    let mut m = DMatrix::zeros(2 + 2 * n, 4 + n);
    let mut b = DVector::zeros(2 + 2 * n);
    // A^T n2 = -n1, scaled so the rows do not depend on the scale of F
    let (n1, n2) = (n1 / n2.norm(), n2 / n2.norm());
    m[(0, 0)] = n2.x;
    m[(0, 2)] = n2.y;
    m[(1, 1)] = n2.x;
    m[(1, 3)] = n2.y;
    b[0] = -n1.x;
    b[1] = -n1.y;
    m.view_mut((2, 0), (2 * n, 4 + n)).copy_from(&unscaled_rows(dirs));
    Ok((m, b))
}

fn affine_from_solution(x: &DVector<f64>, m: &DMatrix<f64>, b: &DVector<f64>) -> AffineEstimate {
    AffineEstimate {
        affine: AffineMap::new(x[0], x[1], x[2], x[3]),
        residual: (m * x - b).norm(),
    }
}

/// Exact 6x6 solve from the epipolar rows and two unscaled directions.
pub fn estimate_f2udir(
    f: &FundamentalMatrix,
    p1: PixelPoint,
    p2: PixelPoint,
    dirs: &[DirectionPair; 2],
) -> Result<AffineEstimate> {
    let (m, b) = fundamental_system(f, p1, p2, dirs)?;
    let (x, cond) = least_squares(&m, &b).ok_or(Error::SingularSystem(f64::INFINITY))?;
    if cond > 1e12 {
        return Err(Error::SingularSystem(cond));
    }
    Ok(affine_from_solution(&x, &m, &b))
}

/// Unweighted least squares over the epipolar rows and three (or more)
/// unscaled directions.
pub fn estimate_f3udir(
    f: &FundamentalMatrix,
    p1: PixelPoint,
    p2: PixelPoint,
    dirs: &[DirectionPair],
) -> Result<AffineEstimate> {
    let (m, b) = fundamental_system(f, p1, p2, dirs)?;
    let (x, cond) = least_squares(&m, &b).ok_or(Error::SingularSystem(f64::INFINITY))?;
    if cond > 1e12 {
        return Err(Error::SingularSystem(cond));
    }
    Ok(affine_from_solution(&x, &m, &b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Matrix3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(x, y)
    }

    fn random_affine(rng: &mut ChaCha8Rng) -> Matrix2<f64> {
        loop {
            let m = Matrix2::from_fn(|_, _| rng.random_range(-2.0..2.0));
            if m.determinant() > 0.3 {
                return m;
            }
        }
    }

    fn random_dir(rng: &mut ChaCha8Rng) -> Vector2<f64> {
        let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        v(t.cos(), t.sin()) * rng.random_range(0.5..3.0)
    }

    /// Forward synthesis: d2 is a unit vector along A d1, alpha its length.
    fn synth(a: &Matrix2<f64>, d1: Vector2<f64>) -> DirectionPair {
        let img = a * d1;
        DirectionPair::scaled(d1, img / img.norm(), img.norm())
    }

    #[test]
    fn two_scaled_identity() {
        let dirs = [
            DirectionPair::scaled(v(1.0, 0.0), v(1.0, 0.0), 1.0),
            DirectionPair::scaled(v(0.0, 1.0), v(0.0, 1.0), 1.0),
        ];
        let est = estimate_2sdir(&dirs).unwrap();
        assert_eq!(est.affine, AffineMap::IDENTITY);
    }

    #[test]
    fn two_scaled_rotation() {
        let dirs = [
            DirectionPair::scaled(v(1.0, 0.0), v(0.0, 1.0), 2.0),
            DirectionPair::scaled(v(0.0, 1.0), v(-1.0, 0.0), 2.0),
        ];
        let a = estimate_2sdir(&dirs).unwrap().affine;
        assert!(a.relative_error(&AffineMap::new(0.0, -2.0, 2.0, 0.0)) < 1e-15);
    }

    #[test]
    fn two_scaled_rejects_parallel() {
        let dirs = [
            DirectionPair::scaled(v(1.0, 1.0), v(1.0, 0.0), 1.0),
            DirectionPair::scaled(v(2.0, 2.0), v(0.0, 1.0), 1.0),
        ];
        assert_eq!(estimate_2sdir(&dirs), Err(Error::DegenerateDirections));
    }

    #[test]
    fn scaled_estimators_need_scales() {
        let dirs = [
            DirectionPair::unscaled(v(1.0, 0.0), v(1.0, 0.0)),
            DirectionPair::unscaled(v(0.0, 1.0), v(0.0, 1.0)),
        ];
        assert!(matches!(estimate_2sdir(&dirs), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn scaled_estimators_recover_random_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = random_affine(&mut rng);
            let d = [random_dir(&mut rng), random_dir(&mut rng), random_dir(&mut rng)];
            if !check_independent(&d[0], &d[1]) || (d[0].perp(&d[1])).abs() < 0.2 {
                continue;
            }
            let truth = AffineMap::from_matrix(&a);
            let two = estimate_2sdir(&[synth(&a, d[0]), synth(&a, d[1])]).unwrap();
            assert!(two.affine.relative_error(&truth) < 1e-10);
            let dirs: Vec<_> = d.iter().map(|&x| synth(&a, x)).collect();
            let three = estimate_3sdir(&dirs).unwrap();
            assert!(three.affine.relative_error(&truth) < 1e-10);
            assert!(three.residual < 1e-12);
        }
    }

    #[test]
    fn three_scaled_matches_normal_equations() {
        let a = Matrix2::new(1.1, 0.2, -0.1, 0.9);
        let mut dirs: Vec<_> = [v(1.0, 0.0), v(0.0, 1.0), v(1.0, 1.0)]
            .iter()
            .map(|&d| synth(&a, d))
            .collect();
        // rotate the third image-2 direction by one degree
        let r = nalgebra::Rotation2::new(1f64.to_radians());
        dirs[2].d2 = r * dirs[2].d2;
        let est = estimate_3sdir(&dirs).unwrap();
        assert!(est.residual > 0.0);

        // independent oracle: (M^T M)^{-1} M^T b assembled by hand
        let mut ata = Matrix4::<f64>::zeros();
        let mut atb = Vector4::<f64>::zeros();
        for d in &dirs {
            let alpha = d.scale.unwrap();
            let rows = [
                (Vector4::new(d.d1.x, d.d1.y, 0.0, 0.0), alpha * d.d2.x),
                (Vector4::new(0.0, 0.0, d.d1.x, d.d1.y), alpha * d.d2.y),
            ];
            for (r, b) in rows {
                ata += r * r.transpose();
                atb += r * b;
            }
        }
        let x = ata.try_inverse().unwrap() * atb;
        let oracle = AffineMap::new(x[0], x[1], x[2], x[3]);
        assert!(est.affine.relative_error(&oracle) < 1e-9);
        assert!(est.affine.relative_error(&AffineMap::from_matrix(&a)) < 0.05);
    }

    #[test]
    fn det3_identity_and_pure_scale() {
        let ds = [v(1.0, 0.0), v(0.0, 1.0), v(1.0, 1.0)];
        let unscaled: Vec<_> = ds
            .iter()
            .map(|&d| DirectionPair::unscaled(d, d / d.norm()))
            .collect();
        let a = estimate_det3udir(&unscaled, 1.0).unwrap().affine;
        assert!(a.relative_error(&AffineMap::IDENTITY) < 1e-12);
        let a = estimate_det3udir(&unscaled, 4.0).unwrap().affine;
        assert!(a.relative_error(&AffineMap::new(2.0, 0.0, 0.0, 2.0)) < 1e-12);
    }

    #[test]
    fn det3_recovers_random_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 200 {
            let a = random_affine(&mut rng);
            let d = [random_dir(&mut rng), random_dir(&mut rng), random_dir(&mut rng)];
            let independent = [(0, 1), (0, 2), (1, 2)]
                .iter()
                .all(|&(i, j)| (d[i].perp(&d[j]) / (d[i].norm() * d[j].norm())).abs() > 0.2);
            if !independent {
                continue;
            }
            let dirs: Vec<_> = d.iter().map(|&x| synth(&a, x).without_scale()).collect();
            let est = estimate_det3udir(&dirs, a.determinant()).unwrap();
            assert!(est.affine.relative_error(&AffineMap::from_matrix(&a)) < 1e-8);
            checked += 1;
        }
    }

    #[test]
    fn det3_sign_mismatch() {
        let ds = [v(1.0, 0.0), v(0.0, 1.0), v(1.0, 1.0)];
        let dirs: Vec<_> = ds
            .iter()
            .map(|&d| DirectionPair::unscaled(d, d / d.norm()))
            .collect();
        assert_eq!(estimate_det3udir(&dirs, -1.0), Err(Error::SignMismatch));
    }

    #[test]
    fn det3_rank_deficient_when_directions_repeat() {
        let d = v(1.0, 0.0);
        let dirs = vec![DirectionPair::unscaled(d, d); 3];
        assert_eq!(estimate_det3udir(&dirs, 1.0), Err(Error::RankDeficient));
    }

    #[test]
    fn constrained_identity_four_pairs() {
        let ds = [v(1.0, 0.0), v(0.0, 1.0), v(1.0, 1.0), v(1.0, -2.0)];
        let dirs: Vec<_> = ds.iter().map(|&d| DirectionPair::unscaled(d, d)).collect();
        let sol = solve_det_constrained(&ConstrainedSystem::from_directions(&dirs, 1.0).unwrap())
            .unwrap();
        assert!(sol.affine.relative_error(&AffineMap::IDENTITY) < 1e-10);
        for s in &sol.scales {
            assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn constrained_rejects_bad_systems() {
        assert!(ConstrainedSystem::new(DMatrix::zeros(4, 6), 1.0).is_err());
        assert!(ConstrainedSystem::new(DMatrix::zeros(8, 8), 0.0).is_err());
    }

    #[test]
    fn constrained_is_stationary_for_full_pencil() {
        // the eliminated solution must satisfy M^T M x = mu B x for some mu
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_affine(&mut rng);
        let r = nalgebra::Rotation2::new(0.02);
        let dirs: Vec<_> = (0..5)
            .map(|_| {
                let mut p = synth(&a, random_dir(&mut rng)).without_scale();
                p.d2 = r * p.d2;
                p
            })
            .collect();
        let sys = ConstrainedSystem::from_directions(&dirs, a.determinant()).unwrap();
        let sol = solve_det_constrained(&sys).unwrap();
        let x = sol.vector();
        let lhs = sys.m.transpose() * &sys.m * &x;
        let mut bx = DVector::zeros(x.len());
        bx[0] = x[3];
        bx[1] = -x[2];
        bx[2] = -x[1];
        bx[3] = x[0];
        let mu = lhs.dot(&bx) / bx.dot(&bx);
        assert!((lhs - bx * mu).norm() < 1e-9 * (1.0 + x.norm()));
        assert!((sol.affine.determinant() - sys.s).abs() < 1e-10 * sys.s.abs());
    }

    fn standard_stereo_f() -> FundamentalMatrix {
        // [t]_x with t = (1, 0, 0)
        FundamentalMatrix::new(Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0))
    }

    #[test]
    fn epipolar_residual_identity_case() {
        let f = standard_stereo_f();
        let p = PixelPoint::new(0.0, 0.0);
        assert!(epipolar_constraint_residual(&AffineMap::IDENTITY, &f, p, p) < 1e-15);
        // slope of the residual in a1 is |n2.x| (zero here), in a3 it is |n2.y|
        let (_, n2) = epipolar_normals(&f, p, p);
        for eps in [1e-3, 1e-2, 1e-1] {
            let r1 = epipolar_constraint_residual(&AffineMap::new(1.0 + eps, 0.0, 0.0, 1.0), &f, p, p);
            assert!((r1 - eps * n2.x.abs()).abs() < 1e-15);
            let r3 = epipolar_constraint_residual(&AffineMap::new(1.0, 0.0, eps, 1.0), &f, p, p);
            assert!((r3 - eps * n2.y.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn f2udir_identity_scene() {
        let f = standard_stereo_f();
        let p1 = PixelPoint::new(0.3, -0.2);
        let p2 = PixelPoint::new(0.5, -0.2);
        // a direction along the (horizontal) epipolar lines carries no scale
        let dirs = [
            DirectionPair::unscaled(v(1.0, 1.0), v(1.0, 1.0)),
            DirectionPair::unscaled(v(0.0, 1.0), v(0.0, 1.0)),
        ];
        let a = estimate_f2udir(&f, p1, p2, &dirs).unwrap().affine;
        assert!(a.relative_error(&AffineMap::IDENTITY) < 1e-12);
        let d3 = [dirs[0], dirs[1], DirectionPair::unscaled(v(1.0, -2.0), v(1.0, -2.0))];
        let a = estimate_f3udir(&f, p1, p2, &d3).unwrap().affine;
        assert!(a.relative_error(&AffineMap::IDENTITY) < 1e-12);
    }

    #[test]
    fn f2udir_singular_for_direction_along_epipolar_line() {
        let f = standard_stereo_f();
        let p = PixelPoint::new(0.3, -0.2);
        let dirs = [
            DirectionPair::unscaled(v(1.0, 0.0), v(1.0, 0.0)),
            DirectionPair::unscaled(v(0.0, 1.0), v(0.0, 1.0)),
        ];
        assert!(matches!(estimate_f2udir(&f, p, p, &dirs), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn f_estimators_detect_epipole() {
        // epipole of [t]_x, t = (1,0,0), is the point at infinity along x;
        // a finite F with epipole at the origin instead:
        let f = FundamentalMatrix::new(Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        let p = PixelPoint::new(0.0, 0.0);
        let dirs = [
            DirectionPair::unscaled(v(1.0, 0.0), v(1.0, 0.0)),
            DirectionPair::unscaled(v(0.0, 1.0), v(0.0, 1.0)),
        ];
        assert_eq!(estimate_f2udir(&f, p, p, &dirs), Err(Error::EpipoleAtPoint));
    }
}
