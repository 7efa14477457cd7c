//! Synthetic evaluation world: three mutually perpendicular chessboards
//! seen by a calibrated stereo pair.
//!
//! World coordinates coincide with the first camera frame (`P1 = K [I | 0]`).
//! The boards meet at a common edge point `O`; board 1 lies on `Z = O.z`,
//! board 2 on `Y = O.y` (the floor, since image `v` grows with `Y`) and
//! board 3 on `X = O.x`. Each grid is rotated in its own plane by
//! `board_rotation_deg` so that no board line is parallel to the epipolar
//! lines of the special motions.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::epipolar::{affine_from_homography, homography_from_plane, EssentialMatrix, FundamentalMatrix, Plane};
use crate::error::{Error, Result};
use crate::geometry::{compose_camera, intrinsics, project, AffineMap, CameraP, DirectionPair, PixelPoint, Pose, WorldPoint};

pub const SCHEMA_VERSION: u32 = 1;

const MAX_POSE_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseKind {
    General,
    Planar,
    StandardStereo,
    Forward,
}

impl PoseKind {
    pub const ALL: [PoseKind; 4] = [
        PoseKind::General,
        PoseKind::Planar,
        PoseKind::StandardStereo,
        PoseKind::Forward,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PoseKind::General => "general",
            PoseKind::Planar => "planar",
            PoseKind::StandardStereo => "standard_stereo",
            PoseKind::Forward => "forward",
        }
    }
}

impl fmt::Display for PoseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PoseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        match key.as_str() {
            "general" => Ok(PoseKind::General),
            "planar" => Ok(PoseKind::Planar),
            "standard_stereo" | "stereo" | "standard" => Ok(PoseKind::StandardStereo),
            "forward" => Ok(PoseKind::Forward),
            _ => Err(Error::InvalidConfig(format!("unknown pose kind '{s}'"))),
        }
    }
}

/// How the length ratio of a direction pair is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleModel {
    /// `|A d1|` for unit `d1`: the exact first-order length ratio at the corner.
    #[default]
    Tangent,
    /// Ratio of the finite segment lengths to the neighbouring grid corner.
    Segment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub pose_kind: PoseKind,
    pub board_rows: usize,
    pub board_cols: usize,
    pub square_size: f64,
    /// Camera-center distance for every pose family.
    pub baseline: f64,
    /// Bound on each random rotation angle (General and Planar).
    pub max_rotation_deg: f64,
    pub board_rotation_deg: f64,
    /// Point shared by the three planes.
    pub corner_edge: [f64; 3],
    pub focal: f64,
    pub principal_point: [f64; 2],
    pub rng_seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            pose_kind: PoseKind::General,
            board_rows: 6,
            board_cols: 8,
            square_size: 30.0,
            baseline: 300.0,
            max_rotation_deg: 15.0,
            board_rotation_deg: 45.0,
            corner_edge: [450.0, 450.0, 1000.0],
            focal: 800.0,
            principal_point: [640.0, 480.0],
            rng_seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn new(pose_kind: PoseKind, rng_seed: u64) -> Self {
        Self {
            pose_kind,
            rng_seed,
            ..Self::default()
        }
    }

    pub fn intrinsics(&self) -> Matrix3<f64> {
        intrinsics(self.focal, self.principal_point[0], self.principal_point[1])
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.board_rows < 2 || self.board_cols < 2 {
            return Err(Error::InvalidConfig("board needs at least 2x2 corners".into()));
        }
        if !positive(self.square_size) || !positive(self.baseline) || !positive(self.focal) {
            return Err(Error::InvalidConfig(
                "square size, baseline and focal length must be positive".into(),
            ));
        }
        if !(self.max_rotation_deg >= 0.0) || !self.board_rotation_deg.is_finite() {
            return Err(Error::InvalidConfig("invalid rotation bounds".into()));
        }
        Ok(())
    }
}

/// One chessboard corner with its ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corner {
    pub id: usize,
    /// 1, 2 or 3.
    pub plane: u8,
    pub row: usize,
    pub col: usize,
    pub world: WorldPoint,
    pub p1: PixelPoint,
    pub p2: PixelPoint,
    pub affine: AffineMap,
    /// Unit plane normal facing the first camera.
    #[serde(with = "crate::geometry::vec3_array")]
    pub normal: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub schema: u32,
    pub config: SceneConfig,
    #[serde(with = "crate::geometry::mat3_rows")]
    pub k: Matrix3<f64>,
    pub cam1: CameraP,
    pub cam2: CameraP,
    /// Maps first-camera coordinates into the second camera frame.
    pub pose: Pose,
    pub fundamental: FundamentalMatrix,
    pub essential: EssentialMatrix,
    /// Planes 1, 2 and 3 with normals facing the first camera.
    pub planes: [Plane; 3],
    pub corners: Vec<Corner>,
}

impl GroundTruth {
    pub fn corner(&self, id: usize) -> Option<&Corner> {
        self.corners.get(id).filter(|c| c.id == id)
    }

    pub fn matches(&self) -> Vec<(PixelPoint, PixelPoint)> {
        self.corners.iter().map(|c| (c.p1, c.p2)).collect()
    }

    /// Distance between the camera centers.
    pub fn baseline(&self) -> f64 {
        self.pose.center().norm()
    }
}

/// Horizontal, vertical and diagonal direction pairs observed at a corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionObservation {
    pub corner: usize,
    pub horizontal: DirectionPair,
    pub vertical: DirectionPair,
    pub diagonal: DirectionPair,
    pub noisy: bool,
}

impl DirectionObservation {
    pub fn pairs(&self) -> [DirectionPair; 3] {
        [self.horizontal, self.vertical, self.diagonal]
    }
}

struct BoardFrame {
    center: Vector3<f64>,
    grid_col: Vector3<f64>,
    grid_row: Vector3<f64>,
}

fn board_frames(cfg: &SceneConfig) -> [BoardFrame; 3] {
    let o = Vector3::from(cfg.corner_edge);
    let s = cfg.square_size;
    let width = (cfg.board_cols - 1) as f64 * s;
    let height = (cfg.board_rows - 1) as f64 * s;
    let (sin, cos) = cfg.board_rotation_deg.to_radians().sin_cos();
    let ext_c = (width * cos.abs() + height * sin.abs()) / 2.0 + s;
    let ext_r = (width * sin.abs() + height * cos.abs()) / 2.0 + s;
    let x = Vector3::x();
    let y = Vector3::y();
    let z = Vector3::z();
    // (column axis, row axis, signs of the offsets that move into the quadrant)
    let layout = [(x, y, -1.0, -1.0), (x, -z, -1.0, 1.0), (-z, y, 1.0, -1.0)];
    layout.map(|(e_c, e_r, sc, sr)| BoardFrame {
        center: o + e_c * (sc * ext_c) + e_r * (sr * ext_r),
        grid_col: e_c * cos + e_r * sin,
        grid_row: e_r * cos - e_c * sin,
    })
}

impl BoardFrame {
    /// Grid point `(row, col)`, also defined one step outside the board.
    fn point(&self, cfg: &SceneConfig, row: f64, col: f64) -> Vector3<f64> {
        let c = col - (cfg.board_cols - 1) as f64 / 2.0;
        let r = row - (cfg.board_rows - 1) as f64 / 2.0;
        self.center + (self.grid_col * c + self.grid_row * r) * cfg.square_size
    }
}

fn scene_planes(cfg: &SceneConfig) -> [Plane; 3] {
    let o = cfg.corner_edge;
    [
        Plane::new(-Vector3::z(), -o[2]),
        Plane::new(-Vector3::y(), -o[1]),
        Plane::new(-Vector3::x(), -o[0]),
    ]
}

fn uniform_angle(rng: &mut ChaCha8Rng, bound_deg: f64) -> f64 {
    if bound_deg == 0.0 {
        0.0
    } else {
        rng.random_range(-bound_deg..=bound_deg).to_radians()
    }
}

fn sample_pose(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Pose {
    let b = cfg.baseline;
    match cfg.pose_kind {
        PoseKind::StandardStereo => Pose::new(Matrix3::identity(), Vector3::new(b, 0.0, 0.0)),
        PoseKind::Forward => Pose::new(Matrix3::identity(), Vector3::new(0.0, 0.0, b)),
        PoseKind::Planar => {
            let yaw = uniform_angle(rng, cfg.max_rotation_deg);
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw);
            Pose::new(*rot.matrix(), Vector3::new(phi.cos(), 0.0, phi.sin()) * b)
        }
        PoseKind::General => {
            let m = cfg.max_rotation_deg;
            let rot = Rotation3::from_euler_angles(uniform_angle(rng, m), uniform_angle(rng, m), uniform_angle(rng, m));
            let dir = loop {
                let v = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
                let n: f64 = v.norm();
                if n > 1e-9 {
                    break v / n;
                }
            };
            let center = dir * b;
            Pose::new(*rot.matrix(), -(rot.matrix() * center))
        }
    }
}

fn check_pose(points: &[Vector3<f64>], planes: &[Plane; 3], pose: &Pose, cam2: &CameraP) -> Result<()> {
    let c2 = pose.center();
    for x in points {
        if !(x.z > 0.0) {
            return Err(Error::CornersBehindCamera { camera: 1 });
        }
        if !(cam2.depth(WorldPoint::from_vector(x)) > 0.0) {
            return Err(Error::CornersBehindCamera { camera: 2 });
        }
    }
    // camera 2 has to see the textured side of every board
    for (i, plane) in planes.iter().enumerate() {
        if !(plane.signed_distance(&c2) > 0.0) {
            return Err(Error::InvalidConfig(format!("camera 2 lies behind plane {}", i + 1)));
        }
    }
    Ok(())
}

/// Builds the three boards and a camera pair for `cfg`.
///
/// Random pose families are re-drawn (from the same seeded stream) until the
/// scene is valid; the deterministic families fail with the first violation.
pub fn generate_scene(cfg: &SceneConfig) -> Result<GroundTruth> {
    cfg.validate()?;
    let k = cfg.intrinsics();
    let planes = scene_planes(cfg);
    let frames = board_frames(cfg);
    let mut layout = Vec::with_capacity(3 * cfg.board_rows * cfg.board_cols);
    for (pi, frame) in frames.iter().enumerate() {
        for row in 0..cfg.board_rows {
            for col in 0..cfg.board_cols {
                layout.push((pi as u8 + 1, row, col, frame.point(cfg, row as f64, col as f64)));
            }
        }
    }
    let points: Vec<Vector3<f64>> = layout.iter().map(|l| l.3).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let random = matches!(cfg.pose_kind, PoseKind::General | PoseKind::Planar);
    let cam1 = compose_camera(&k, &Pose::identity());
    let mut attempt = 0;
    let (pose, cam2) = loop {
        let pose = sample_pose(cfg, &mut rng);
        let cam2 = compose_camera(&k, &pose);
        match check_pose(&points, &planes, &pose, &cam2) {
            Ok(()) => break (pose, cam2),
            Err(e) if !random => return Err(e),
            Err(e) => {
                attempt += 1;
                if attempt >= MAX_POSE_ATTEMPTS {
                    return Err(e);
                }
            }
        }
    };

    let homographies = planes
        .iter()
        .map(|pl| homography_from_plane(&cam1, &cam2, pl))
        .collect::<Result<Vec<_>>>()?;
    let mut corners = Vec::with_capacity(layout.len());
    for (id, &(plane, row, col, x)) in layout.iter().enumerate() {
        let world = WorldPoint::from_vector(&x);
        let p1 = project(&cam1, world)?;
        let p2 = project(&cam2, world)?;
        let ac = affine_from_homography(&homographies[plane as usize - 1], p1)?;
        corners.push(Corner {
            id,
            plane,
            row,
            col,
            world,
            p1,
            p2,
            affine: ac.affine,
            normal: planes[plane as usize - 1].normal,
        });
    }

    Ok(GroundTruth {
        schema: SCHEMA_VERSION,
        config: cfg.clone(),
        k,
        cam1,
        cam2,
        pose,
        fundamental: FundamentalMatrix::from_pose(&k, &k, &pose),
        essential: EssentialMatrix::from_pose(&pose),
        planes,
        corners,
    })
}

/// Ground-truth affinity at a corner, from the plane-induced homography.
pub fn true_affinity(gt: &GroundTruth, corner: usize) -> Result<AffineMap> {
    let c = gt
        .corner(corner)
        .ok_or_else(|| Error::InvalidConfig(format!("no corner {corner}")))?;
    let h = homography_from_plane(&gt.cam1, &gt.cam2, &gt.planes[c.plane as usize - 1])?;
    Ok(affine_from_homography(&h, c.p1)?.affine)
}

fn rotate(v: &Vector2<f64>, angle: f64) -> Vector2<f64> {
    let (s, c) = angle.sin_cos();
    Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

fn noiseless_pair(gt: &GroundTruth, c: &Corner, to: &Vector3<f64>, model: ScaleModel) -> Result<DirectionPair> {
    let target = WorldPoint::from_vector(to);
    let seg1 = project(&gt.cam1, target)?.to_vector() - c.p1.to_vector();
    let seg2 = project(&gt.cam2, target)?.to_vector() - c.p2.to_vector();
    let d1 = seg1.normalize();
    let scale = match model {
        ScaleModel::Tangent => c.affine.apply(&d1).norm(),
        ScaleModel::Segment => seg2.norm() / seg1.norm(),
    };
    Ok(DirectionPair::scaled(d1, seg2.normalize(), scale))
}

/// Noiseless directions from every corner toward its right, lower and
/// lower-right grid neighbours. On the last row or column the neighbour is
/// the grid point one square beyond the board, so the direction is still
/// that of the board line through adjacent corners.
pub fn noiseless_directions(gt: &GroundTruth, model: ScaleModel) -> Result<Vec<DirectionObservation>> {
    let frames = board_frames(&gt.config);
    gt.corners
        .iter()
        .map(|c| {
            let frame = &frames[c.plane as usize - 1];
            let (r, k) = (c.row as f64, c.col as f64);
            let pair = |dr: f64, dc: f64| noiseless_pair(gt, c, &frame.point(&gt.config, r + dr, k + dc), model);
            Ok(DirectionObservation {
                corner: c.id,
                horizontal: pair(0.0, 1.0)?,
                vertical: pair(1.0, 0.0)?,
                diagonal: pair(1.0, 1.0)?,
                noisy: false,
            })
        })
        .collect()
}

/// Applies independent `N(0, sigma_deg^2)` rotations to every direction
/// in both images. Lengths and scales are untouched.
pub fn perturb_directions(obs: &[DirectionObservation], sigma_deg: f64, rng_seed: u64) -> Vec<DirectionObservation> {
    if !(sigma_deg > 0.0) {
        return obs.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let normal = Normal::new(0.0, sigma_deg.to_radians()).expect("positive sigma");
    let mut turn = |d: &DirectionPair| {
        let d1 = rotate(&d.d1, normal.sample(&mut rng));
        let d2 = rotate(&d.d2, normal.sample(&mut rng));
        DirectionPair { d1, d2, scale: d.scale }
    };
    obs.iter()
        .map(|o| DirectionObservation {
            corner: o.corner,
            horizontal: turn(&o.horizontal),
            vertical: turn(&o.vertical),
            diagonal: turn(&o.diagonal),
            noisy: true,
        })
        .collect()
}

/// Noisy direction observations with tangent scales.
pub fn observe_directions(gt: &GroundTruth, sigma_deg: f64, rng_seed: u64) -> Result<Vec<DirectionObservation>> {
    observe_directions_with(gt, sigma_deg, rng_seed, ScaleModel::Tangent)
}

pub fn observe_directions_with(
    gt: &GroundTruth,
    sigma_deg: f64,
    rng_seed: u64,
    model: ScaleModel,
) -> Result<Vec<DirectionObservation>> {
    if !(sigma_deg >= 0.0) {
        return Err(Error::InvalidConfig("sigma must be non-negative".into()));
    }
    Ok(perturb_directions(&noiseless_directions(gt, model)?, sigma_deg, rng_seed))
}

/// Corner matches with isotropic Gaussian pixel noise of `sigma_px` in both
/// images. An extension for experiments beyond the direction-noise model.
pub fn observe_positions(gt: &GroundTruth, sigma_px: f64, rng_seed: u64) -> Vec<(PixelPoint, PixelPoint)> {
    if !(sigma_px > 0.0) {
        return gt.matches();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let normal = Normal::new(0.0, sigma_px).expect("positive sigma");
    let mut jitter = |p: PixelPoint| PixelPoint::new(p.u + normal.sample(&mut rng), p.v + normal.sample(&mut rng));
    gt.corners.iter().map(|c| (jitter(c.p1), jitter(c.p2))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::epipolar_constraint_residual;
    use crate::linalg::skew;
    use crate::geometry::AffineCorrespondence;
    use crate::normals::estimate_normal;

    #[test]
    fn standard_stereo_fundamental_form() {
        let cfg = SceneConfig {
            baseline: 1.0,
            ..SceneConfig::new(PoseKind::StandardStereo, 0)
        };
        let gt = generate_scene(&cfg).unwrap();
        let k = gt.k;
        let expected = FundamentalMatrix::new(k.try_inverse().unwrap().transpose() * skew(&Vector3::x()) * k.try_inverse().unwrap());
        let f = gt.fundamental.oriented_like(&expected);
        assert!((f.matrix() - expected.matrix()).norm() < 1e-12);
        // in pixel coordinates the epipolar lines are horizontal
        for c in &gt.corners {
            assert!((c.p1.v - c.p2.v).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_serialization() {
        for kind in PoseKind::ALL {
            let cfg = SceneConfig::new(kind, 77);
            let a = serde_json::to_string(&generate_scene(&cfg).unwrap()).unwrap();
            let b = serde_json::to_string(&generate_scene(&cfg).unwrap()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn json_round_trip() {
        let gt = generate_scene(&SceneConfig::new(PoseKind::General, 3)).unwrap();
        let s = serde_json::to_string(&gt).unwrap();
        let back: GroundTruth = serde_json::from_str(&s).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
        assert_eq!(back.schema, 1);
    }

    #[test]
    fn self_consistency() {
        for kind in PoseKind::ALL {
            for seed in 0..5 {
                let gt = generate_scene(&SceneConfig::new(kind, seed)).unwrap();
                assert_eq!(gt.corners.len(), 144);
                for c in &gt.corners {
                    assert!(gt.fundamental.normalized_residual(c.p1, c.p2) < 1e-12, "{kind}");
                    let f = &gt.fundamental;
                    let (n1, n2) = crate::epipolar::epipolar_normals(f, c.p1, c.p2);
                    let r = epipolar_constraint_residual(&c.affine, f, c.p1, c.p2);
                    assert!(r < 1e-10 * (n1.norm() + n2.norm()), "{kind} {r} {} {}", n1.norm(), n2.norm());
                    let ac = AffineCorrespondence { p1: c.p1, p2: c.p2, affine: c.affine };
                    let op = estimate_normal(&ac, &gt.cam1, &gt.cam2, c.world).unwrap();
                    assert!(crate::linalg::vector_angle(&op.normal, &c.normal) < 1e-6);
                }
            }
        }
    }

    #[test]
    fn planes_are_axis_aligned() {
        let gt = generate_scene(&SceneConfig::new(PoseKind::Planar, 1)).unwrap();
        for c in &gt.corners {
            let o = gt.config.corner_edge;
            let on = match c.plane {
                1 => c.world.z - o[2],
                2 => c.world.y - o[1],
                _ => c.world.x - o[0],
            };
            assert!(on.abs() < 1e-9);
        }
        assert_eq!(gt.planes[0].normal, -Vector3::z());
        assert_eq!(gt.planes[1].normal, -Vector3::y());
        assert_eq!(gt.planes[2].normal, -Vector3::x());
    }

    #[test]
    fn pose_families() {
        let stereo = generate_scene(&SceneConfig::new(PoseKind::StandardStereo, 0)).unwrap();
        assert_eq!(stereo.pose.translation, Vector3::new(300.0, 0.0, 0.0));
        let fwd = generate_scene(&SceneConfig::new(PoseKind::Forward, 0)).unwrap();
        assert_eq!(fwd.pose.translation, Vector3::new(0.0, 0.0, 300.0));
        for seed in 0..20 {
            let planar = generate_scene(&SceneConfig::new(PoseKind::Planar, seed)).unwrap();
            assert!(planar.pose.center().y.abs() < 1e-9);
            assert!((planar.baseline() - 300.0).abs() < 1e-9);
            let r = planar.pose.rotation;
            assert!((r * Vector3::y() - Vector3::y()).norm() < 1e-12);
            let general = generate_scene(&SceneConfig::new(PoseKind::General, seed)).unwrap();
            assert!((general.baseline() - 300.0).abs() < 1e-9);
            let angle = crate::linalg::rotation_angle(&general.pose.rotation, &Matrix3::identity());
            assert!(angle < 3f64.sqrt() * 15f64.to_radians());
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = SceneConfig {
            baseline: 0.0,
            ..SceneConfig::default()
        };
        assert!(matches!(generate_scene(&bad), Err(Error::InvalidConfig(_))));
        let bad = SceneConfig {
            board_rows: 0,
            ..SceneConfig::default()
        };
        assert!(matches!(generate_scene(&bad), Err(Error::InvalidConfig(_))));
        let through = SceneConfig {
            pose_kind: PoseKind::Forward,
            corner_edge: [450.0, 450.0, -1000.0],
            ..SceneConfig::default()
        };
        assert!(matches!(generate_scene(&through), Err(Error::CornersBehindCamera { camera: 1 })));
    }

    #[test]
    fn noiseless_directions_follow_board_lines() {
        let gt = generate_scene(&SceneConfig::new(PoseKind::General, 9)).unwrap();
        let obs = observe_directions(&gt, 0.0, 1).unwrap();
        let cols = gt.config.board_cols;
        for o in &obs {
            let c = &gt.corners[o.corner];
            for d in o.pairs() {
                assert!((d.d1.norm() - 1.0).abs() < 1e-14);
                let a = c.affine.apply(&d.d1);
                assert!((a - d.scale.unwrap() * d.d2).norm() < 1e-12);
            }
            if c.col + 1 < cols {
                let right = &gt.corners[o.corner + 1];
                let seg = (right.p1.to_vector() - c.p1.to_vector()).normalize();
                assert!((seg - o.horizontal.d1).norm() < 1e-12);
                let seg2 = (right.p2.to_vector() - c.p2.to_vector()).normalize();
                assert!((seg2 - o.horizontal.d2).norm() < 1e-12);
            }
            if c.row + 1 < gt.config.board_rows && c.col + 1 < cols {
                let diag = &gt.corners[o.corner + cols + 1];
                let seg = (diag.p1.to_vector() - c.p1.to_vector()).normalize();
                assert!((seg - o.diagonal.d1).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn segment_scale_model() {
        let gt = generate_scene(&SceneConfig::new(PoseKind::General, 4)).unwrap();
        let obs = noiseless_directions(&gt, ScaleModel::Segment).unwrap();
        let c = &gt.corners[0];
        let right = &gt.corners[1];
        let expected = (right.p2.to_vector() - c.p2.to_vector()).norm() / (right.p1.to_vector() - c.p1.to_vector()).norm();
        assert!((obs[0].horizontal.scale.unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn noise_preserves_lengths_and_scales() {
        let gt = generate_scene(&SceneConfig::new(PoseKind::General, 2)).unwrap();
        let clean = observe_directions(&gt, 0.0, 5).unwrap();
        let noisy = observe_directions(&gt, 3.0, 5).unwrap();
        assert!(noisy.iter().all(|o| o.noisy) && clean.iter().all(|o| !o.noisy));
        for (a, b) in clean.iter().zip(&noisy) {
            for (p, q) in a.pairs().iter().zip(b.pairs()) {
                assert!((p.d1.norm() - q.d1.norm()).abs() < 1e-14);
                assert!((p.d2.norm() - q.d2.norm()).abs() < 1e-14);
                assert_eq!(p.scale, q.scale);
            }
        }
        assert_eq!(noisy, observe_directions(&gt, 3.0, 5).unwrap());
        assert_ne!(noisy, observe_directions(&gt, 3.0, 6).unwrap());
    }

    #[test]
    fn noise_spread_matches_sigma() {
        let gt = generate_scene(&SceneConfig::new(PoseKind::General, 2)).unwrap();
        let clean = noiseless_directions(&gt, ScaleModel::Tangent).unwrap();
        let mut angles = Vec::new();
        let mut seed = 0;
        while angles.len() < 10_000 {
            let noisy = perturb_directions(&clean, 3.0, seed);
            seed += 1;
            for (a, b) in clean.iter().zip(&noisy) {
                for (p, q) in a.pairs().iter().zip(b.pairs()) {
                    for (u, v) in [(p.d1, q.d1), (p.d2, q.d2)] {
                        let ang = (u.x * v.y - u.y * v.x).atan2(u.dot(&v));
                        angles.push(ang.to_degrees());
                    }
                }
            }
        }
        let n = angles.len() as f64;
        let mean = angles.iter().sum::<f64>() / n;
        let sd = (angles.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd - 3.0).abs() < 0.1, "{sd}");
    }

    #[test]
    fn true_affinity_matches_stored() {
        let gt = generate_scene(&SceneConfig::new(PoseKind::General, 12)).unwrap();
        for c in gt.corners.iter().step_by(7) {
            assert_eq!(true_affinity(&gt, c.id).unwrap(), c.affine);
        }
        assert!(true_affinity(&gt, 10_000).is_err());
    }

    #[test]
    fn fronto_parallel_standard_stereo_affinity_is_identity() {
        let gt = generate_scene(&SceneConfig::new(PoseKind::StandardStereo, 0)).unwrap();
        for c in gt.corners.iter().filter(|c| c.plane == 1) {
            assert!(c.affine.relative_error(&AffineMap::IDENTITY) < 1e-12);
        }
    }

    #[test]
    fn position_noise_extension() {
        let gt = generate_scene(&SceneConfig::new(PoseKind::General, 1)).unwrap();
        assert_eq!(observe_positions(&gt, 0.0, 1), gt.matches());
        let noisy = observe_positions(&gt, 0.5, 1);
        assert_eq!(noisy, observe_positions(&gt, 0.5, 1));
        assert!(noisy.iter().zip(gt.matches()).any(|(a, b)| a.0 != b.0));
    }
}
