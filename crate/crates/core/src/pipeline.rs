//! End-to-end reconstruction: matched corners and image directions in,
//! oriented point cloud out.
//!
//! Stages, in order: eight-point `F` from the corner matches; per-corner
//! affine estimation; linear `F` refinement from points plus affinities;
//! essential matrix and its decomposition; optimal triangulation; surface
//! normals. The first camera is `K1 [I | 0]` and the translation has unit
//! length until [`apply_metric_scale`] is called.

use nalgebra::{Matrix3, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affine::{
    estimate_2sdir, estimate_3sdir, estimate_det3udir, estimate_f2udir, estimate_f3udir, AffineEstimate,
    EstimatorKind,
};
use crate::epipolar::{
    decompose_essential, essential_from_f, estimate_f_8point, refine_f_with_acs, triangulate, FundamentalMatrix,
};
use crate::error::{Error, Result, Stage};
use crate::geometry::{compose_camera, AffineCorrespondence, AffineMap, CameraP, DirectionPair, PixelPoint, Pose, WorldPoint};
use crate::normals::{estimate_normal, OrientedPoint};
use crate::scene::{DirectionObservation, GroundTruth};

/// Source of the determinant fed to DET3UDIR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetHintPolicy {
    /// `alpha_h alpha_v (d2_h x d2_v) / (d1_h x d1_v)`, the area ratio spanned
    /// by the horizontal and vertical pairs. Exact on noiseless input.
    #[default]
    Exact,
    /// Square of the mean of the three direction scales.
    MeanSquaredScale,
    /// Always 1.
    Unit,
}

impl DetHintPolicy {
    pub fn hint(self, obs: &DirectionObservation) -> Result<f64> {
        let scales = obs
            .pairs()
            .map(|d| d.scale.ok_or_else(|| Error::InvalidConfig("determinant hint needs direction scales".into())));
        match self {
            DetHintPolicy::Unit => Ok(1.0),
            DetHintPolicy::MeanSquaredScale => {
                let [a, b, c] = scales;
                let mean = (a? + b? + c?) / 3.0;
                Ok(mean * mean)
            }
            DetHintPolicy::Exact => {
                let cross = |a: &Vector2<f64>, b: &Vector2<f64>| a.x * b.y - a.y * b.x;
                let (h, v) = (&obs.horizontal, &obs.vertical);
                let den = cross(&h.d1, &v.d1);
                if den.abs() <= 1e-12 * h.d1.norm() * v.d1.norm() {
                    return Err(Error::DegenerateDirections);
                }
                let [a, b, _] = scales;
                Ok(a? * b? * cross(&h.d2, &v.d2) / den)
            }
        }
    }
}

/// What to do when the optimal triangulation falls back to a plain DLT lift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackPolicy {
    /// Keep the DLT point and count it in the diagnostics.
    #[default]
    Accept,
    /// Flag the corner and drop it.
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub estimator: EstimatorKind,
    #[serde(with = "crate::geometry::mat3_rows")]
    pub k1: Matrix3<f64>,
    #[serde(with = "crate::geometry::mat3_rows")]
    pub k2: Matrix3<f64>,
    pub det_hint: DetHintPolicy,
    pub fallback: FallbackPolicy,
    /// Re-run the F-based estimators against the refined `F`.
    pub refit_with_refined_f: bool,
    /// Replaces the eight-point estimate (stage isolation experiments).
    pub fundamental_override: Option<FundamentalMatrix>,
}

impl PipelineConfig {
    pub fn new(estimator: EstimatorKind, k: Matrix3<f64>) -> Self {
        Self {
            estimator,
            k1: k,
            k2: k,
            det_hint: DetHintPolicy::default(),
            fallback: FallbackPolicy::default(),
            refit_with_refined_f: false,
            fundamental_override: None,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, k) in [("K1", &self.k1), ("K2", &self.k2)] {
            let det = k.determinant();
            if !(det.abs() > 0.0) || !det.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} is singular")));
            }
        }
        Ok(())
    }
}

/// A matched corner; `grid` holds `(row, col)` on its board when known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerMatch {
    pub id: usize,
    pub plane: u8,
    pub p1: PixelPoint,
    pub p2: PixelPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineInput {
    pub corners: Vec<CornerMatch>,
    /// One entry per corner, in the same order.
    pub directions: Vec<DirectionObservation>,
}

impl PipelineInput {
    pub fn from_scene(gt: &GroundTruth, directions: Vec<DirectionObservation>) -> Self {
        let corners = gt
            .corners
            .iter()
            .map(|c| CornerMatch {
                id: c.id,
                plane: c.plane,
                p1: c.p1,
                p2: c.p2,
                grid: Some((c.row, c.col)),
            })
            .collect();
        Self { corners, directions }
    }

    fn validate(&self, estimator: EstimatorKind) -> Result<()> {
        if self.corners.len() < 8 {
            return Err(Error::NotEnoughData {
                needed: 8,
                got: self.corners.len(),
            });
        }
        if self.directions.len() != self.corners.len() {
            return Err(Error::InvalidConfig(format!(
                "{} corners but {} direction observations",
                self.corners.len(),
                self.directions.len()
            )));
        }
        for (c, d) in self.corners.iter().zip(&self.directions) {
            if c.id != d.corner {
                return Err(Error::InvalidConfig(format!("directions for corner {} out of order", c.id)));
            }
            let needs_scale = matches!(
                estimator,
                EstimatorKind::TwoSDir | EstimatorKind::ThreeSDir
            );
            if needs_scale && d.pairs()[..estimator.direction_count()].iter().any(|p| p.scale.is_none()) {
                return Err(Error::InvalidConfig(format!("{estimator} needs scales at corner {}", c.id)));
            }
        }
        Ok(())
    }

    pub fn matches(&self) -> Vec<(PixelPoint, PixelPoint)> {
        self.corners.iter().map(|c| (c.p1, c.p2)).collect()
    }
}

/// Reconstructed corner with its board labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub id: usize,
    pub plane: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<(usize, usize)>,
    pub affine: AffineMap,
    pub point: OrientedPoint,
}

/// A corner dropped by a per-corner stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedCorner {
    pub id: usize,
    pub plane: u8,
    pub stage: Stage,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Mean Sampson error of the corner matches, in squared pixels.
    pub sampson_initial: f64,
    pub sampson_refined: f64,
    /// Mean residual of the per-corner affine systems.
    pub affine_residual_mean: f64,
    pub affine_failures: usize,
    pub triangulation_fallbacks: usize,
    pub triangulation_failures: usize,
    pub normals_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub schema: u32,
    pub estimator: EstimatorKind,
    pub points: Vec<LabeledPoint>,
    pub flagged: Vec<FlaggedCorner>,
    /// Second camera relative to the first.
    pub pose: Pose,
    pub f_initial: FundamentalMatrix,
    pub f_refined: FundamentalMatrix,
    pub cam1: CameraP,
    pub cam2: CameraP,
    /// Product of all metric scale factors applied so far.
    pub scale: f64,
    pub diagnostics: Diagnostics,
}

impl Reconstruction {
    pub fn baseline(&self) -> f64 {
        self.pose.translation.norm()
    }

    pub fn plane_points(&self, plane: u8) -> impl Iterator<Item = &LabeledPoint> {
        self.points.iter().filter(move |p| p.plane == plane)
    }
}

/// Affinity of one corner with the chosen estimator.
pub fn estimate_affine(
    kind: EstimatorKind,
    f: &FundamentalMatrix,
    c: &CornerMatch,
    obs: &DirectionObservation,
    det_hint: DetHintPolicy,
) -> Result<AffineEstimate> {
    let [h, v, d] = obs.pairs();
    let unscaled = |p: DirectionPair| p.without_scale();
    match kind {
        EstimatorKind::F2UDir => estimate_f2udir(f, c.p1, c.p2, &[unscaled(h), unscaled(v)]),
        EstimatorKind::F3UDir => estimate_f3udir(f, c.p1, c.p2, &[unscaled(h), unscaled(v), unscaled(d)]),
        EstimatorKind::Det3UDir => {
            estimate_det3udir(&[unscaled(h), unscaled(v), unscaled(d)], det_hint.hint(obs)?)
        }
        EstimatorKind::TwoSDir => estimate_2sdir(&[h, v]),
        EstimatorKind::ThreeSDir => estimate_3sdir(&[h, v, d]),
    }
}

fn mean_sampson(f: &FundamentalMatrix, matches: &[(PixelPoint, PixelPoint)]) -> f64 {
    matches.iter().map(|&(a, b)| f.sampson_error(a, b)).sum::<f64>() / matches.len() as f64
}

fn flag(c: &CornerMatch, stage: Stage, e: &Error) -> FlaggedCorner {
    FlaggedCorner {
        id: c.id,
        plane: c.plane,
        stage,
        reason: e.to_string(),
    }
}

fn estimate_all(
    input: &PipelineInput,
    cfg: &PipelineConfig,
    f: &FundamentalMatrix,
) -> Vec<Result<AffineEstimate, FlaggedCorner>> {
    input
        .corners
        .par_iter()
        .zip(input.directions.par_iter())
        .map(|(c, obs)| {
            estimate_affine(cfg.estimator, f, c, obs, cfg.det_hint)
                .map_err(|e| flag(c, Stage::AffineEstimation, &e))
        })
        .collect()
}

pub fn run_pipeline(input: &PipelineInput, cfg: &PipelineConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    input.validate(cfg.estimator)?;
    let matches = input.matches();

    let f_initial = match cfg.fundamental_override {
        Some(f) => f,
        None => estimate_f_8point(&matches).map_err(|e| e.at(Stage::InitialFundamental))?,
    };

    let mut affines = estimate_all(input, cfg, &f_initial);
    let acs: Vec<AffineCorrespondence> = input
        .corners
        .iter()
        .zip(&affines)
        .filter_map(|(c, a)| {
            a.as_ref().ok().map(|a| AffineCorrespondence {
                p1: c.p1,
                p2: c.p2,
                affine: a.affine,
            })
        })
        .collect();
    let f_refined = refine_f_with_acs(&matches, &acs, &f_initial).map_err(|e| e.at(Stage::RefinedFundamental))?;
    if cfg.refit_with_refined_f && cfg.estimator.uses_fundamental() {
        affines = estimate_all(input, cfg, &f_refined);
    }

    let e = essential_from_f(&f_refined, &cfg.k1, &cfg.k2);
    if !e.matrix().iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateConfiguration.at(Stage::Essential));
    }
    let pose = decompose_essential(&e, &matches, &cfg.k1, &cfg.k2).map_err(|e| e.at(Stage::Decomposition))?;
    let cam1 = compose_camera(&cfg.k1, &Pose::identity());
    let cam2 = compose_camera(&cfg.k2, &pose);

    let outcomes: Vec<Result<(LabeledPoint, bool), FlaggedCorner>> = input
        .corners
        .par_iter()
        .zip(affines.par_iter())
        .map(|(c, est)| {
            let est = est.as_ref().map_err(Clone::clone)?;
            let tri = triangulate(&cam1, &cam2, c.p1, c.p2).map_err(|e| flag(c, Stage::Triangulation, &e))?;
            if tri.used_fallback && cfg.fallback == FallbackPolicy::Reject {
                return Err(flag(c, Stage::Triangulation, &Error::ParallelRays));
            }
            let ac = AffineCorrespondence {
                p1: c.p1,
                p2: c.p2,
                affine: est.affine,
            };
            let point =
                estimate_normal(&ac, &cam1, &cam2, tri.point).map_err(|e| flag(c, Stage::NormalEstimation, &e))?;
            Ok((
                LabeledPoint {
                    id: c.id,
                    plane: c.plane,
                    grid: c.grid,
                    affine: est.affine,
                    point,
                },
                tri.used_fallback,
            ))
        })
        .collect();

    let mut diagnostics = Diagnostics {
        sampson_initial: mean_sampson(&f_initial, &matches),
        sampson_refined: mean_sampson(&f_refined, &matches),
        ..Diagnostics::default()
    };
    let residuals: Vec<f64> = affines.iter().filter_map(|a| a.as_ref().ok().map(|a| a.residual)).collect();
    if !residuals.is_empty() {
        diagnostics.affine_residual_mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    }
    let mut points = Vec::with_capacity(outcomes.len());
    let mut flagged = Vec::new();
    for o in outcomes {
        match o {
            Ok((p, fallback)) => {
                diagnostics.triangulation_fallbacks += fallback as usize;
                points.push(p);
            }
            Err(f) => {
                match f.stage {
                    Stage::AffineEstimation => diagnostics.affine_failures += 1,
                    Stage::Triangulation => diagnostics.triangulation_failures += 1,
                    _ => diagnostics.normals_skipped += 1,
                }
                flagged.push(f);
            }
        }
    }

    Ok(Reconstruction {
        schema: crate::scene::SCHEMA_VERSION,
        estimator: cfg.estimator,
        points,
        flagged,
        pose,
        f_initial,
        f_refined,
        cam1,
        cam2,
        scale: 1.0,
        diagnostics,
    })
}

/// Convenience wrapper: scene corners plus observed directions, intrinsics
/// taken from the scene.
pub fn reconstruct_scene(
    gt: &GroundTruth,
    directions: Vec<DirectionObservation>,
    estimator: EstimatorKind,
) -> Result<Reconstruction> {
    run_pipeline(&PipelineInput::from_scene(gt, directions), &PipelineConfig::new(estimator, gt.k))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Rescales the reconstruction so the median distance between
/// grid-adjacent points of the same board equals `square_size`.
pub fn apply_metric_scale(rec: &Reconstruction, square_size: f64) -> Result<Reconstruction> {
    if !(square_size > 0.0) || !square_size.is_finite() {
        return Err(Error::InvalidConfig("square size must be positive".into()).at(Stage::MetricScale));
    }
    let mut distances = Vec::new();
    for (i, a) in rec.points.iter().enumerate() {
        let Some((ra, ca)) = a.grid else { continue };
        for b in &rec.points[i + 1..] {
            let Some((rb, cb)) = b.grid else { continue };
            if a.plane == b.plane && ra.abs_diff(rb) + ca.abs_diff(cb) == 1 {
                distances.push((a.point.position.to_vector() - b.point.position.to_vector()).norm());
            }
        }
    }
    if distances.is_empty() {
        return Err(Error::InsufficientStructure.at(Stage::MetricScale));
    }
    let m = median(&mut distances);
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InsufficientStructure.at(Stage::MetricScale));
    }
    let factor = square_size / m;

    let mut out = rec.clone();
    for p in &mut out.points {
        p.point.position = WorldPoint::from_vector(&(p.point.position.to_vector() * factor));
    }
    out.pose.translation *= factor;
    out.cam2 = compose_camera(&(rec.cam2.p.fixed_view::<3, 3>(0, 0) * out.pose.rotation.transpose()), &out.pose);
    out.scale *= factor;
    Ok(out)
}
