//! Python module `affine_stereo`: synthetic scenes, the reconstruction
//! pipeline, the geometric building blocks and the Monte-Carlo harness.

use std::fs::File;

use nalgebra::{Matrix3, Vector2, Vector3};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use affine_stereo::evaluation::{
    angular_error as angle_deg, check_figure as run_check, fit_plane_pca as fit_plane, noise_seed, run_experiment,
    score_reconstruction, summarize, write_results_csv, write_summary_csv, ExperimentGrid, Figure, GroupKey,
};
use affine_stereo::io::{read_scene, write_json, write_ply, SceneFile};
use affine_stereo::pipeline::{apply_metric_scale, run_pipeline, DetHintPolicy, PipelineConfig, PipelineInput};
use affine_stereo::scene::{generate_scene, PoseKind, SceneConfig};
use affine_stereo::{
    affine_from_homography as jacobian, epipolar_constraint_residual, estimate_normal as normal_from_ac,
    triangulate as triangulate_pair, AffineCorrespondence, AffineMap, CameraP, EstimatorKind, FundamentalMatrix,
    Homography, PixelPoint, WorldPoint,
};

create_exception!(affine_stereo, AffineStereoError, PyException);

fn err(e: affine_stereo::Error) -> PyErr {
    AffineStereoError::new_err(e.to_string())
}

trait OrRaise<T> {
    fn or_raise(self) -> PyResult<T>;
}

impl<T> OrRaise<T> for affine_stereo::Result<T> {
    fn or_raise(self) -> PyResult<T> {
        self.map_err(err)
    }
}

type Mat2 = [[f64; 2]; 2];
type Mat3 = [[f64; 3]; 3];

fn affine_from_rows(a: Mat2) -> AffineMap {
    AffineMap::new(a[0][0], a[0][1], a[1][0], a[1][1])
}

fn affine_rows(a: &AffineMap) -> Mat2 {
    let [a1, a2, a3, a4] = a.entries();
    [[a1, a2], [a3, a4]]
}

fn mat3_rows(m: &Matrix3<f64>) -> Mat3 {
    [0, 1, 2].map(|r| [0, 1, 2].map(|c| m[(r, c)]))
}

fn camera(p: [f64; 12]) -> CameraP {
    CameraP::from_elements(p)
}

fn det_hint(name: &str) -> PyResult<DetHintPolicy> {
    match name {
        "exact" => Ok(DetHintPolicy::Exact),
        "mean_squared_scale" => Ok(DetHintPolicy::MeanSquaredScale),
        "unit" => Ok(DetHintPolicy::Unit),
        other => Err(AffineStereoError::new_err(format!(
            "unknown det hint '{other}' (expected exact, mean_squared_scale or unit)"
        ))),
    }
}

/// A synthetic three-board scene together with its observed directions.
#[pyclass(module = "affine_stereo", frozen)]
struct Scene {
    inner: SceneFile,
}

#[pymethods]
impl Scene {
    /// Generates a scene for `pose` ("general", "planar", "standard_stereo",
    /// "forward") and observes it with `sigma_deg` of angular noise.
    #[staticmethod]
    #[pyo3(signature = (pose, seed = 0, sigma_deg = 0.0, baseline = None))]
    fn simulate(pose: &str, seed: u64, sigma_deg: f64, baseline: Option<f64>) -> PyResult<Self> {
        let mut cfg = SceneConfig::new(pose.parse::<PoseKind>().or_raise()?, seed);
        if let Some(b) = baseline {
            cfg.baseline = b;
        }
        let gt = generate_scene(&cfg).or_raise()?;
        let inner = SceneFile::observe(gt, sigma_deg, noise_seed(seed)).or_raise()?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: read_scene(text.as_bytes()).or_raise()?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        write_json(&self.inner, &mut buf).or_raise()?;
        Ok(String::from_utf8_lossy(&buf).into_owned())
    }

    #[getter]
    fn pose(&self) -> &'static str {
        self.inner.ground_truth.config.pose_kind.name()
    }

    #[getter]
    fn sigma_deg(&self) -> f64 {
        self.inner.sigma_deg
    }

    #[getter]
    fn baseline(&self) -> f64 {
        self.inner.ground_truth.baseline()
    }

    #[getter]
    fn intrinsics(&self) -> Mat3 {
        mat3_rows(&self.inner.ground_truth.k)
    }

    #[getter]
    fn cameras(&self) -> ([f64; 12], [f64; 12]) {
        let gt = &self.inner.ground_truth;
        (gt.cam1.elements(), gt.cam2.elements())
    }

    #[getter]
    fn fundamental(&self) -> Mat3 {
        mat3_rows(self.inner.ground_truth.fundamental.matrix())
    }

    fn __len__(&self) -> usize {
        self.inner.ground_truth.corners.len()
    }

    /// One dict per corner with its ground truth.
    fn corners<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .ground_truth
            .corners
            .iter()
            .map(|c| {
                let d = PyDict::new(py);
                d.set_item("id", c.id)?;
                d.set_item("plane", c.plane)?;
                d.set_item("grid", (c.row, c.col))?;
                d.set_item("world", c.world.to_vector().as_slice().to_vec())?;
                d.set_item("p1", (c.p1.u, c.p1.v))?;
                d.set_item("p2", (c.p2.u, c.p2.v))?;
                d.set_item("affine", affine_rows(&c.affine))?;
                d.set_item("normal", c.normal.as_slice().to_vec())?;
                Ok(d)
            })
            .collect()
    }

    /// Runs the pipeline with `estimator` ("F2UDIR", "F3UDIR", "DET3UDIR",
    /// "2SDIR", "3SDIR").
    #[pyo3(signature = (estimator, det_hint = "mean_squared_scale", metric = false))]
    fn reconstruct(&self, py: Python<'_>, estimator: &str, det_hint: &str, metric: bool) -> PyResult<Reconstruction> {
        let kind = estimator.parse::<EstimatorKind>().or_raise()?;
        let policy = self::det_hint(det_hint)?;
        let gt = &self.inner.ground_truth;
        let dirs = self.inner.directions.clone();
        py.detach(|| {
            let mut cfg = PipelineConfig::new(kind, gt.k);
            cfg.det_hint = policy;
            let mut rec = run_pipeline(&PipelineInput::from_scene(gt, dirs), &cfg)?;
            if metric {
                rec = apply_metric_scale(&rec, gt.config.square_size)?;
            }
            Ok(rec)
        })
        .or_raise()
        .map(|inner| Reconstruction { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Scene(pose={}, corners={}, sigma_deg={})",
            self.pose(),
            self.__len__(),
            self.inner.sigma_deg
        )
    }
}

/// Oriented point cloud and relative pose recovered by the pipeline.
#[pyclass(module = "affine_stereo", frozen)]
struct Reconstruction {
    inner: affine_stereo::pipeline::Reconstruction,
}

#[pymethods]
impl Reconstruction {
    #[getter]
    fn estimator(&self) -> &'static str {
        self.inner.estimator.name()
    }

    #[getter]
    fn rotation(&self) -> Mat3 {
        mat3_rows(&self.inner.pose.rotation)
    }

    #[getter]
    fn translation(&self) -> [f64; 3] {
        let t = self.inner.pose.translation;
        [t.x, t.y, t.z]
    }

    #[getter]
    fn baseline(&self) -> f64 {
        self.inner.baseline()
    }

    #[getter]
    fn fundamental(&self) -> Mat3 {
        mat3_rows(self.inner.f_refined.matrix())
    }

    /// `(id, plane, position, normal)` for every reconstructed corner.
    fn points(&self) -> Vec<(usize, u8, [f64; 3], [f64; 3])> {
        self.inner
            .points
            .iter()
            .map(|p| {
                let x = p.point.position;
                let n = p.point.normal;
                (p.id, p.plane, [x.x, x.y, x.z], [n.x, n.y, n.z])
            })
            .collect()
    }

    /// `(id, plane, stage, reason)` for corners dropped along the way.
    fn flagged(&self) -> Vec<(usize, u8, String, String)> {
        self.inner
            .flagged
            .iter()
            .map(|f| (f.id, f.plane, format!("{:?}", f.stage), f.reason.clone()))
            .collect()
    }

    /// Per-plane angular errors against `scene`'s ground truth.
    fn score<'py>(&self, py: Python<'py>, scene: &Scene) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let (planes, _) = score_reconstruction(&scene.inner.ground_truth, &self.inner);
        planes
            .iter()
            .map(|p| {
                let d = PyDict::new(py);
                d.set_item("plane", p.plane)?;
                d.set_item("mean_err_deg", p.mean_err_deg)?;
                d.set_item("median_err_deg", p.median_err_deg)?;
                d.set_item("mean_true_err_deg", p.mean_true_err_deg)?;
                d.set_item("drop_rate", p.drop_rate)?;
                d.set_item("corners_used", p.corners_used)?;
                Ok(d)
            })
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        write_json(&self.inner, &mut buf).or_raise()?;
        Ok(String::from_utf8_lossy(&buf).into_owned())
    }

    fn write_ply(&self, path: &str) -> PyResult<()> {
        let file = File::create(path).map_err(|e| err(e.into()))?;
        write_ply(&self.inner, file).or_raise()
    }

    fn __len__(&self) -> usize {
        self.inner.points.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Reconstruction(estimator={}, points={}, baseline={:.4})",
            self.estimator(),
            self.inner.points.len(),
            self.inner.baseline()
        )
    }
}

/// Local affinity of homography `h` at `p1`; returns `(p2, A)`.
#[pyfunction]
fn affine_from_homography(h: Mat3, p1: (f64, f64)) -> PyResult<((f64, f64), Mat2)> {
    let m = Matrix3::from_fn(|r, c| h[r][c]);
    let ac = jacobian(&Homography::new(m), PixelPoint::new(p1.0, p1.1)).or_raise()?;
    Ok(((ac.p2.u, ac.p2.v), affine_rows(&ac.affine)))
}

/// Surface normal at `x` from an affine correspondence and two 3x4
/// cameras given as 12 row-major entries.
#[pyfunction]
fn estimate_normal(
    affine: Mat2,
    p1: (f64, f64),
    p2: (f64, f64),
    cam1: [f64; 12],
    cam2: [f64; 12],
    x: [f64; 3],
) -> PyResult<[f64; 3]> {
    let ac = AffineCorrespondence {
        p1: PixelPoint::new(p1.0, p1.1),
        p2: PixelPoint::new(p2.0, p2.1),
        affine: affine_from_rows(affine),
    };
    let op = normal_from_ac(&ac, &camera(cam1), &camera(cam2), WorldPoint::new(x[0], x[1], x[2])).or_raise()?;
    Ok([op.normal.x, op.normal.y, op.normal.z])
}

/// `|A^T n2 + n1|` for the epipolar-line normals of `F` at the match.
#[pyfunction]
fn epipolar_residual(affine: Mat2, f: Mat3, p1: (f64, f64), p2: (f64, f64)) -> f64 {
    let f = FundamentalMatrix::new(Matrix3::from_fn(|r, c| f[r][c]));
    epipolar_constraint_residual(
        &affine_from_rows(affine),
        &f,
        PixelPoint::new(p1.0, p1.1),
        PixelPoint::new(p2.0, p2.1),
    )
}

#[pyfunction]
fn triangulate(cam1: [f64; 12], cam2: [f64; 12], p1: (f64, f64), p2: (f64, f64)) -> PyResult<[f64; 3]> {
    let t = triangulate_pair(
        &camera(cam1),
        &camera(cam2),
        PixelPoint::new(p1.0, p1.1),
        PixelPoint::new(p2.0, p2.1),
    )
    .or_raise()?;
    Ok([t.point.x, t.point.y, t.point.z])
}

/// PCA plane through `points`; returns `(normal, centroid, rms_residual)`.
#[pyfunction]
fn fit_plane_pca(points: Vec<[f64; 3]>) -> PyResult<([f64; 3], [f64; 3], f64)> {
    let pts: Vec<WorldPoint> = points.iter().map(|p| WorldPoint::new(p[0], p[1], p[2])).collect();
    let fit = fit_plane(&pts).or_raise()?;
    let c = fit.centroid;
    Ok((fit.normal.into(), [c.x, c.y, c.z], fit.rms_residual))
}

/// Unsigned angle between two normals in degrees.
#[pyfunction]
fn angular_error(a: [f64; 3], b: [f64; 3]) -> f64 {
    angle_deg(&Vector3::from(a), &Vector3::from(b))
}

/// Direction pair helper: the image of unit direction `theta` under `A`,
/// as `(d1, d2_unit, scale)`.
#[pyfunction]
fn map_direction(affine: Mat2, theta: f64) -> ((f64, f64), (f64, f64), f64) {
    let d1 = Vector2::new(theta.cos(), theta.sin());
    let d2 = affine_from_rows(affine).apply(&d1);
    let s = d2.norm();
    ((d1.x, d1.y), (d2.x / s, d2.y / s), s)
}

/// Runs a Monte-Carlo grid and returns `(results_csv, summary_csv)`.
#[pyfunction]
#[pyo3(signature = (poses, estimators, sigmas_deg, trials, seed = 0, group_by = None))]
fn evaluate(
    py: Python<'_>,
    poses: Vec<String>,
    estimators: Vec<String>,
    sigmas_deg: Vec<f64>,
    trials: usize,
    seed: u64,
    group_by: Option<Vec<String>>,
) -> PyResult<(String, String)> {
    let poses = poses.iter().map(|p| p.parse::<PoseKind>()).collect::<Result<Vec<_>, _>>().or_raise()?;
    let estimators = estimators
        .iter()
        .map(|e| e.parse::<EstimatorKind>())
        .collect::<Result<Vec<_>, _>>()
        .or_raise()?;
    let keys = group_by
        .unwrap_or_else(|| ["pose", "estimator", "sigma", "plane"].map(String::from).to_vec())
        .iter()
        .map(|k| k.parse::<GroupKey>())
        .collect::<Result<Vec<_>, _>>()
        .or_raise()?;
    let grid = ExperimentGrid::new(poses, estimators, sigmas_deg, trials, seed);
    py.detach(|| {
        let results = run_experiment(&grid)?;
        let mut csv = Vec::new();
        write_results_csv(&results, &mut csv)?;
        let mut summary = Vec::new();
        write_summary_csv(&summarize(&results, &keys)?, &mut summary)?;
        Ok((
            String::from_utf8_lossy(&csv).into_owned(),
            String::from_utf8_lossy(&summary).into_owned(),
        ))
    })
    .or_raise()
}

/// Re-runs one synthetic experiment ("fig5", "fig6", "fig7", "table2");
/// returns `(passed, report)`.
#[pyfunction]
#[pyo3(signature = (which, trials = None, seed = 0))]
fn check_figure(py: Python<'_>, which: &str, trials: Option<usize>, seed: u64) -> PyResult<(bool, String)> {
    let fig = which.parse::<Figure>().or_raise()?;
    let report = py.detach(|| run_check(fig, trials.unwrap_or(fig.default_trials()), seed)).or_raise()?;
    Ok((report.passed(), report.to_string()))
}

#[pymodule]
#[pyo3(name = "affine_stereo")]
fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AffineStereoError", m.py().get_type::<AffineStereoError>())?;
    m.add("ESTIMATORS", EstimatorKind::ALL.map(|e| e.name()).to_vec())?;
    m.add("POSES", PoseKind::ALL.map(|p| p.name()).to_vec())?;
    m.add_class::<Scene>()?;
    m.add_class::<Reconstruction>()?;
    m.add_function(wrap_pyfunction!(affine_from_homography, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_normal, m)?)?;
    m.add_function(wrap_pyfunction!(epipolar_residual, m)?)?;
    m.add_function(wrap_pyfunction!(triangulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_plane_pca, m)?)?;
    m.add_function(wrap_pyfunction!(angular_error, m)?)?;
    m.add_function(wrap_pyfunction!(map_direction, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(check_figure, m)?)?;
    Ok(())
}
