//! Monte-Carlo evaluation: plane fitting, angular errors, seeded trial grids,
//! boxplot statistics and CSV output.
//!
//! A trial generates a scene, perturbs its directions, runs the pipeline,
//! fixes the metric scale from the board square size and fits a plane to
//! each board's reconstructed points. Per corner, the estimated normal is
//! compared with the fitted plane normal; the plane's error is the mean over
//! its surviving corners and the trial's overall error is the mean over its
//! planes.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affine::EstimatorKind;
use crate::error::{Error, Result};
use crate::geometry::WorldPoint;
use crate::linalg::{rotation_angle, svd, vector_angle};
use crate::pipeline::{apply_metric_scale, run_pipeline, DetHintPolicy, PipelineConfig, PipelineInput, Reconstruction};
use crate::scene::{generate_scene, observe_directions, GroundTruth, PoseKind, SceneConfig, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneFit {
    #[serde(with = "crate::geometry::vec3_array")]
    pub normal: Vector3<f64>,
    pub centroid: WorldPoint,
    pub rms_residual: f64,
}

/// Least-squares plane through `points`. The normal is the direction of
/// least variance, oriented toward the origin when the origin is off the
/// plane.
pub fn fit_plane_pca(points: &[WorldPoint]) -> Result<PlaneFit> {
    if points.len() < 3 {
        return Err(Error::CollinearPoints);
    }
    let n = points.len() as f64;
    let centroid = points.iter().map(|p| p.to_vector()).sum::<Vector3<f64>>() / n;
    let centered = DMatrix::from_fn(points.len(), 3, |r, c| points[r].to_vector()[c] - centroid[c]);
    let d = svd(&centered);
    // covariance eigenvalues are s^2 / n
    let l: Vec<f64> = d.s.iter().map(|s| s * s / n).collect();
    if !(l[0] > 0.0) || l[1] - l[2] <= 1e-10 * l[0] {
        return Err(Error::CollinearPoints);
    }
    let mut normal = Vector3::new(d.v_t[(2, 0)], d.v_t[(2, 1)], d.v_t[(2, 2)]).normalize();
    if normal.dot(&centroid) > 0.0 {
        normal = -normal;
    }
    Ok(PlaneFit {
        normal,
        centroid: WorldPoint::from_vector(&centroid),
        rms_residual: l[2].sqrt(),
    })
}

/// Unsigned angle between two directions in degrees, folded to `[0, 90]`.
pub fn angular_error(n_est: &Vector3<f64>, n_ref: &Vector3<f64>) -> f64 {
    let cross = n_est.cross(n_ref).norm();
    let dot = n_est.dot(n_ref).abs();
    cross.atan2(dot).to_degrees()
}

/// Error statistics of one board within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneError {
    /// 1-based board index.
    pub plane: u8,
    /// Mean per-corner error against the fitted plane, degrees.
    pub mean_err_deg: f64,
    pub median_err_deg: f64,
    /// Mean per-corner error against the true board normal, degrees.
    pub mean_true_err_deg: f64,
    /// Fraction of the board's corners that produced no usable normal.
    pub drop_rate: f64,
    pub corners_used: usize,
}

impl PlaneError {
    fn failed(plane: u8) -> Self {
        Self {
            plane,
            mean_err_deg: f64::NAN,
            median_err_deg: f64::NAN,
            mean_true_err_deg: f64::NAN,
            drop_rate: 1.0,
            corners_used: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub pose: PoseKind,
    pub estimator: EstimatorKind,
    pub sigma_deg: f64,
    pub trial: usize,
    pub seed: u64,
    pub planes: [PlaneError; 3],
    /// `|angle - 90|` between fitted plane normals for the pairs
    /// (1, 2), (1, 3), (2, 3), degrees.
    pub orthogonality_err_deg: [f64; 3],
    pub rotation_err_deg: f64,
    pub translation_err_deg: f64,
    /// Recovered baseline after metric scaling.
    pub baseline: f64,
    pub baseline_rel_err: f64,
    pub failure: Option<String>,
}

impl TrialResult {
    /// Mean of the finite plane errors: the trial's overall error.
    pub fn overall_err_deg(&self) -> f64 {
        let v: Vec<f64> = self.planes.iter().map(|p| p.mean_err_deg).filter(|v| v.is_finite()).collect();
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }
}

/// Cartesian grid of experiment cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub poses: Vec<PoseKind>,
    pub estimators: Vec<EstimatorKind>,
    pub sigmas_deg: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    /// Template for every scene; `pose_kind` and `rng_seed` are overwritten
    /// per trial.
    pub scene: SceneConfig,
    /// Determinant hint for DET3UDIR.
    pub det_hint: DetHintPolicy,
}

impl ExperimentGrid {
    pub fn new(poses: Vec<PoseKind>, estimators: Vec<EstimatorKind>, sigmas_deg: Vec<f64>, trials: usize, base_seed: u64) -> Self {
        Self {
            poses,
            estimators,
            sigmas_deg,
            trials,
            base_seed,
            scene: SceneConfig::default(),
            det_hint: DetHintPolicy::MeanSquaredScale,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of trial `trial` in the cell `(pose, sigma)`.
///
/// The estimator is deliberately not part of the cell, so all estimators
/// of a cell see the same scenes and the same noise.
pub fn trial_seed(base_seed: u64, pose: PoseKind, sigma_deg: f64, trial: usize) -> u64 {
    let pose_code = PoseKind::ALL.iter().position(|&p| p == pose).unwrap_or(0) as u64;
    let mut h = splitmix64(base_seed);
    h = splitmix64(h ^ pose_code);
    h = splitmix64(h ^ sigma_deg.to_bits());
    splitmix64(h ^ trial as u64)
}

pub fn noise_seed(seed: u64) -> u64 {
    splitmix64(seed ^ 0x6e6f_6973_6500_0000)
}

fn median_of(values: &[f64]) -> f64 {
    quantile(&sorted(values), 0.5)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Linear interpolation between order statistics at position `(n - 1) p`.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Errors of a finished reconstruction against the true scene.
pub fn score_reconstruction(gt: &GroundTruth, rec: &Reconstruction) -> ([PlaneError; 3], [f64; 3]) {
    let mut fits = [None; 3];
    let planes = [1u8, 2, 3].map(|plane| {
        let total = gt.corners.iter().filter(|c| c.plane == plane).count();
        let pts: Vec<_> = rec.plane_points(plane).filter(|p| p.point.normal.iter().all(|v| v.is_finite())).collect();
        let positions: Vec<_> = pts.iter().map(|p| p.point.position).collect();
        let Ok(fit) = fit_plane_pca(&positions) else {
            return PlaneError::failed(plane);
        };
        fits[plane as usize - 1] = Some(fit.normal);
        let errs: Vec<f64> = pts.iter().map(|p| angular_error(&p.point.normal, &fit.normal)).collect();
        let truth = gt.planes[plane as usize - 1].normal;
        let true_errs: Vec<f64> = pts.iter().map(|p| angular_error(&p.point.normal, &truth)).collect();
        let used = errs.len();
        PlaneError {
            plane,
            mean_err_deg: errs.iter().sum::<f64>() / used as f64,
            median_err_deg: median_of(&errs),
            mean_true_err_deg: true_errs.iter().sum::<f64>() / used as f64,
            drop_rate: if total == 0 { 0.0 } else { (total - used) as f64 / total as f64 },
            corners_used: used,
        }
    });
    let ortho = [(0, 1), (0, 2), (1, 2)].map(|(a, b)| match (fits[a], fits[b]) {
        (Some(na), Some(nb)) => (vector_angle(&na, &nb).to_degrees() - 90.0).abs(),
        _ => f64::NAN,
    });
    (planes, ortho)
}

/// Runs one trial. Never fails: errors are recorded in `failure`.
pub fn run_trial(
    template: &SceneConfig,
    det_hint: DetHintPolicy,
    pose: PoseKind,
    estimator: EstimatorKind,
    sigma_deg: f64,
    trial: usize,
    seed: u64,
) -> TrialResult {
    let mut out = TrialResult {
        pose,
        estimator,
        sigma_deg,
        trial,
        seed,
        planes: [1, 2, 3].map(PlaneError::failed),
        orthogonality_err_deg: [f64::NAN; 3],
        rotation_err_deg: f64::NAN,
        translation_err_deg: f64::NAN,
        baseline: f64::NAN,
        baseline_rel_err: f64::NAN,
        failure: None,
    };
    let mut cfg = template.clone();
    cfg.pose_kind = pose;
    cfg.rng_seed = seed;
    let run = || -> Result<(GroundTruth, Reconstruction)> {
        let gt = generate_scene(&cfg)?;
        let obs = observe_directions(&gt, sigma_deg, noise_seed(seed))?;
        let mut pipeline = PipelineConfig::new(estimator, gt.k);
        pipeline.det_hint = det_hint;
        let rec = run_pipeline(&PipelineInput::from_scene(&gt, obs), &pipeline)?;
        Ok((gt, rec))
    };
    let (gt, rec) = match run() {
        Ok(v) => v,
        Err(e) => {
            out.failure = Some(e.to_string());
            return out;
        }
    };
    out.rotation_err_deg = rotation_angle(&rec.pose.rotation, &gt.pose.rotation).to_degrees();
    out.translation_err_deg = vector_angle(&rec.pose.translation, &gt.pose.translation).to_degrees();
    let (planes, ortho) = score_reconstruction(&gt, &rec);
    out.planes = planes;
    out.orthogonality_err_deg = ortho;
    match apply_metric_scale(&rec, cfg.square_size) {
        Ok(m) => {
            out.baseline = m.baseline();
            out.baseline_rel_err = (out.baseline - gt.baseline()).abs() / gt.baseline();
        }
        Err(e) => out.failure = Some(e.to_string()),
    }
    out
}

/// Every trial of every cell, in canonical order: pose, estimator, sigma,
/// trial index (grid order, not sorted).
pub fn run_experiment(grid: &ExperimentGrid) -> Result<Vec<TrialResult>> {
    if grid.trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    if grid.sigmas_deg.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::InvalidConfig("noise levels must be finite and non-negative".into()));
    }
    grid.scene.validate()?;
    let mut jobs = Vec::new();
    for &pose in &grid.poses {
        for &est in &grid.estimators {
            for &sigma in &grid.sigmas_deg {
                for t in 0..grid.trials {
                    jobs.push((pose, est, sigma, t));
                }
            }
        }
    }
    Ok(jobs
        .into_par_iter()
        .map(|(pose, est, sigma, t)| {
            let seed = trial_seed(grid.base_seed, pose, sigma, t);
            run_trial(&grid.scene, grid.det_hint, pose, est, sigma, t, seed)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub n: usize,
}

/// Box statistics of the finite entries of `values`; whiskers at the
/// extremes.
pub fn box_stats(values: &[f64]) -> Result<BoxStats> {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let s = sorted(&finite);
    Ok(BoxStats {
        median: quantile(&s, 0.5),
        q25: quantile(&s, 0.25),
        q75: quantile(&s, 0.75),
        whisker_lo: s[0],
        whisker_hi: s[s.len() - 1],
        n: s.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Pose,
    Estimator,
    Sigma,
    Plane,
}

impl FromStr for GroupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pose" => Ok(GroupKey::Pose),
            "estimator" => Ok(GroupKey::Estimator),
            "sigma" | "sigma_deg" => Ok(GroupKey::Sigma),
            "plane" | "plane_id" => Ok(GroupKey::Plane),
            other => Err(Error::InvalidConfig(format!("unknown group key `{other}`"))),
        }
    }
}

/// One group of the summary table. Keys not grouped on are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub pose: Option<PoseKind>,
    pub estimator: Option<EstimatorKind>,
    pub sigma_deg: Option<f64>,
    pub plane: Option<u8>,
    pub stats: BoxStats,
    /// (trial, plane) entries without a finite error.
    pub failures: usize,
}

type Group = (Option<PoseKind>, Option<EstimatorKind>, Option<u64>, Option<u8>);

/// Box statistics of `mean_err_deg` over (trial, plane) entries, grouped by
/// `keys`. Groups appear in order of first occurrence.
pub fn summarize(results: &[TrialResult], keys: &[GroupKey]) -> Result<Vec<SummaryRow>> {
    let has = |k| keys.contains(&k);
    let mut groups: Vec<(Group, Vec<f64>, usize)> = Vec::new();
    for r in results {
        for p in &r.planes {
            let g: Group = (
                has(GroupKey::Pose).then_some(r.pose),
                has(GroupKey::Estimator).then_some(r.estimator),
                has(GroupKey::Sigma).then_some(r.sigma_deg.to_bits()),
                has(GroupKey::Plane).then_some(p.plane),
            );
            let idx = match groups.iter().position(|(k, _, _)| *k == g) {
                Some(i) => i,
                None => {
                    groups.push((g, Vec::new(), 0));
                    groups.len() - 1
                }
            };
            if p.mean_err_deg.is_finite() {
                groups[idx].1.push(p.mean_err_deg);
            } else {
                groups[idx].2 += 1;
            }
        }
    }
    if groups.is_empty() {
        return Err(Error::EmptyGroup);
    }
    groups
        .into_iter()
        .map(|((pose, estimator, sigma, plane), values, failures)| {
            Ok(SummaryRow {
                pose,
                estimator,
                sigma_deg: sigma.map(f64::from_bits),
                plane,
                stats: box_stats(&values)?,
                failures,
            })
        })
        .collect()
}

/// All per-plane errors matching the filter, failed entries skipped.
pub fn plane_errors<'a>(
    results: &'a [TrialResult],
    filter: impl Fn(&TrialResult, &PlaneError) -> bool + 'a,
) -> impl Iterator<Item = f64> + 'a {
    results
        .iter()
        .flat_map(move |r| r.planes.iter().filter(|p| filter(r, p)).map(|p| p.mean_err_deg).collect::<Vec<_>>())
        .filter(|v| v.is_finite())
}

fn fmt_f(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "NaN".to_string()
    }
}

pub const RESULTS_HEADER: [&str; 21] = [
    "schema_version",
    "pose",
    "estimator",
    "sigma_deg",
    "trial",
    "seed",
    "plane_id",
    "mean_err_deg",
    "median_err_deg",
    "drop_rate",
    "mean_true_err_deg",
    "corners_used",
    "trial_mean_err_deg",
    "ortho_12_deg",
    "ortho_13_deg",
    "ortho_23_deg",
    "rotation_err_deg",
    "translation_err_deg",
    "baseline",
    "baseline_rel_err",
    "failure",
];

/// One row per (trial, plane). Floats carry 17 significant digits.
pub fn write_results_csv<W: Write>(results: &[TrialResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in results {
        for p in &r.planes {
            w.write_record([
                SCHEMA_VERSION.to_string(),
                r.pose.name().to_string(),
                r.estimator.name().to_string(),
                fmt_f(r.sigma_deg),
                r.trial.to_string(),
                r.seed.to_string(),
                p.plane.to_string(),
                fmt_f(p.mean_err_deg),
                fmt_f(p.median_err_deg),
                fmt_f(p.drop_rate),
                fmt_f(p.mean_true_err_deg),
                p.corners_used.to_string(),
                fmt_f(r.overall_err_deg()),
                fmt_f(r.orthogonality_err_deg[0]),
                fmt_f(r.orthogonality_err_deg[1]),
                fmt_f(r.orthogonality_err_deg[2]),
                fmt_f(r.rotation_err_deg),
                fmt_f(r.translation_err_deg),
                fmt_f(r.baseline),
                fmt_f(r.baseline_rel_err),
                r.failure.clone().unwrap_or_default(),
            ])
            ?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "schema_version",
        "pose",
        "estimator",
        "sigma_deg",
        "plane_id",
        "median",
        "q25",
        "q75",
        "whisker_lo",
        "whisker_hi",
        "n",
        "failures",
    ])
    ?;
    let all = "all".to_string();
    for r in rows {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            r.pose.map_or(all.clone(), |p| p.name().to_string()),
            r.estimator.map_or(all.clone(), |e| e.name().to_string()),
            r.sigma_deg.map_or(all.clone(), fmt_f),
            r.plane.map_or(all.clone(), |p| p.to_string()),
            fmt_f(r.stats.median),
            fmt_f(r.stats.q25),
            fmt_f(r.stats.q75),
            fmt_f(r.stats.whisker_lo),
            fmt_f(r.stats.whisker_hi),
            r.stats.n.to_string(),
            r.failures.to_string(),
        ])
        ?;
    }
    w.flush()?;
    Ok(())
}

/// Reproducible experiment with a pass/fail verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    /// Error growth with noise, general motion, F2UDIR.
    Fig5,
    /// Estimator ranking at 3 degrees, general motion.
    Fig6,
    /// Special motions at 1 degree.
    Fig7,
    /// Metric baseline recovery, standard stereo at 1 degree.
    Table2,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig5, Figure::Fig6, Figure::Fig7, Figure::Table2];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
            Figure::Table2 => "table2",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Figure::Table2 => 50,
            _ => 200,
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown figure `{s}` (fig5, fig6, fig7, table2)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub pass: bool,
    /// Set when the check passed only through a tie allowance.
    pub tie: bool,
    pub detail: String,
}

impl Check {
    fn new(label: impl Into<String>, pass: bool, detail: String) -> Self {
        Self {
            label: label.into(),
            pass,
            tie: false,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureReport {
    pub figure: Figure,
    pub trials: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl FigureReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for FigureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let verdict = match (c.pass, c.tie) {
                (true, false) => "PASS",
                (true, true) => "PASS (tie)",
                (false, _) => "FAIL",
            };
            writeln!(f, "{verdict} {} {}: {}", self.figure, c.label, c.detail)?;
        }
        write!(f, "{} {}", if self.passed() { "PASS" } else { "FAIL" }, self.figure)
    }
}

fn overall_median(results: &[TrialResult], filter: impl Fn(&TrialResult) -> bool) -> f64 {
    let v: Vec<f64> = results
        .iter()
        .filter(|r| filter(r))
        .map(TrialResult::overall_err_deg)
        .filter(|v| v.is_finite())
        .collect();
    if v.is_empty() {
        f64::NAN
    } else {
        median_of(&v)
    }
}

/// Relative margin below which two medians count as tied.
pub const TIE_MARGIN: f64 = 0.10;

fn median_where(results: &[TrialResult], filter: impl Fn(&TrialResult, &PlaneError) -> bool) -> f64 {
    let v: Vec<f64> = plane_errors(results, filter).collect();
    if v.is_empty() {
        f64::NAN
    } else {
        median_of(&v)
    }
}

/// `a <= b` with at least `TIE_MARGIN` relative margin, or a flagged tie.
fn ordered(label: String, a: f64, b: f64) -> Check {
    let margin = (b - a) / b.abs();
    let detail = format!("{a:.3} vs {b:.3} (margin {:.1}%)", 100.0 * margin);
    let mut c = Check::new(label, margin >= TIE_MARGIN, detail);
    if !c.pass && margin.abs() < TIE_MARGIN {
        c.pass = true;
        c.tie = true;
    }
    c
}

pub fn check_figure(figure: Figure, trials: usize, seed: u64) -> Result<FigureReport> {
    let checks = match figure {
        Figure::Fig5 => check_fig5(trials, seed)?,
        Figure::Fig6 => check_fig6(trials, seed)?,
        Figure::Fig7 => check_fig7(trials, seed)?,
        Figure::Table2 => check_table2(trials, seed)?,
    };
    Ok(FigureReport {
        figure,
        trials,
        seed,
        checks,
    })
}

pub const FIG5_SIGMAS: [f64; 6] = [0.0, 0.5, 1.0, 2.0, 3.0, 5.0];

fn check_fig5(trials: usize, seed: u64) -> Result<Vec<Check>> {
    let grid = ExperimentGrid::new(vec![PoseKind::General], vec![EstimatorKind::F2UDir], FIG5_SIGMAS.to_vec(), trials, seed);
    let results = run_experiment(&grid)?;
    let medians: Vec<f64> = FIG5_SIGMAS
        .iter()
        .map(|&s| overall_median(&results, |r| r.sigma_deg == s))
        .collect();
    let listing = FIG5_SIGMAS
        .iter()
        .zip(&medians)
        .map(|(s, m)| format!("{s}:{m:.3}"))
        .collect::<Vec<_>>()
        .join(" ");
    let mut ties = 0;
    let mut increasing = medians.iter().all(|m| m.is_finite());
    for w in medians.windows(2) {
        if w[1] > w[0] {
            continue;
        }
        if (w[0] - w[1]).abs() <= TIE_MARGIN * w[0].abs().max(w[1].abs()) {
            ties += 1;
        } else {
            increasing = false;
        }
    }
    let mut mono = Check::new("median grows with noise", increasing && ties <= 1, format!("{listing} ({ties} tie)"));
    mono.tie = ties == 1;
    let top = medians[medians.len() - 1];
    let ceiling = Check::new("ceiling at 5 deg", top <= 20.0, format!("{top:.3} <= 20"));
    Ok(vec![mono, ceiling])
}

fn check_fig6(trials: usize, seed: u64) -> Result<Vec<Check>> {
    let grid = ExperimentGrid::new(vec![PoseKind::General], EstimatorKind::ALL.to_vec(), vec![3.0], trials, seed);
    let results = run_experiment(&grid)?;
    let m = |e: EstimatorKind| overall_median(&results, |r| r.estimator == e);
    use EstimatorKind::*;
    let pairs = [(TwoSDir, F2UDir), (F2UDir, Det3UDir), (ThreeSDir, F3UDir), (F3UDir, Det3UDir)];
    Ok(pairs
        .iter()
        .map(|&(a, b)| ordered(format!("{} <= {}", a.name(), b.name()), m(a), m(b)))
        .collect())
}

fn check_fig7(trials: usize, seed: u64) -> Result<Vec<Check>> {
    let grid = ExperimentGrid::new(
        vec![PoseKind::Forward, PoseKind::StandardStereo, PoseKind::Planar],
        vec![EstimatorKind::F2UDir],
        vec![1.0],
        trials,
        seed,
    );
    let results = run_experiment(&grid)?;
    let plane = |pose: PoseKind, id: u8| median_where(&results, |r, p| r.pose == pose && p.plane == id);
    let overall = |pose: PoseKind| overall_median(&results, |r| r.pose == pose);
    let (f1, f3) = (plane(PoseKind::Forward, 1), plane(PoseKind::Forward, 3));
    let mut checks = vec![
        Check::new("forward plane 1 vs plane 3", f1 >= 2.0 * f3, format!("{f1:.3} >= 2 x {f3:.3}")),
        {
            let (a, b) = (overall(PoseKind::Forward), overall(PoseKind::StandardStereo));
            Check::new("forward worse than standard stereo", a > b, format!("{a:.3} > {b:.3}"))
        },
    ];
    for pose in [PoseKind::StandardStereo, PoseKind::Planar] {
        for id in [2u8, 3] {
            let v = plane(pose, id);
            checks.push(Check::new(format!("{pose} plane {id}"), v < 5.0, format!("{v:.3} < 5")));
        }
    }
    Ok(checks)
}

fn check_table2(trials: usize, seed: u64) -> Result<Vec<Check>> {
    let grid = ExperimentGrid::new(vec![PoseKind::StandardStereo], EstimatorKind::ALL.to_vec(), vec![1.0], trials, seed);
    let target = grid.scene.baseline;
    let results = run_experiment(&grid)?;
    Ok(EstimatorKind::ALL
        .iter()
        .map(|&e| {
            let b: Vec<f64> = results
                .iter()
                .filter(|r| r.estimator == e && r.baseline.is_finite())
                .map(|r| r.baseline)
                .collect();
            let m = if b.is_empty() { f64::NAN } else { median_of(&b) };
            let dev = (m - target).abs() / target;
            Check::new(
                format!("{} baseline", e.name()),
                dev <= 0.03,
                format!("{m:.2} vs {target} ({:.2}%)", 100.0 * dev),
            )
        })
        .collect())
}
