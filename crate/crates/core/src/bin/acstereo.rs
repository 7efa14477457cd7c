use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use affine_stereo::evaluation::{
    check_figure, noise_seed, run_experiment, score_reconstruction, summarize, write_results_csv,
    write_summary_csv, ExperimentGrid, Figure, GroupKey,
};
use affine_stereo::io::{load_scene, save_json, write_ply, SceneFile};
use affine_stereo::pipeline::{apply_metric_scale, run_pipeline, DetHintPolicy, PipelineConfig, PipelineInput};
use affine_stereo::scene::{generate_scene, PoseKind, SceneConfig};
use affine_stereo::{EstimatorKind, Result};

#[derive(Parser)]
#[command(name = "acstereo", version, about = "Stereo reconstruction from affine correspondences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetHint {
    Exact,
    MeanSquaredScale,
    Unit,
}

impl From<DetHint> for DetHintPolicy {
    fn from(d: DetHint) -> Self {
        match d {
            DetHint::Exact => DetHintPolicy::Exact,
            DetHint::MeanSquaredScale => DetHintPolicy::MeanSquaredScale,
            DetHint::Unit => DetHintPolicy::Unit,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic three-board scene with observed directions.
    Simulate {
        #[arg(long)]
        pose: PoseKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        baseline: Option<f64>,
        /// Angular direction noise in degrees.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
    },
    /// Run the reconstruction pipeline on a scene file.
    Reconstruct {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        estimator: EstimatorKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ply: Option<PathBuf>,
        /// Scale the result so grid squares have the scene's square size.
        #[arg(long)]
        metric: bool,
        #[arg(long, value_enum, default_value_t = DetHint::MeanSquaredScale)]
        det_hint: DetHint,
    },
    /// Monte-Carlo experiment over a grid of poses, estimators and noise levels.
    Evaluate {
        #[arg(long, value_delimiter = ',', default_value = "general")]
        poses: Vec<PoseKind>,
        #[arg(long, value_delimiter = ',', default_value = "F2UDIR,F3UDIR,DET3UDIR,2SDIR,3SDIR")]
        estimators: Vec<EstimatorKind>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2,3,5")]
        sigmas: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Group keys for the summary: pose, estimator, sigma, plane.
        #[arg(long, value_delimiter = ',', default_value = "pose,estimator,sigma,plane")]
        group_by: Vec<GroupKey>,
    },
    /// Re-run one of the synthetic experiments and report PASS/FAIL.
    CheckFigure {
        #[arg(long)]
        which: Figure,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate {
            pose,
            seed,
            out,
            baseline,
            sigma,
        } => {
            let mut cfg = SceneConfig::new(pose, seed);
            if let Some(b) = baseline {
                cfg.baseline = b;
            }
            let gt = generate_scene(&cfg)?;
            let scene = SceneFile::observe(gt, sigma, noise_seed(seed))?;
            save_json(&scene, &out)?;
            println!(
                "wrote {} corners ({pose}, seed {seed}, sigma {sigma} deg) to {}",
                scene.ground_truth.corners.len(),
                out.display()
            );
        }
        Command::Reconstruct {
            scene,
            estimator,
            out,
            ply,
            metric,
            det_hint,
        } => {
            let scene = load_scene(&scene)?;
            let gt = &scene.ground_truth;
            let mut cfg = PipelineConfig::new(estimator, gt.k);
            cfg.det_hint = det_hint.into();
            let mut rec = run_pipeline(&PipelineInput::from_scene(gt, scene.directions.clone()), &cfg)?;
            if metric {
                rec = apply_metric_scale(&rec, gt.config.square_size)?;
            }
            save_json(&rec, &out)?;
            if let Some(path) = ply {
                write_ply(&rec, File::create(&path)?)?;
            }
            let (planes, _) = score_reconstruction(gt, &rec);
            println!("{} points, {} flagged, baseline {:.4}", rec.points.len(), rec.flagged.len(), rec.baseline());
            for p in planes {
                println!(
                    "plane {}: mean error {:.4} deg (vs truth {:.4} deg), drop rate {:.3}",
                    p.plane, p.mean_err_deg, p.mean_true_err_deg, p.drop_rate
                );
            }
        }
        Command::Evaluate {
            poses,
            estimators,
            sigmas,
            trials,
            seed,
            out,
            summary,
            group_by,
        } => {
            let grid = ExperimentGrid::new(poses, estimators, sigmas, trials, seed);
            let results = run_experiment(&grid)?;
            write_results_csv(&results, File::create(&out)?)?;
            let failed = results.iter().filter(|r| r.failure.is_some()).count();
            println!("{} trials ({failed} with failures) written to {}", results.len(), out.display());
            if let Some(path) = summary {
                let rows = summarize(&results, &group_by)?;
                write_summary_csv(&rows, File::create(&path)?)?;
                println!("{} summary rows written to {}", rows.len(), path.display());
            }
        }
        Command::CheckFigure { which, trials, seed } => {
            let report = check_figure(which, trials.unwrap_or(which.default_trials()), seed)?;
            println!("{report}");
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
