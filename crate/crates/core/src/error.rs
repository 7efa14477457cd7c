use std::fmt;

use thiserror::Error;

/// Pipeline stage labels attached to propagated errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    InitialFundamental,
    AffineEstimation,
    RefinedFundamental,
    Essential,
    Decomposition,
    Triangulation,
    NormalEstimation,
    MetricScale,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::InitialFundamental => "initial fundamental matrix",
            Stage::AffineEstimation => "affine estimation",
            Stage::RefinedFundamental => "refined fundamental matrix",
            Stage::Essential => "essential matrix",
            Stage::Decomposition => "essential decomposition",
            Stage::Triangulation => "triangulation",
            Stage::NormalEstimation => "normal estimation",
            Stage::MetricScale => "metric scale",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point lies on the principal plane of the camera")]
    PointAtInfinity,
    #[error("point maps to the line at infinity of the homography")]
    PointOnHorizon,
    #[error("direction vectors are (nearly) linearly dependent")]
    DegenerateDirections,
    #[error("null vector determinant sign cannot match the requested determinant")]
    SignMismatch,
    #[error("homogeneous system has a null space of dimension greater than one")]
    RankDeficient,
    #[error("no generalized eigenvector admits the determinant constraint")]
    NoAdmissibleEigenvector,
    #[error("linear system is singular (condition number {0:.3e})")]
    SingularSystem(f64),
    #[error("point coincides with an epipole (vanishing epipolar-line normal)")]
    EpipoleAtPoint,
    #[error("plane passes through a camera center")]
    DegeneratePlane,
    #[error("degenerate point configuration for fundamental matrix estimation")]
    DegenerateConfiguration,
    #[error("need at least {needed} constraints, got {got}")]
    NotEnoughData { needed: usize, got: usize },
    #[error("no pose candidate places a majority of points in front of both cameras")]
    NoCheiralityWinner,
    #[error("back-projected rays are parallel")]
    ParallelRays,
    #[error("surface normal is ill-conditioned (singular values {0:.3e} and {1:.3e})")]
    IllConditioned(f64, f64),
    #[error("fewer than three points or points are collinear")]
    CollinearPoints,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("scene point has non-positive depth in camera {camera}")]
    CornersBehindCamera { camera: usize },
    #[error("not enough adjacent same-plane points to fix the metric scale")]
    InsufficientStructure,
    #[error("cannot summarize an empty group")]
    EmptyGroup,
    #[error("i/o error: {0}")]
    Io(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error with stage labels removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.to_string())
        } else {
            Error::Format(e.to_string())
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
