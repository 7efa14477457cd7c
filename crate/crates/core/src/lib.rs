//! Stereo reconstruction from affine correspondences.
//!
//! The crate estimates local affine maps from matched image directions,
//! recovers epipolar geometry and the relative pose, triangulates points and
//! reconstructs surface normals, producing oriented point clouds. A synthetic
//! scene generator and an evaluation harness measure normal accuracy under
//! angular direction noise.

pub mod affine;
pub mod epipolar;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod io;
mod linalg;
pub mod normals;
pub mod pipeline;
pub mod scene;

pub use affine::{
    epipolar_constraint_residual, estimate_2sdir, estimate_3sdir, estimate_det3udir, estimate_f2udir,
    estimate_f3udir, solve_det_constrained, AffineEstimate, ConstrainedSolution, ConstrainedSystem,
    EstimatorKind,
};
pub use epipolar::{
    affine_from_homography, decompose_essential, epipolar_normals, essential_from_f, estimate_f_8point,
    homography_from_plane, refine_f_with_acs, triangulate, triangulate_dlt, EssentialMatrix,
    FundamentalMatrix, Homography, Plane, Triangulation,
};
pub use error::{Error, Result, Stage};
pub use geometry::{
    compose_camera, intrinsics, project, projection_gradients, AffineCorrespondence, AffineMap, CameraP,
    DirectionPair, PixelPoint, Pose, WorldPoint,
};
pub use linalg::{rotation_angle, vector_angle};
pub use normals::{compute_w_vectors, estimate_normal, OrientedPoint, WVectors};
