//! File formats: scene files (ground truth plus observed directions),
//! reconstruction JSON and ASCII PLY point clouds.
//!
//! A scene file is a JSON object
//!
//! ```text
//! { "schema": 1, "sigma_deg": 3.0, "noise_seed": 17,
//!   "ground_truth": { ... cameras as 12-element row-major arrays,
//!                     "corners": [ { "id", "plane", "row", "col", "world",
//!                                    "p1", "p2", "affine", "normal" }, ... ] },
//!   "directions": [ { "corner", "horizontal": { "d1", "d2", "scale" },
//!                     "vertical", "diagonal", "noisy" }, ... ] }
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::Reconstruction;
use crate::scene::{observe_directions, DirectionObservation, GroundTruth, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub schema: u32,
    pub sigma_deg: f64,
    pub noise_seed: u64,
    pub ground_truth: GroundTruth,
    pub directions: Vec<DirectionObservation>,
}

impl SceneFile {
    /// Observes `gt` with angular noise `sigma_deg`.
    pub fn observe(ground_truth: GroundTruth, sigma_deg: f64, noise_seed: u64) -> Result<Self> {
        let directions = observe_directions(&ground_truth, sigma_deg, noise_seed)?;
        Ok(Self {
            schema: SCHEMA_VERSION,
            sigma_deg,
            noise_seed,
            ground_truth,
            directions,
        })
    }

    fn check(self) -> Result<Self> {
        if self.schema != SCHEMA_VERSION || self.ground_truth.schema != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.directions.len() != self.ground_truth.corners.len() {
            return Err(Error::Format(format!(
                "{} direction records for {} corners",
                self.directions.len(),
                self.ground_truth.corners.len()
            )));
        }
        Ok(self)
    }
}

pub fn write_json<T: Serialize, W: Write>(value: &T, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_scene<R: Read>(input: R) -> Result<SceneFile> {
    let scene: SceneFile = serde_json::from_reader(BufReader::new(input))?;
    scene.check()
}

pub fn load_scene(path: &Path) -> Result<SceneFile> {
    read_scene(File::open(path)?)
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_json(value, File::create(path)?)
}

pub fn read_reconstruction<R: Read>(input: R) -> Result<Reconstruction> {
    let rec: Reconstruction = serde_json::from_reader(BufReader::new(input))?;
    if rec.schema != SCHEMA_VERSION {
        return Err(Error::Format(format!("unsupported schema {}", rec.schema)));
    }
    Ok(rec)
}

/// ASCII PLY with `x y z nx ny nz` per reconstructed point.
pub fn write_ply<W: Write>(rec: &Reconstruction, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "comment estimator {}", rec.estimator.name())?;
    writeln!(w, "element vertex {}", rec.points.len())?;
    for p in ["x", "y", "z", "nx", "ny", "nz"] {
        writeln!(w, "property double {p}")?;
    }
    writeln!(w, "end_header")?;
    for lp in &rec.points {
        let x = lp.point.position;
        let n = lp.point.normal;
        writeln!(w, "{:e} {:e} {:e} {:e} {:e} {:e}", x.x, x.y, x.z, n.x, n.y, n.z)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::EstimatorKind;
    use crate::pipeline::reconstruct_scene;
    use crate::scene::{generate_scene, PoseKind, SceneConfig};

    fn scene() -> SceneFile {
        let gt = generate_scene(&SceneConfig::new(PoseKind::Planar, 9)).unwrap();
        SceneFile::observe(gt, 1.5, 4).unwrap()
    }

    #[test]
    fn scene_round_trip() {
        let s = scene();
        let mut buf = Vec::new();
        write_json(&s, &mut buf).unwrap();
        let back = read_scene(buf.as_slice()).unwrap();
        assert_eq!(back, s);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\"schema\": 1"));
    }

    #[test]
    fn rejects_bad_scene_files() {
        let mut s = scene();
        s.schema = 7;
        let mut buf = Vec::new();
        write_json(&s, &mut buf).unwrap();
        assert!(matches!(read_scene(buf.as_slice()), Err(Error::Format(_))));

        let mut s = scene();
        s.directions.pop();
        let mut buf = Vec::new();
        write_json(&s, &mut buf).unwrap();
        assert!(matches!(read_scene(buf.as_slice()), Err(Error::Format(_))));

        assert!(matches!(read_scene(&b"{ not json"[..]), Err(Error::Format(_))));
        assert!(matches!(load_scene(Path::new("/nonexistent/scene.json")), Err(Error::Io(_))));
    }

    #[test]
    fn reconstruction_json_and_ply() {
        let s = scene();
        let rec = reconstruct_scene(&s.ground_truth, s.directions, EstimatorKind::TwoSDir).unwrap();
        let mut buf = Vec::new();
        write_json(&rec, &mut buf).unwrap();
        assert_eq!(read_reconstruction(buf.as_slice()).unwrap(), rec);

        let mut ply = Vec::new();
        write_ply(&rec, &mut ply).unwrap();
        let text = String::from_utf8(ply).unwrap();
        let body: Vec<_> = text.split("end_header\n").nth(1).unwrap().lines().collect();
        assert_eq!(body.len(), rec.points.len());
        assert!(text.contains(&format!("element vertex {}", rec.points.len())));
        let first: Vec<f64> = body[0].split(' ').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first.len(), 6);
        assert!((first[2] - rec.points[0].point.position.z).abs() < 1e-9 * first[2].abs());
    }
}
