//! Clip synthesis: frames, ground-truth fields and a manifest per clip.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::equirect::{reproject, EquirectImage};
use super::trajectory::Trajectory;
use super::DatagenError;
use crate::camera::CameraIntrinsics;
use crate::field::{render_fields, GridSpec, PerspectiveField};
use crate::gravity::{gravity_from_world_pose, GravityState};
use crate::io::{file_error, write_json, write_pff_file, CameraJson, PffRecord};

pub const DEFAULT_FRAMES: usize = 81;
pub const DEFAULT_FPS: f64 = 16.0;

/// Ground-truth gravity (world up `+Z`) and fields for one frame.
pub fn gt_annotation(
    cam: &CameraIntrinsics,
    world_to_camera: &Matrix3<f64>,
    grid: &GridSpec,
) -> Result<(GravityState, PerspectiveField), DatagenError> {
    let g = gravity_from_world_pose(world_to_camera, &Vector3::z())?;
    let field = render_fields(cam, &g, grid)?;
    Ok((g, field))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    pub clip_id: String,
    pub pano_id: String,
    pub frames: usize,
    pub fps: f64,
    /// Field sampling; defaults to [`GridSpec::for_image`].
    pub grid: Option<GridSpec>,
    pub seed: u64,
}

impl ClipSpec {
    pub fn new(clip_id: impl Into<String>, pano_id: impl Into<String>, seed: u64) -> Self {
        Self {
            clip_id: clip_id.into(),
            pano_id: pano_id.into(),
            frames: DEFAULT_FRAMES,
            fps: DEFAULT_FPS,
            grid: None,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub index: usize,
    pub t: f64,
    /// World-to-camera quaternion `[w, x, y, z]`.
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
    pub gravity: [f64; 3],
    /// Paths relative to the manifest.
    pub image: String,
    pub field: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub clip_id: String,
    pub pano_id: String,
    pub seed: u64,
    pub fps: f64,
    pub frame_count: usize,
    pub width: u32,
    pub height: u32,
    pub grid_stride: u32,
    pub camera: CameraJson,
    pub camera_file: String,
    pub frames: Vec<FrameRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CAMERA_FILE: &str = "camera.json";

/// Writes `<out_dir>/<clip_id>/` with `frames/*.png`, `fields/*.pff`,
/// `camera.json` and `manifest.json`, and returns the manifest.
pub fn generate_clip(
    pano: &EquirectImage,
    traj: &Trajectory,
    cam: &CameraIntrinsics,
    spec: &ClipSpec,
    out_dir: &Path,
) -> Result<DatasetManifest, DatagenError> {
    if !(spec.fps > 0.0 && spec.fps.is_finite()) {
        return Err(DatagenError::Spec(format!("fps {} must be positive", spec.fps)));
    }
    let grid = spec.grid.unwrap_or_else(|| GridSpec::for_image(cam.width(), cam.height()));
    grid.validate(cam.width(), cam.height())?;
    let clip = traj.resample(spec.frames)?.retimed(spec.fps);

    let dir = out_dir.join(&spec.clip_id);
    for sub in ["frames", "fields"] {
        let d = dir.join(sub);
        fs::create_dir_all(&d).map_err(file_error(&d))?;
    }

    let frames = clip
        .poses()
        .par_iter()
        .enumerate()
        .map(|(index, pose)| {
            let r = pose.rotation.to_rotation_matrix().into_inner();
            let (g, field) = gt_annotation(cam, &r, &grid)?;
            let image = format!("frames/{index:06}.png");
            let field_path = format!("fields/{index:06}.pff");
            reproject(pano, &r, cam).image.save(dir.join(&image))?;
            write_pff_file(&dir.join(&field_path), &PffRecord::from_field(&field))?;
            let q = pose.rotation.quaternion();
            let gv = g.vector();
            Ok(FrameRecord {
                index,
                t: pose.t,
                rotation: [q.w, q.i, q.j, q.k],
                translation: [pose.translation.x, pose.translation.y, pose.translation.z],
                gravity: [gv.x, gv.y, gv.z],
                image,
                field: field_path,
            })
        })
        .collect::<Result<Vec<_>, DatagenError>>()?;

    let camera = CameraJson::from(cam);
    write_json(&dir.join(CAMERA_FILE), &camera)?;
    let manifest = DatasetManifest {
        clip_id: spec.clip_id.clone(),
        pano_id: spec.pano_id.clone(),
        seed: spec.seed,
        fps: spec.fps,
        frame_count: frames.len(),
        width: cam.width(),
        height: cam.height(),
        grid_stride: grid.stride,
        camera,
        camera_file: CAMERA_FILE.to_string(),
        frames,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::scene::camera_rotation;

    #[test]
    fn identity_pose_looks_at_zenith() {
        let cam = CameraIntrinsics::pinhole(64, 64, 30.0).unwrap();
        let (g, field) = gt_annotation(&cam, &Matrix3::identity(), &GridSpec::new(4)).unwrap();
        assert_eq!(g.vector(), Vector3::z());
        let c = field.index(field.width / 2, field.height / 2);
        // The grid has no sample at the exact center; the nearest is within half a stride.
        assert!((field.latitude[c] - std::f64::consts::FRAC_PI_2).abs() < 0.1);
    }

    #[test]
    fn level_pose_is_upright() {
        let cam = CameraIntrinsics::pinhole(64, 64, 30.0).unwrap();
        let (g, field) = gt_annotation(&cam, &camera_rotation(0.7, 0.0, 0.0), &GridSpec::new(4)).unwrap();
        assert!((g.vector() - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
        assert_eq!(field, render_fields(&cam, &g, &GridSpec::new(4)).unwrap());
    }
}
