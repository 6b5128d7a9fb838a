//! Synthetic data: camera sampling, panorama reprojection, trajectories and
//! field noise.

mod clip;
mod equirect;
mod noise;
mod sampler;
mod scene;
mod trajectory;
mod umeyama;

use thiserror::Error;

pub use clip::{
    generate_clip, gt_annotation, ClipSpec, DatasetManifest, FrameRecord, CAMERA_FILE, DEFAULT_FPS, DEFAULT_FRAMES,
    MANIFEST_FILE,
};
pub use equirect::{
    direction_to_lonlat, lonlat_to_direction, reproject, sample_coordinates, world_ray, EquirectImage, PanoramaError,
    Reprojection,
};
pub use noise::{add_field_noise, NoiseError, NoiseSpec};
pub use sampler::{
    sample_camera, sample_camera_of, sample_k1, sample_model, SampledCamera, UcmCategory, DEFAULT_SIZE, K1_LIMIT,
    K1_SIGMA, PERSPECTIVE_VFOV_DEG,
};
pub use scene::{camera_rotation, derive_seed, level_rotation, random_gravity};
pub use trajectory::{
    augment_rotations, augment_with_offsets, match_trajectories, synthetic_trajectory, Pose, RotationOffset, Trajectory,
    TrajectoryError, TrajectoryMatch,
};
pub use umeyama::{umeyama_align, AlignError, AlignMode, SimilarityTransform};

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error(transparent)]
    Io(#[from] crate::io::IoError),
    #[error("cannot write image: {0}")]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
    #[error(transparent)]
    Gravity(#[from] crate::gravity::GravityError),
    #[error("invalid clip settings: {0}")]
    Spec(String),
}
