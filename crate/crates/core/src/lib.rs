//! Camera calibration from dense perspective fields.
//!
//! The crate recovers camera intrinsics (focal length and one distortion
//! parameter) together with per-view gravity directions from up-vector and
//! latitude fields, and provides the supporting pieces: camera models, a
//! panorama-based synthetic data generator, evaluation metrics and file
//! codecs.

pub mod camera;
pub mod datagen;
pub mod field;
pub mod gravity;
pub mod io;
pub mod metrics;
pub mod solver;
pub mod study;

pub use camera::{CameraError, CameraIntrinsics, CameraModel, PixelPoint, Ray3};
pub use field::{
    field_jacobian, field_residual, latitude_at_pixel, render_fields, up_at_pixel, FieldError, GridSpec,
    PerspectiveField,
};
pub use gravity::{
    angles_from_gravity, gravity_angular_error, gravity_from_angles, gravity_from_world_pose, tangent_update,
    GravityError, GravityState,
};
pub use metrics::{auc_at, error_sample, pixel_projection_error, report, ErrorSample, MetricReport};
pub use solver::{
    coarse_search, diag_report, ranked_starts, confidence_objective, initialize, solve, solve_from, CalibrationEstimate, InitialGuess,
    IntrinsicsEstimate, SolveConfig, SolveError,
};
