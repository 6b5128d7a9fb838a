//! Camera orientations, random gravities and seed derivation.

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::Rng;

use crate::gravity::{gravity_from_world_pose, GravityState};

/// World-to-camera rotation of a level camera looking along world `+X`
/// (camera `+x` = world `-Y`, camera `+y` = world `-Z`).
pub fn level_rotation() -> Matrix3<f64> {
    Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0)
}

/// World-to-camera rotation after turning a level camera by `yaw` about world
/// `+Z`, then tilting by `pitch` about its own `x` axis and rolling by `roll`
/// about its optical axis (radians).
pub fn camera_rotation(yaw: f64, pitch: f64, roll: f64) -> Matrix3<f64> {
    let r_yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw);
    let r_pitch = Rotation3::from_axis_angle(&Vector3::x_axis(), pitch);
    let r_roll = Rotation3::from_axis_angle(&Vector3::z_axis(), roll);
    r_roll.matrix() * r_pitch.matrix() * level_rotation() * r_yaw.matrix().transpose()
}

/// Gravity of a level camera tilted by pitch and roll offsets drawn
/// uniformly from `[-max_tilt, max_tilt]` radians.
pub fn random_gravity<R: Rng + ?Sized>(rng: &mut R, max_tilt: f64) -> GravityState {
    let pitch = rng.random_range(-max_tilt..=max_tilt);
    let roll = rng.random_range(-max_tilt..=max_tilt);
    gravity_from_world_pose(&camera_rotation(0.0, pitch, roll), &Vector3::z()).expect("rotation is orthonormal")
}

/// Mixes `parts` into `seed` (splitmix64 finalizer per part).
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut x = seed;
    for &p in parts {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p);
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 31;
    }
    x
}
