//! Gravity direction in the camera frame.
//!
//! Gravity is stored as the unit zenith direction `g` expressed in camera
//! coordinates. Roll `phi` and pitch `theta` relate to it through
//! `g = [sin(phi) cos(theta), -sin(theta), cos(phi) cos(theta)]`.
//! Note that under this convention a level camera looking at the horizon
//! (camera `+y` pointing down) has `g = (0, -1, 0)`, i.e. pitch `+pi/2`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Unit, Vector2, Vector3};
use thiserror::Error;

const UNIT_TOLERANCE: f64 = 1e-6;
const ORTHONORMAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GravityError {
    #[error("roll {roll} rad / pitch {pitch} rad outside (-pi, pi] x [-pi/2, pi/2]")]
    AngleRange { roll: f64, pitch: f64 },
    #[error("gravity vector is not unit length (norm {0})")]
    NotUnit(f64),
    #[error("rotation is not orthonormal (|R^T R - I| = {0})")]
    NotOrthonormal(f64),
}

/// Unit zenith direction in the camera frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GravityState(Unit<Vector3<f64>>);

impl GravityState {
    /// Normalizes `v`; fails for zero or non-finite input.
    pub fn new(v: Vector3<f64>) -> Result<Self, GravityError> {
        let n = v.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(GravityError::NotUnit(n));
        }
        Ok(Self(Unit::new_unchecked(v / n)))
    }

    /// Wraps a vector that must be unit within [`UNIT_TOLERANCE`].
    pub fn from_unit(v: Vector3<f64>) -> Result<Self, GravityError> {
        let n = v.norm();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(GravityError::NotUnit(n));
        }
        Ok(Self(Unit::new_unchecked(v / n)))
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.0.into_inner()
    }

    /// `(roll, pitch)` in radians.
    pub fn angles(&self) -> (f64, f64) {
        angles_from_unit(&self.0)
    }

    pub fn roll(&self) -> f64 {
        self.angles().0
    }

    pub fn pitch(&self) -> f64 {
        self.angles().1
    }
}

pub fn gravity_from_angles(roll: f64, pitch: f64) -> Result<GravityState, GravityError> {
    if !(roll > -PI && roll <= PI && (-FRAC_PI_2..=FRAC_PI_2).contains(&pitch)) {
        return Err(GravityError::AngleRange { roll, pitch });
    }
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    Ok(GravityState(Unit::new_unchecked(Vector3::new(sr * cp, -sp, cr * cp))))
}

/// Inverse of [`gravity_from_angles`]. Roll is pinned to zero when
/// `cos(pitch)` vanishes.
pub fn angles_from_gravity(g: &Vector3<f64>) -> Result<(f64, f64), GravityError> {
    let n = g.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(GravityError::NotUnit(n));
    }
    Ok(angles_from_unit(g))
}

fn angles_from_unit(g: &Vector3<f64>) -> (f64, f64) {
    let pitch = -g.y.clamp(-1.0, 1.0).asin();
    let roll = if g.x.hypot(g.z) < 1e-12 { 0.0 } else { g.x.atan2(g.z) };
    (roll, pitch)
}

/// Zenith in the camera frame for a world-to-camera rotation.
pub fn gravity_from_world_pose(
    world_to_camera: &Matrix3<f64>,
    world_up: &Vector3<f64>,
) -> Result<GravityState, GravityError> {
    let dev = (world_to_camera.transpose() * world_to_camera - Matrix3::identity()).norm();
    if !(dev < ORTHONORMAL_TOLERANCE) {
        return Err(GravityError::NotOrthonormal(dev));
    }
    GravityState::new(world_to_camera * world_up)
}

/// Deterministic orthonormal basis of the tangent plane at `g`.
pub fn tangent_basis(g: &GravityState) -> (Vector3<f64>, Vector3<f64>) {
    let g = g.vector();
    let e = if g.y.abs() > 0.999 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let b1 = e.cross(&g).normalize();
    let b2 = g.cross(&b1);
    (b1, b2)
}

/// First-order retraction on the unit sphere: `normalize(g + d1 b1 + d2 b2)`.
pub fn tangent_update(g: &GravityState, delta: &Vector2<f64>) -> GravityState {
    if delta.x == 0.0 && delta.y == 0.0 {
        return *g;
    }
    let (b1, b2) = tangent_basis(g);
    let v = g.vector() + b1 * delta.x + b2 * delta.y;
    GravityState(Unit::new_normalize(v))
}

/// Angle between two gravity directions, in degrees.
pub fn gravity_angular_error(pred: &GravityState, gt: &GravityState) -> f64 {
    pred.vector().dot(&gt.vector()).clamp(-1.0, 1.0).acos().to_degrees()
}
