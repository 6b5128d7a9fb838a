//! Camera models used throughout the toolkit.
//!
//! Three projection models share a single intrinsics record: the ideal
//! pinhole, a one-coefficient radial model and the unified camera model
//! (UCM, a sphere-then-plane projection). The principal point is always the
//! image center, so a camera is fully described by its model tag, image size,
//! focal length and a single distortion scalar.
//!
//! Pixel coordinates are continuous with the origin at the top-left corner,
//! `+u` right and `+v` down; pixel centers sit at half-integers. Camera rays
//! use `+z` forward, `+x` right and `+y` down.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2x3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A pixel position `(u, v)`.
pub type PixelPoint = Vector2<f64>;
/// A direction (or a point, when scaled by depth) in the camera frame.
pub type Ray3 = Vector3<f64>;

const RADIAL_NEWTON_MAX_ITERS: usize = 20;
const RADIAL_NEWTON_TOL: f64 = 1e-12;
const FOCAL_BISECTION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("image size {width}x{height} is too small (need at least 2x2)")]
    ImageSize { width: u32, height: u32 },
    #[error("focal length must be positive and finite, got {0}")]
    Focal(f64),
    #[error("{model} distortion {value} outside [{min}, {max}]")]
    Distortion {
        model: CameraModel,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("{model} field of view {fov_deg} deg outside the open range ({min}, {max})")]
    FovRange {
        model: CameraModel,
        fov_deg: f64,
        min: f64,
        max: f64,
    },
    #[error("no focal length gives a {fov_deg} deg field of view for {model} with distortion {distortion}")]
    NoFocalRoot {
        model: CameraModel,
        fov_deg: f64,
        distortion: f64,
    },
    #[error("pixel ({u}, {v}) is outside the invertible domain")]
    NotInvertible { u: f64, v: f64 },
    #[error("radial distortion inversion did not converge at pixel ({u}, {v})")]
    NoConvergence { u: f64, v: f64 },
    #[error("point ({x}, {y}, {z}) is not projectable")]
    NotProjectable { x: f64, y: f64, z: f64 },
    #[error("unknown camera model '{0}'")]
    UnknownModel(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraModel {
    Pinhole,
    SimpleRadial,
    Ucm,
}

impl CameraModel {
    pub const ALL: [CameraModel; 3] = [CameraModel::Pinhole, CameraModel::SimpleRadial, CameraModel::Ucm];

    pub fn name(self) -> &'static str {
        match self {
            CameraModel::Pinhole => "pinhole",
            CameraModel::SimpleRadial => "simple_radial",
            CameraModel::Ucm => "ucm",
        }
    }

    /// Whether the model carries a free distortion parameter.
    pub fn has_distortion(self) -> bool {
        !matches!(self, CameraModel::Pinhole)
    }

    /// Admissible distortion interval (`k1` for simple radial, `xi` for UCM).
    pub fn distortion_bounds(self) -> (f64, f64) {
        match self {
            CameraModel::Pinhole => (0.0, 0.0),
            CameraModel::SimpleRadial => (-0.7, 0.7),
            CameraModel::Ucm => (0.0, 3.0),
        }
    }

    /// Largest field of view (degrees) accepted by the FoV constructors.
    pub fn max_fov_deg(self) -> f64 {
        match self {
            CameraModel::Ucm => 200.0,
            _ => 180.0,
        }
    }
}

impl fmt::Display for CameraModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CameraModel {
    type Err = CameraError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pinhole" => Ok(CameraModel::Pinhole),
            "simple_radial" | "radial" => Ok(CameraModel::SimpleRadial),
            "ucm" => Ok(CameraModel::Ucm),
            _ => Err(CameraError::UnknownModel(s.to_string())),
        }
    }
}

/// Intrinsics of a centered camera.
///
/// `distortion` is `k1` for [`CameraModel::SimpleRadial`], `xi` for
/// [`CameraModel::Ucm`] and always `0.0` for [`CameraModel::Pinhole`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsics {
    model: CameraModel,
    width: u32,
    height: u32,
    f: f64,
    cx: f64,
    cy: f64,
    distortion: f64,
}

impl CameraIntrinsics {
    pub fn new(
        model: CameraModel,
        width: u32,
        height: u32,
        f: f64,
        distortion: f64,
    ) -> Result<Self, CameraError> {
        if width < 2 || height < 2 {
            return Err(CameraError::ImageSize { width, height });
        }
        if !(f.is_finite() && f > 0.0) {
            return Err(CameraError::Focal(f));
        }
        let distortion = if model.has_distortion() { distortion } else { 0.0 };
        let (min, max) = model.distortion_bounds();
        if !(distortion.is_finite() && distortion >= min && distortion <= max) {
            return Err(CameraError::Distortion {
                model,
                value: distortion,
                min,
                max,
            });
        }
        Ok(Self::new_unchecked(model, width, height, f, distortion))
    }

    pub fn pinhole(width: u32, height: u32, f: f64) -> Result<Self, CameraError> {
        Self::new(CameraModel::Pinhole, width, height, f, 0.0)
    }

    /// Builds intrinsics without range checks. Finite-difference probes step
    /// the distortion slightly outside its admissible interval.
    pub(crate) fn new_unchecked(model: CameraModel, width: u32, height: u32, f: f64, distortion: f64) -> Self {
        Self {
            model,
            width,
            height,
            f,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            distortion: if model.has_distortion() { distortion } else { 0.0 },
        }
    }

    /// Same image and model with a different focal length and distortion, unchecked.
    pub(crate) fn with_params(&self, f: f64, distortion: f64) -> Self {
        Self::new_unchecked(self.model, self.width, self.height, f, distortion)
    }

    /// Focal length that gives the requested vertical field of view.
    ///
    /// Pinhole uses the closed form; the distorted models bisect on the focal
    /// length until the ray through the bottom-center edge pixel makes half the
    /// requested angle with the optical axis.
    pub fn from_vfov(
        model: CameraModel,
        width: u32,
        height: u32,
        vfov_deg: f64,
        distortion: f64,
    ) -> Result<Self, CameraError> {
        Self::from_fov(model, width, height, vfov_deg, distortion, FovAxis::Vertical)
    }

    /// Horizontal counterpart of [`CameraIntrinsics::from_vfov`].
    pub fn from_hfov(
        model: CameraModel,
        width: u32,
        height: u32,
        hfov_deg: f64,
        distortion: f64,
    ) -> Result<Self, CameraError> {
        Self::from_fov(model, width, height, hfov_deg, distortion, FovAxis::Horizontal)
    }

    fn from_fov(
        model: CameraModel,
        width: u32,
        height: u32,
        fov_deg: f64,
        distortion: f64,
        axis: FovAxis,
    ) -> Result<Self, CameraError> {
        let max = model.max_fov_deg();
        if !(fov_deg > 1.0 && fov_deg < max) || (model != CameraModel::Ucm && fov_deg >= 180.0) {
            return Err(CameraError::FovRange {
                model,
                fov_deg,
                min: 1.0,
                max,
            });
        }
        // Validate everything except the focal length up front.
        Self::new(model, width, height, 1.0, distortion)?;
        let half_extent = match axis {
            FovAxis::Vertical => height as f64 / 2.0,
            FovAxis::Horizontal => width as f64 / 2.0,
        };
        let half_angle = fov_deg.to_radians() / 2.0;
        if model == CameraModel::Pinhole {
            return Self::new(model, width, height, half_extent / half_angle.tan(), 0.0);
        }

        let probe = |log_f: f64| -> f64 {
            let cam = Self::new_unchecked(model, width, height, log_f.exp(), distortion);
            match cam.unproject(&cam.edge_pixel(axis)) {
                Ok(ray) => ray_angle_from_axis(&ray),
                // Past the invertible domain the edge pixel is "too wide".
                Err(_) => f64::INFINITY,
            }
        };

        // The edge angle decreases monotonically with the focal length.
        let mut lo = (half_extent * 1e-4).ln();
        let mut hi = (half_extent * 1e4).ln();
        if probe(lo) <= half_angle || probe(hi) >= half_angle {
            return Err(CameraError::NoFocalRoot {
                model,
                fov_deg,
                distortion,
            });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let angle = probe(mid);
            if angle > half_angle {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        let log_f = 0.5 * (lo + hi);
        let reached = probe(log_f);
        if !reached.is_finite() || (reached - half_angle).abs() > FOCAL_BISECTION_TOL.max(1e-10) {
            return Err(CameraError::NoFocalRoot {
                model,
                fov_deg,
                distortion,
            });
        }
        Self::new(model, width, height, log_f.exp(), distortion)
    }

    fn edge_pixel(&self, axis: FovAxis) -> PixelPoint {
        match axis {
            FovAxis::Vertical => PixelPoint::new(self.cx, self.height as f64),
            FovAxis::Horizontal => PixelPoint::new(self.width as f64, self.cy),
        }
    }

    pub fn model(&self) -> CameraModel {
        self.model
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn focal(&self) -> f64 {
        self.f
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }

    pub fn principal_point(&self) -> PixelPoint {
        PixelPoint::new(self.cx, self.cy)
    }

    pub fn distortion(&self) -> f64 {
        self.distortion
    }

    /// `k1` if this is a simple radial camera.
    pub fn k1(&self) -> Option<f64> {
        (self.model == CameraModel::SimpleRadial).then_some(self.distortion)
    }

    /// `xi` if this is a UCM camera.
    pub fn xi(&self) -> Option<f64> {
        (self.model == CameraModel::Ucm).then_some(self.distortion)
    }

    /// Vertical field of view in degrees: the sum of the angles that the rays
    /// through the top-center and bottom-center edge pixels make with the
    /// optical axis. Summing per-side angles keeps fields of view above 180°
    /// (UCM) well defined.
    pub fn vfov(&self) -> Result<f64, CameraError> {
        let top = self.unproject(&PixelPoint::new(self.cx, 0.0))?;
        let bottom = self.unproject(&PixelPoint::new(self.cx, self.height as f64))?;
        Ok((ray_angle_from_axis(&top) + ray_angle_from_axis(&bottom)).to_degrees())
    }

    pub fn hfov(&self) -> Result<f64, CameraError> {
        let left = self.unproject(&PixelPoint::new(0.0, self.cy))?;
        let right = self.unproject(&PixelPoint::new(self.width as f64, self.cy))?;
        Ok((ray_angle_from_axis(&left) + ray_angle_from_axis(&right)).to_degrees())
    }

    /// Projects a camera-frame point, or `None` if it is behind the camera
    /// (or on the invalid side of the UCM sphere).
    pub fn project(&self, point: &Ray3) -> Option<PixelPoint> {
        let (x, y, z) = (point.x, point.y, point.z);
        let m = match self.model {
            CameraModel::Pinhole => {
                if !(z > 0.0) {
                    return None;
                }
                Vector2::new(x / z, y / z)
            }
            CameraModel::SimpleRadial => {
                if !(z > 0.0) {
                    return None;
                }
                let (mx, my) = (x / z, y / z);
                let scale = 1.0 + self.distortion * (mx * mx + my * my);
                Vector2::new(mx * scale, my * scale)
            }
            CameraModel::Ucm => {
                let denom = self.distortion * point.norm() + z;
                if !(denom > 0.0) {
                    return None;
                }
                Vector2::new(x / denom, y / denom)
            }
        };
        let p = PixelPoint::new(self.f * m.x + self.cx, self.f * m.y + self.cy);
        (p.x.is_finite() && p.y.is_finite()).then_some(p)
    }

    /// Unit viewing ray through a pixel.
    pub fn unproject(&self, pixel: &PixelPoint) -> Result<Ray3, CameraError> {
        self.unproject_impl(pixel, false)
    }

    /// Like [`CameraIntrinsics::unproject`], but UCM pixels outside the image
    /// circle map to the continuation of the closed form with the
    /// discriminant clamped at zero. The result is continuous across the
    /// circle, which keeps the calibration cost continuous while the circle
    /// moves.
    pub(crate) fn unproject_extended(&self, pixel: &PixelPoint) -> Result<Ray3, CameraError> {
        self.unproject_impl(pixel, true)
    }

    fn unproject_impl(&self, pixel: &PixelPoint, extended: bool) -> Result<Ray3, CameraError> {
        let mx = (pixel.x - self.cx) / self.f;
        let my = (pixel.y - self.cy) / self.f;
        let ray = match self.model {
            CameraModel::Pinhole => Vector3::new(mx, my, 1.0),
            CameraModel::SimpleRadial => {
                let rd = mx.hypot(my);
                if rd == 0.0 {
                    Vector3::new(0.0, 0.0, 1.0)
                } else {
                    let r = undistort_radius(rd, self.distortion).map_err(|e| match e {
                        RadialError::OutOfDomain => CameraError::NotInvertible { u: pixel.x, v: pixel.y },
                        RadialError::NoConvergence => CameraError::NoConvergence { u: pixel.x, v: pixel.y },
                    })?;
                    let s = r / rd;
                    Vector3::new(mx * s, my * s, 1.0)
                }
            }
            CameraModel::Ucm => {
                let xi = self.distortion;
                let r2 = mx * mx + my * my;
                let mut disc = 1.0 + (1.0 - xi * xi) * r2;
                if disc < 0.0 {
                    if !extended {
                        return Err(CameraError::NotInvertible { u: pixel.x, v: pixel.y });
                    }
                    disc = 0.0;
                }
                let factor = (xi + disc.sqrt()) / (1.0 + r2);
                Vector3::new(factor * mx, factor * my, factor - xi)
            }
        };
        let norm = ray.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(CameraError::NotInvertible { u: pixel.x, v: pixel.y });
        }
        Ok(ray / norm)
    }

    /// Analytic Jacobian of [`CameraIntrinsics::project`] with respect to the
    /// camera-frame point.
    pub fn projection_jacobian(&self, point: &Ray3) -> Result<Matrix2x3<f64>, CameraError> {
        let (x, y, z) = (point.x, point.y, point.z);
        let not_projectable = CameraError::NotProjectable { x, y, z };
        let f = self.f;
        match self.model {
            CameraModel::Pinhole => {
                if !(z > 0.0) {
                    return Err(not_projectable);
                }
                let s = f / z;
                Ok(Matrix2x3::new(s, 0.0, -s * x / z, 0.0, s, -s * y / z))
            }
            CameraModel::SimpleRadial => {
                if !(z > 0.0) {
                    return Err(not_projectable);
                }
                let k = self.distortion;
                let (mx, my) = (x / z, y / z);
                let r2 = mx * mx + my * my;
                let radial = 1.0 + k * r2;
                // d(distorted)/d(normalized)
                let a = f * (radial + 2.0 * k * mx * mx);
                let b = f * 2.0 * k * mx * my;
                let d = f * (radial + 2.0 * k * my * my);
                // d(normalized)/d(point)
                let iz = 1.0 / z;
                let dm = Matrix2x3::new(iz, 0.0, -mx * iz, 0.0, iz, -my * iz);
                let dd = nalgebra::Matrix2::new(a, b, b, d);
                Ok(dd * dm)
            }
            CameraModel::Ucm => {
                let xi = self.distortion;
                let n = point.norm();
                let denom = xi * n + z;
                if !(denom > 0.0) || n == 0.0 {
                    return Err(not_projectable);
                }
                let d2 = denom * denom;
                // d(denom)/d(point)
                let gx = xi * x / n;
                let gy = xi * y / n;
                let gz = xi * z / n + 1.0;
                Ok(Matrix2x3::new(
                    f * (1.0 / denom - x * gx / d2),
                    -f * x * gy / d2,
                    -f * x * gz / d2,
                    -f * y * gx / d2,
                    f * (1.0 / denom - y * gy / d2),
                    -f * y * gz / d2,
                ))
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum FovAxis {
    Vertical,
    Horizontal,
}

/// Angle between a ray and the optical axis, in `[0, pi]`.
pub fn ray_angle_from_axis(ray: &Ray3) -> f64 {
    ray.x.hypot(ray.y).atan2(ray.z)
}

enum RadialError {
    OutOfDomain,
    NoConvergence,
}

/// Solves `r (1 + k r^2) = rd` for the undistorted radius on the monotone
/// branch of the distortion polynomial.
fn undistort_radius(rd: f64, k: f64) -> Result<f64, RadialError> {
    if k < 0.0 {
        // r + k r^3 peaks at r = 1/sqrt(-3k).
        let r_fold = 1.0 / (-3.0 * k).sqrt();
        if rd >= r_fold * (1.0 + k * r_fold * r_fold) {
            return Err(RadialError::OutOfDomain);
        }
    }
    let mut r = rd;
    for _ in 0..RADIAL_NEWTON_MAX_ITERS {
        let g = r * (1.0 + k * r * r) - rd;
        let dg = 1.0 + 3.0 * k * r * r;
        if dg <= 0.0 {
            return Err(RadialError::OutOfDomain);
        }
        let step = g / dg;
        r -= step;
        if step.abs() <= RADIAL_NEWTON_TOL * r.abs().max(1.0) {
            return Ok(r);
        }
    }
    Err(RadialError::NoConvergence)
}
