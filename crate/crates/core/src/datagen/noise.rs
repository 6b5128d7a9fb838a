//! Synthetic perturbation of clean perspective fields.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Rotation2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::PerspectiveField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("noise levels must be finite and non-negative (up {up}, latitude {lat}, ramp {ramp})")]
    Invalid { up: f64, lat: f64, ramp: f64 },
}

/// Per-sample Gaussian noise levels in degrees.
///
/// With a non-zero `ramp` both levels are scaled per sample by
/// `1 + ramp * r^2`, where `r` is the distance to the image center divided
/// by the half diagonal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub up_sigma_deg: f64,
    pub lat_sigma_deg: f64,
    #[serde(default)]
    pub ramp: f64,
}

impl NoiseSpec {
    pub fn new(up_sigma_deg: f64, lat_sigma_deg: f64) -> Self {
        Self {
            up_sigma_deg,
            lat_sigma_deg,
            ramp: 0.0,
        }
    }

    pub fn with_ramp(mut self, ramp: f64) -> Self {
        self.ramp = ramp;
        self
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if ok(self.up_sigma_deg) && ok(self.lat_sigma_deg) && ok(self.ramp) {
            Ok(())
        } else {
            Err(NoiseError::Invalid {
                up: self.up_sigma_deg,
                lat: self.lat_sigma_deg,
                ramp: self.ramp,
            })
        }
    }

    pub fn is_zero(&self) -> bool {
        self.up_sigma_deg == 0.0 && self.lat_sigma_deg == 0.0
    }
}

/// Rotates each valid up vector in-plane and offsets each valid latitude by
/// Gaussian noise, then sets confidence to the inverse of the injected
/// variance `sigma_up^2 + sigma_lat^2` (rad^2). Zero noise leaves the field
/// unchanged with unit confidence. Random draws are made for every sample in
/// row-major order, valid or not.
pub fn add_field_noise<R: Rng + ?Sized>(
    field: &PerspectiveField,
    spec: &NoiseSpec,
    rng: &mut R,
) -> Result<PerspectiveField, NoiseError> {
    spec.validate()?;
    let mut out = field.clone();
    let n = field.len();
    if spec.is_zero() {
        out.confidence = Some(vec![1.0; n]);
        return Ok(out);
    }
    let center = Vector2::new(field.image_width as f64, field.image_height as f64) / 2.0;
    let half_diag = center.norm();
    let mut confidence = vec![0.0; n];
    for i in 0..n {
        let scale = if spec.ramp > 0.0 {
            let r = (field.sample_pixel(i) - center).norm() / half_diag;
            1.0 + spec.ramp * r * r
        } else {
            1.0
        };
        let su = (spec.up_sigma_deg * scale).to_radians();
        let sl = (spec.lat_sigma_deg * scale).to_radians();
        let zu: f64 = StandardNormal.sample(rng);
        let zl: f64 = StandardNormal.sample(rng);
        confidence[i] = 1.0 / (su * su + sl * sl);
        if field.valid[i] {
            out.up[i] = Rotation2::new(su * zu) * field.up[i];
            out.latitude[i] = (field.latitude[i] + sl * zl).clamp(-FRAC_PI_2, FRAC_PI_2);
        }
    }
    out.confidence = Some(confidence);
    Ok(out)
}
