//! Random camera intrinsics for synthetic data.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraError, CameraIntrinsics, CameraModel};

pub const DEFAULT_SIZE: u32 = 640;
pub const PERSPECTIVE_VFOV_DEG: (f64, f64) = (20.0, 105.0);
pub const K1_SIGMA: f64 = 0.2;
pub const K1_LIMIT: f64 = 0.6;

/// Field-of-view class of a sampled UCM camera.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UcmCategory {
    Wide,
    Fisheye,
    Extreme,
}

impl UcmCategory {
    pub const ALL: [UcmCategory; 3] = [UcmCategory::Wide, UcmCategory::Fisheye, UcmCategory::Extreme];

    /// Horizontal FoV range in degrees.
    pub fn hfov_range(self) -> (f64, f64) {
        match self {
            UcmCategory::Wide => (105.0, 140.0),
            UcmCategory::Fisheye => (140.0, 180.0),
            UcmCategory::Extreme => (160.0, 200.0),
        }
    }

    pub fn xi_range(self) -> (f64, f64) {
        match self {
            UcmCategory::Wide => (0.5, 0.95),
            UcmCategory::Fisheye => (1.05, 2.0),
            UcmCategory::Extreme => (1.5, 2.3),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledCamera {
    pub intrinsics: CameraIntrinsics,
    /// Horizontal FoV for UCM, vertical FoV otherwise (degrees).
    pub fov_deg: f64,
    pub category: Option<UcmCategory>,
}

/// Draws a model with probabilities 0.5 (UCM), 0.25 (pinhole), 0.25 (simple radial).
pub fn sample_model<R: Rng + ?Sized>(rng: &mut R) -> CameraModel {
    let u: f64 = rng.random();
    if u < 0.5 {
        CameraModel::Ucm
    } else if u < 0.75 {
        CameraModel::Pinhole
    } else {
        CameraModel::SimpleRadial
    }
}

/// Truncated normal `N(0, 0.2)` restricted to `[-0.6, 0.6]`, by rejection.
pub fn sample_k1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let normal = Normal::new(0.0, K1_SIGMA).expect("valid sigma");
    loop {
        let k = normal.sample(rng);
        if k.abs() <= K1_LIMIT {
            return k;
        }
    }
}

pub fn sample_camera<R: Rng + ?Sized>(rng: &mut R) -> SampledCamera {
    let model = sample_model(rng);
    sample_camera_of(rng, model, DEFAULT_SIZE, DEFAULT_SIZE)
}

/// Samples intrinsics of a fixed model on a `width x height` image.
///
/// A simple radial `(vfov, k1)` pair whose edge ray lies past the fold of the
/// distortion polynomial has no focal length; `k1` is redrawn in that case.
pub fn sample_camera_of<R: Rng + ?Sized>(rng: &mut R, model: CameraModel, width: u32, height: u32) -> SampledCamera {
    match model {
        CameraModel::Ucm => {
            let category = UcmCategory::ALL[rng.random_range(0..3)];
            let (lo, hi) = category.hfov_range();
            let (xlo, xhi) = category.xi_range();
            loop {
                let fov = rng.random_range(lo..hi);
                let xi = rng.random_range(xlo..xhi);
                if let Ok(cam) = CameraIntrinsics::from_hfov(model, width, height, fov, xi) {
                    return SampledCamera {
                        intrinsics: cam,
                        fov_deg: fov,
                        category: Some(category),
                    };
                }
            }
        }
        CameraModel::Pinhole | CameraModel::SimpleRadial => {
            let (lo, hi) = PERSPECTIVE_VFOV_DEG;
            let fov = rng.random_range(lo..hi);
            loop {
                let k1 = if model == CameraModel::SimpleRadial { sample_k1(rng) } else { 0.0 };
                match CameraIntrinsics::from_vfov(model, width, height, fov, k1) {
                    Ok(cam) => {
                        return SampledCamera {
                            intrinsics: cam,
                            fov_deg: fov,
                            category: None,
                        }
                    }
                    Err(CameraError::NoFocalRoot { .. }) => continue,
                    Err(e) => panic!("sampled FoV {fov} outside the model range: {e}"),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ranges_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let s = sample_camera(&mut rng);
            let cam = s.intrinsics;
            match s.category {
                Some(c) => {
                    let (lo, hi) = c.hfov_range();
                    assert!(s.fov_deg >= lo && s.fov_deg <= hi);
                    let (xlo, xhi) = c.xi_range();
                    assert!((xlo..=xhi).contains(&cam.distortion()));
                    assert!((cam.hfov().unwrap() - s.fov_deg).abs() < 1e-6);
                }
                None => {
                    assert!((20.0..=105.0).contains(&s.fov_deg));
                    assert!(cam.distortion().abs() <= K1_LIMIT);
                    assert!((cam.vfov().unwrap() - s.fov_deg).abs() < 1e-6);
                }
            }
        }
    }
}
