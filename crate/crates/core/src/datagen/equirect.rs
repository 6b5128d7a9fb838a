//! Equirectangular panoramas and their reprojection into camera images.
//!
//! World up is `+Z`. Longitude `atan2(y, x)` runs over `[-pi, pi)` from the
//! left edge of the panorama; colatitude `acos(z)` runs over `[0, pi]` from
//! the top edge.

use std::f64::consts::PI;
use std::path::Path;

use image::{Rgb, RgbImage};
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::camera::{CameraIntrinsics, PixelPoint};

#[derive(Debug, Error)]
pub enum PanoramaError {
    #[error("panorama must be twice as wide as tall, got {width}x{height}")]
    AspectRatio { width: u32, height: u32 },
    #[error("cannot read panorama: {0}")]
    Image(#[from] image::ImageError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquirectImage {
    image: RgbImage,
}

impl EquirectImage {
    pub fn new(image: RgbImage) -> Result<Self, PanoramaError> {
        let (width, height) = image.dimensions();
        if height == 0 || width != 2 * height {
            return Err(PanoramaError::AspectRatio { width, height });
        }
        Ok(Self { image })
    }

    pub fn load(path: &Path) -> Result<Self, PanoramaError> {
        Self::new(image::open(path)?.to_rgb8())
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }

    /// Continuous pixel position of `(longitude, colatitude)`.
    pub fn pixel_of(&self, lon: f64, colat: f64) -> (f64, f64) {
        let u = (lon + PI) / (2.0 * PI) * self.width() as f64;
        let v = colat / PI * self.height() as f64;
        (u, v)
    }

    /// Bilinear lookup with longitude wraparound and clamped colatitude.
    pub fn sample(&self, lon: f64, colat: f64) -> [u8; 3] {
        let (w, h) = (self.width() as i64, self.height() as i64);
        let (u, v) = self.pixel_of(lon, colat);
        let x = u - 0.5;
        let y = (v - 0.5).clamp(0.0, (h - 1) as f64);
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (x0, y0) = (x0 as i64, y0 as i64);
        let y1 = (y0 + 1).min(h - 1);
        let px = |xx: i64, yy: i64| self.image.get_pixel(xx.rem_euclid(w) as u32, yy as u32).0;
        let (a, b, c, d) = (px(x0, y0), px(x0 + 1, y0), px(x0, y1), px(x0 + 1, y1));
        let mut out = [0u8; 3];
        for k in 0..3 {
            let top = a[k] as f64 * (1.0 - fx) + b[k] as f64 * fx;
            let bottom = c[k] as f64 * (1.0 - fx) + d[k] as f64 * fx;
            out[k] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
        }
        out
    }
}

/// `(longitude, colatitude)` of a world direction.
pub fn direction_to_lonlat(dir: &Vector3<f64>) -> (f64, f64) {
    let n = dir.normalize();
    let mut lon = n.y.atan2(n.x);
    if lon >= PI {
        lon -= 2.0 * PI;
    }
    (lon, n.z.clamp(-1.0, 1.0).acos())
}

pub fn lonlat_to_direction(lon: f64, colat: f64) -> Vector3<f64> {
    let (sl, cl) = lon.sin_cos();
    let (sc, cc) = colat.sin_cos();
    Vector3::new(sc * cl, sc * sl, cc)
}

/// World ray of pixel `p` for a world-to-camera rotation, or `None` outside
/// the camera's valid domain.
pub fn world_ray(cam: &CameraIntrinsics, world_to_camera: &Matrix3<f64>, p: &PixelPoint) -> Option<Vector3<f64>> {
    let ray = cam.unproject(p).ok()?;
    Some(world_to_camera.transpose() * ray)
}

/// Panorama coordinates sampled by every output pixel, row-major.
pub fn sample_coordinates(cam: &CameraIntrinsics, world_to_camera: &Matrix3<f64>) -> Vec<Option<(f64, f64)>> {
    let (w, h) = (cam.width(), cam.height());
    (0..h)
        .into_par_iter()
        .flat_map_iter(|row| {
            (0..w).map(move |col| {
                let p = PixelPoint::new(col as f64 + 0.5, row as f64 + 0.5);
                world_ray(cam, world_to_camera, &p).map(|d| direction_to_lonlat(&d))
            })
        })
        .collect()
}

/// A rendered view: invalid pixels are black and flagged `false`.
#[derive(Clone, Debug, PartialEq)]
pub struct Reprojection {
    pub image: RgbImage,
    pub valid: Vec<bool>,
}

pub fn reproject(pano: &EquirectImage, world_to_camera: &Matrix3<f64>, cam: &CameraIntrinsics) -> Reprojection {
    let coords = sample_coordinates(cam, world_to_camera);
    let colors: Vec<Option<[u8; 3]>> = coords
        .par_iter()
        .map(|c| c.map(|(lon, colat)| pano.sample(lon, colat)))
        .collect();
    let mut image = RgbImage::new(cam.width(), cam.height());
    let mut valid = vec![false; colors.len()];
    for (i, c) in colors.into_iter().enumerate() {
        if let Some(rgb) = c {
            let (x, y) = ((i % cam.width() as usize) as u32, (i / cam.width() as usize) as u32);
            image.put_pixel(x, y, Rgb(rgb));
            valid[i] = true;
        }
    }
    Reprojection { image, valid }
}
