//! Perspective fields: dense up-vector and latitude maps induced by a camera
//! and a gravity direction.
//!
//! For a pixel `p` with viewing ray `v` (unit, so the projection Jacobian is
//! evaluated on the unit sphere) the up vector is `J(v) g / |J(v) g|` and the
//! latitude is `asin(v . g)`. Fields are evaluated on a strided sample grid
//! rather than at every pixel.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, Matrix2x3, Matrix3x4, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraIntrinsics, PixelPoint, Ray3};
use crate::gravity::{tangent_basis, GravityState};

/// Number of residual components per sample: `(u_x, u_y, latitude)`.
pub const RESIDUAL_DIM: usize = 3;
/// Columns of [`field_jacobian`]: `(log f, distortion, delta_1, delta_2)`.
pub const JACOBIAN_COLS: usize = 4;

/// Up vectors whose unnormalized projection is shorter than this are masked.
const DEGENERATE_UP_NORM: f64 = 1e-12;

/// Central-difference steps for the intrinsic columns.
pub const LOG_FOCAL_STEP: f64 = 1e-5;
pub const DISTORTION_STEP: f64 = 1e-5;

/// Residual assigned to observed samples that the candidate camera cannot
/// evaluate (e.g. beyond the UCM image circle). Its squared norm exceeds any
/// attainable field residual, so moving samples out of the model's domain
/// never lowers the cost.
pub const MODEL_INVALID_RESIDUAL: [f64; 3] = [std::f64::consts::SQRT_2, std::f64::consts::SQRT_2, PI];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("grid stride {stride} gives {cols}x{rows} samples on a {width}x{height} image (need at least 4 per axis)")]
    GridTooSmall {
        stride: u32,
        cols: u32,
        rows: u32,
        width: u32,
        height: u32,
    },
    #[error("field sampling does not match the camera/grid ({0})")]
    GridMismatch(String),
    #[error("malformed field: {0}")]
    Malformed(String),
}

/// Placement of field samples on the image: sample `(col, row)` sits at
/// pixel `(offset + col * stride, offset + row * stride)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub stride: u32,
    pub offset: f64,
}

impl GridSpec {
    pub const MAX_SAMPLES_PER_AXIS: u32 = 64;

    /// Grid with samples at the centers of `stride x stride` blocks.
    pub fn new(stride: u32) -> Self {
        let stride = stride.max(1);
        Self {
            stride,
            offset: stride as f64 / 2.0,
        }
    }

    /// Smallest block-centered stride that keeps the grid within 64x64.
    pub fn for_image(width: u32, height: u32) -> Self {
        let longest = width.max(height);
        Self::new(longest.div_ceil(Self::MAX_SAMPLES_PER_AXIS).max(1))
    }

    /// `(cols, rows)` for an image.
    pub fn dims(&self, width: u32, height: u32) -> (u32, u32) {
        (width / self.stride, height / self.stride)
    }

    pub fn validate(&self, width: u32, height: u32) -> Result<(), FieldError> {
        let (cols, rows) = self.dims(width, height);
        if self.stride == 0 || cols < 4 || rows < 4 || !self.offset.is_finite() {
            return Err(FieldError::GridTooSmall {
                stride: self.stride,
                cols,
                rows,
                width,
                height,
            });
        }
        Ok(())
    }

    pub fn pixel(&self, col: u32, row: u32) -> PixelPoint {
        let s = self.stride as f64;
        PixelPoint::new(self.offset + col as f64 * s, self.offset + row as f64 * s)
    }
}

/// Dense up-vector and latitude maps over a sample grid.
///
/// Samples are stored row-major. Invalid samples hold zeros in the up and
/// latitude planes.
#[derive(Clone, Debug, PartialEq)]
pub struct PerspectiveField {
    pub image_width: u32,
    pub image_height: u32,
    pub grid: GridSpec,
    pub width: u32,
    pub height: u32,
    pub up: Vec<Vector2<f64>>,
    pub latitude: Vec<f64>,
    pub confidence: Option<Vec<f64>>,
    pub valid: Vec<bool>,
}

impl PerspectiveField {
    /// An all-invalid field for the given image and grid.
    pub fn empty(image_width: u32, image_height: u32, grid: GridSpec) -> Self {
        let (width, height) = grid.dims(image_width, image_height);
        let n = (width * height) as usize;
        Self {
            image_width,
            image_height,
            grid,
            width,
            height,
            up: vec![Vector2::zeros(); n],
            latitude: vec![0.0; n],
            confidence: None,
            valid: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }

    pub fn index(&self, col: u32, row: u32) -> usize {
        (row * self.width + col) as usize
    }

    /// Pixel position of sample `i`.
    pub fn sample_pixel(&self, i: usize) -> PixelPoint {
        let col = (i % self.width as usize) as u32;
        let row = (i / self.width as usize) as u32;
        self.grid.pixel(col, row)
    }

    /// Confidence of sample `i` (1 when the field carries none).
    pub fn weight(&self, i: usize) -> f64 {
        self.confidence.as_ref().map_or(1.0, |c| c[i])
    }

    /// Valid and carrying positive weight.
    pub fn is_usable(&self, i: usize) -> bool {
        self.valid[i] && self.weight(i) > 0.0
    }

    pub fn usable_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_usable(i)).count()
    }

    /// Same sampling geometry as `other`.
    pub fn same_sampling(&self, other: &PerspectiveField) -> bool {
        self.image_width == other.image_width
            && self.image_height == other.image_height
            && self.grid == other.grid
            && self.width == other.width
            && self.height == other.height
    }

    /// Checks the structural and value invariants.
    pub fn validate(&self) -> Result<(), FieldError> {
        let n = (self.width * self.height) as usize;
        if self.grid.dims(self.image_width, self.image_height) != (self.width, self.height) {
            return Err(FieldError::Malformed(format!(
                "{}x{} samples do not match stride {} on {}x{}",
                self.width, self.height, self.grid.stride, self.image_width, self.image_height
            )));
        }
        if self.up.len() != n || self.latitude.len() != n || self.valid.len() != n {
            return Err(FieldError::Malformed("plane length mismatch".into()));
        }
        if let Some(c) = &self.confidence {
            if c.len() != n {
                return Err(FieldError::Malformed("confidence length mismatch".into()));
            }
            if let Some(bad) = c.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
                return Err(FieldError::Malformed(format!("confidence {bad} is not a non-negative number")));
            }
        }
        for i in 0..n {
            if !self.valid[i] {
                continue;
            }
            if (self.up[i].norm() - 1.0).abs() > 1e-6 {
                return Err(FieldError::Malformed(format!("up vector {i} is not unit")));
            }
            if !(self.latitude[i].abs() <= FRAC_PI_2) {
                return Err(FieldError::Malformed(format!("latitude {i} outside [-pi/2, pi/2]")));
            }
        }
        Ok(())
    }
}

/// Per-sample model evaluation with the pieces the analytic gravity
/// derivative needs.
struct ModelSample {
    ray: Ray3,
    jacobian: Matrix2x3<f64>,
    jg: Vector2<f64>,
    up: Vector2<f64>,
    latitude: f64,
}

/// Which unprojection a model evaluation uses: the strict one for rendering,
/// or the extended one (see [`CameraIntrinsics::unproject_extended`]) for the
/// calibration residual.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Domain {
    Strict,
    Extended,
}

fn evaluate(cam: &CameraIntrinsics, g: &Vector3<f64>, pixel: &PixelPoint, domain: Domain) -> Option<ModelSample> {
    let ray = match domain {
        Domain::Strict => cam.unproject(pixel),
        Domain::Extended => cam.unproject_extended(pixel),
    }
    .ok()?;
    let jacobian = cam.projection_jacobian(&ray).ok()?;
    let jg = jacobian * g;
    let n = jg.norm();
    if !(n > DEGENERATE_UP_NORM) {
        return None;
    }
    let latitude = ray.dot(g).clamp(-1.0, 1.0).asin();
    Some(ModelSample {
        ray,
        jacobian,
        jg,
        up: jg / n,
        latitude,
    })
}

fn model_vector(cam: &CameraIntrinsics, g: &Vector3<f64>, pixel: &PixelPoint) -> Option<Vector3<f64>> {
    evaluate(cam, g, pixel, Domain::Extended).map(|s| Vector3::new(s.up.x, s.up.y, s.latitude))
}

/// Latitude of the ray through `pixel`, or `None` if it cannot be unprojected.
pub fn latitude_at_pixel(cam: &CameraIntrinsics, g: &GravityState, pixel: &PixelPoint) -> Option<f64> {
    let ray = cam.unproject(pixel).ok()?;
    Some(ray.dot(&g.vector()).clamp(-1.0, 1.0).asin())
}

/// Unit image-plane direction towards the projected zenith, or `None` where
/// it is undefined.
pub fn up_at_pixel(cam: &CameraIntrinsics, g: &GravityState, pixel: &PixelPoint) -> Option<Vector2<f64>> {
    evaluate(cam, &g.vector(), pixel, Domain::Strict).map(|s| s.up)
}

pub fn render_fields(
    cam: &CameraIntrinsics,
    g: &GravityState,
    grid: &GridSpec,
) -> Result<PerspectiveField, FieldError> {
    grid.validate(cam.width(), cam.height())?;
    let mut field = PerspectiveField::empty(cam.width(), cam.height(), *grid);
    let gv = g.vector();
    let width = field.width as usize;
    let rows: Vec<Vec<Option<(Vector2<f64>, f64)>>> = (0..field.height)
        .into_par_iter()
        .map(|row| {
            (0..field.width)
                .map(|col| evaluate(cam, &gv, &grid.pixel(col, row), Domain::Strict).map(|s| (s.up, s.latitude)))
                .collect()
        })
        .collect();
    for (row, samples) in rows.into_iter().enumerate() {
        for (col, sample) in samples.into_iter().enumerate() {
            if let Some((up, lat)) = sample {
                let i = row * width + col;
                field.up[i] = up;
                field.latitude[i] = lat;
                field.valid[i] = true;
            }
        }
    }
    Ok(field)
}

/// Stacked residuals `observed - model` over the observed-valid samples.
///
/// `values` and `weights` hold three entries per sample in row-major sample
/// order, `(u_x, u_y, latitude)` innermost; `samples` lists the field index of
/// each block. Model values past a UCM image circle come from the extended
/// unprojection; samples the model still cannot evaluate get
/// [`MODEL_INVALID_RESIDUAL`].
#[derive(Clone, Debug, PartialEq)]
pub struct FieldResidual {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub samples: Vec<usize>,
}

impl FieldResidual {
    pub fn weighted_cost(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(r, w)| w * r * r).sum()
    }
}

fn check_sampling(observed: &PerspectiveField, cam: &CameraIntrinsics) -> Result<(), FieldError> {
    if observed.image_width != cam.width() || observed.image_height != cam.height() {
        return Err(FieldError::GridMismatch(format!(
            "field sampled on {}x{}, camera is {}x{}",
            observed.image_width,
            observed.image_height,
            cam.width(),
            cam.height()
        )));
    }
    if observed.grid.dims(cam.width(), cam.height()) != (observed.width, observed.height)
        || observed.len() != (observed.width * observed.height) as usize
    {
        return Err(FieldError::GridMismatch(format!(
            "{}x{} samples do not match stride {}",
            observed.width, observed.height, observed.grid.stride
        )));
    }
    Ok(())
}

fn residual_block(observed: &PerspectiveField, i: usize, model: Option<Vector3<f64>>) -> [f64; 3] {
    match model {
        Some(m) => [
            observed.up[i].x - m.x,
            observed.up[i].y - m.y,
            observed.latitude[i] - m.z,
        ],
        None => MODEL_INVALID_RESIDUAL,
    }
}

pub fn field_residual(
    observed: &PerspectiveField,
    cam: &CameraIntrinsics,
    g: &GravityState,
) -> Result<FieldResidual, FieldError> {
    check_sampling(observed, cam)?;
    let gv = g.vector();
    let blocks: Vec<Option<([f64; 3], f64)>> = (0..observed.len())
        .into_par_iter()
        .map(|i| {
            observed.valid[i].then(|| {
                let model = model_vector(cam, &gv, &observed.sample_pixel(i));
                (residual_block(observed, i, model), observed.weight(i))
            })
        })
        .collect();
    let mut out = FieldResidual {
        values: Vec::new(),
        weights: Vec::new(),
        samples: Vec::new(),
    };
    for (i, block) in blocks.into_iter().enumerate() {
        if let Some((r, w)) = block {
            out.values.extend_from_slice(&r);
            out.weights.extend_from_slice(&[w; 3]);
            out.samples.push(i);
        }
    }
    Ok(out)
}

/// Derivative of the model fields `(u_x, u_y, latitude)` at one sample with
/// respect to `(log f, distortion, delta_1, delta_2)`.
///
/// Gravity columns are analytic (differentiating through the tangent
/// retraction at `delta = 0`); intrinsic columns use central differences,
/// falling back to one-sided differences where a probe leaves the model's
/// domain.
fn model_derivative(
    cam: &CameraIntrinsics,
    g: &Vector3<f64>,
    basis: &(Vector3<f64>, Vector3<f64>),
    pixel: &PixelPoint,
    centre: &ModelSample,
) -> Matrix3x4<f64> {
    let mut d = Matrix3x4::zeros();
    let centre_vec = Vector3::new(centre.up.x, centre.up.y, centre.latitude);

    let mut probe = |col: usize, plus: CameraIntrinsics, minus: CameraIntrinsics, h: f64| {
        let p = model_vector(&plus, g, pixel);
        let m = model_vector(&minus, g, pixel);
        let column = match (p, m) {
            (Some(p), Some(m)) => (p - m) / (2.0 * h),
            (Some(p), None) => (p - centre_vec) / h,
            (None, Some(m)) => (centre_vec - m) / h,
            (None, None) => Vector3::zeros(),
        };
        d.set_column(col, &column);
    };
    let (f, k) = (cam.focal(), cam.distortion());
    probe(
        0,
        cam.with_params(f * LOG_FOCAL_STEP.exp(), k),
        cam.with_params(f * (-LOG_FOCAL_STEP).exp(), k),
        LOG_FOCAL_STEP,
    );
    if cam.model().has_distortion() {
        probe(
            1,
            cam.with_params(f, k + DISTORTION_STEP),
            cam.with_params(f, k - DISTORTION_STEP),
            DISTORTION_STEP,
        );
    }

    // d up / d g = (I - u u^T) J / |J g|
    let u = centre.up;
    let proj = nalgebra::Matrix2::identity() - u * u.transpose();
    let dup_dg = proj * centre.jacobian / centre.jg.norm();
    // d lat / d g = v / sqrt(1 - (v.g)^2)
    let s = centre.ray.dot(g).clamp(-1.0, 1.0);
    let dlat_dg = centre.ray / (1.0 - s * s).max(1e-300).sqrt();
    for (col, b) in [(2, &basis.0), (3, &basis.1)] {
        let du = dup_dg * b;
        d[(0, col)] = du.x;
        d[(1, col)] = du.y;
        d[(2, col)] = dlat_dg.dot(b);
    }
    d
}

/// Residual Jacobian over a full render grid.
#[derive(Clone, Debug)]
pub struct FieldJacobian {
    /// `3 * samples` rows by [`JACOBIAN_COLS`] columns; rows of invalid samples are zero.
    pub matrix: DMatrix<f64>,
    pub valid: Vec<bool>,
}

/// Jacobian of `observed - model` with respect to `(log f, distortion,
/// delta_1, delta_2)` for every sample of `grid`. The distortion column is
/// zero for pinhole cameras.
pub fn field_jacobian(
    cam: &CameraIntrinsics,
    g: &GravityState,
    grid: &GridSpec,
) -> Result<FieldJacobian, FieldError> {
    grid.validate(cam.width(), cam.height())?;
    let (cols, rows) = grid.dims(cam.width(), cam.height());
    let gv = g.vector();
    let basis = tangent_basis(g);
    let blocks: Vec<Option<Matrix3x4<f64>>> = (0..cols * rows)
        .into_par_iter()
        .map(|i| {
            let pixel = grid.pixel(i % cols, i / cols);
            evaluate(cam, &gv, &pixel, Domain::Extended).map(|s| -model_derivative(cam, &gv, &basis, &pixel, &s))
        })
        .collect();
    let n = blocks.len();
    let mut matrix = DMatrix::zeros(RESIDUAL_DIM * n, JACOBIAN_COLS);
    let mut valid = vec![false; n];
    for (i, block) in blocks.into_iter().enumerate() {
        if let Some(b) = block {
            matrix.view_mut((RESIDUAL_DIM * i, 0), (RESIDUAL_DIM, JACOBIAN_COLS)).copy_from(&b);
            valid[i] = true;
        }
    }
    Ok(FieldJacobian { matrix, valid })
}

/// One usable sample of a linearized view: residual block, confidence and
/// (optionally) the residual Jacobian block.
#[derive(Clone, Debug)]
pub(crate) struct LinearizedSample {
    pub residual: Vector3<f64>,
    pub weight: f64,
    pub jacobian: Matrix3x4<f64>,
}

/// Residuals (and Jacobian blocks) over the usable samples of `observed`,
/// in sample order. Zero-weight samples are skipped entirely.
pub(crate) fn linearize_view(
    observed: &PerspectiveField,
    cam: &CameraIntrinsics,
    g: &GravityState,
    with_jacobian: bool,
) -> Result<Vec<LinearizedSample>, FieldError> {
    check_sampling(observed, cam)?;
    let gv = g.vector();
    let basis = tangent_basis(g);
    let samples: Vec<Option<LinearizedSample>> = (0..observed.len())
        .into_par_iter()
        .map(|i| {
            if !observed.is_usable(i) {
                return None;
            }
            let pixel = observed.sample_pixel(i);
            let centre = evaluate(cam, &gv, &pixel, Domain::Extended);
            let model = centre.as_ref().map(|s| Vector3::new(s.up.x, s.up.y, s.latitude));
            let residual = Vector3::from(residual_block(observed, i, model));
            let jacobian = match (&centre, with_jacobian) {
                (Some(s), true) => -model_derivative(cam, &gv, &basis, &pixel, s),
                _ => Matrix3x4::zeros(),
            };
            Some(LinearizedSample {
                residual,
                weight: observed.weight(i),
                jacobian,
            })
        })
        .collect();
    Ok(samples.into_iter().flatten().collect())
}

/// Usable observed samples that `cam` cannot model (unprojectable or with a
/// degenerate up vector).
pub(crate) fn model_invalid_count(observed: &PerspectiveField, cam: &CameraIntrinsics, g: &GravityState) -> usize {
    let gv = g.vector();
    (0..observed.len())
        .filter(|&i| observed.is_usable(i) && evaluate(cam, &gv, &observed.sample_pixel(i), Domain::Extended).is_none())
        .count()
}
