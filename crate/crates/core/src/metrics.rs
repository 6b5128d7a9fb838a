//! Evaluation metrics: parameter errors, recall-curve AUC and field errors.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::camera::{CameraError, CameraIntrinsics};
use crate::field::{render_fields, FieldError, GridSpec};
use crate::gravity::GravityState;

pub const ANGLE_THRESHOLDS_DEG: [f64; 3] = [1.0, 5.0, 10.0];
pub const RELATIVE_THRESHOLDS: [f64; 3] = [0.05, 0.10, 0.20];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("no errors to aggregate")]
    Empty,
    #[error("threshold {0} must be positive")]
    Threshold(f64),
    #[error("error value {0} is not a finite non-negative number")]
    BadError(f64),
    #[error("image sizes differ: {0:?} vs {1:?}")]
    SizeMismatch((u32, u32), (u32, u32)),
    #[error("no pixel is valid under both cameras")]
    NoCommonPixels,
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Normalized area under the recall curve up to `tau`:
/// `(1 / (n tau)) * sum(max(0, tau - e_i))`.
pub fn auc_at(errors: &[f64], tau: f64) -> Result<f64, MetricError> {
    if errors.is_empty() {
        return Err(MetricError::Empty);
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(MetricError::Threshold(tau));
    }
    let mut sum = 0.0;
    for &e in errors {
        if !(e.is_finite() && e >= 0.0) {
            return Err(MetricError::BadError(e));
        }
        sum += (tau - e).max(0.0);
    }
    Ok(sum / (errors.len() as f64 * tau))
}

/// Absolute angle difference wrapped to `[0, 180]` degrees.
pub fn wrapped_angle_diff_deg(a_rad: f64, b_rad: f64) -> f64 {
    let d = (a_rad - b_rad).to_degrees().abs() % 360.0;
    d.min(360.0 - d)
}

/// Errors of one predicted view against ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorSample {
    pub roll_err: f64,
    pub pitch_err: f64,
    pub vfov_err: f64,
    pub focal_rel_err: f64,
    /// Mean angle between up vectors (radians).
    pub up_field_err: f64,
    /// Mean absolute latitude difference (radians).
    pub lat_field_err: f64,
    /// `|k1_pred - k1_gt|` or `|xi_pred - xi_gt|`; 0 for pinhole pairs.
    pub distortion_err: f64,
    /// Mean pixel displacement between the two cameras over the image
    /// diagonal; see [`pixel_projection_error`].
    pub projection_err: f64,
}

pub fn error_sample(
    pred_cam: &CameraIntrinsics,
    pred_g: &GravityState,
    gt_cam: &CameraIntrinsics,
    gt_g: &GravityState,
) -> Result<ErrorSample, MetricError> {
    let size = |c: &CameraIntrinsics| (c.width(), c.height());
    if size(pred_cam) != size(gt_cam) {
        return Err(MetricError::SizeMismatch(size(pred_cam), size(gt_cam)));
    }
    let (pr, pp) = pred_g.angles();
    let (gr, gp) = gt_g.angles();
    let grid = GridSpec::for_image(gt_cam.width(), gt_cam.height());
    let pf = render_fields(pred_cam, pred_g, &grid)?;
    let gf = render_fields(gt_cam, gt_g, &grid)?;
    let (mut up, mut lat, mut n) = (0.0, 0.0, 0usize);
    for i in (0..gf.len()).filter(|&i| pf.valid[i] && gf.valid[i]) {
        up += pf.up[i].dot(&gf.up[i]).clamp(-1.0, 1.0).acos();
        lat += (pf.latitude[i] - gf.latitude[i]).abs();
        n += 1;
    }
    if n == 0 {
        return Err(MetricError::NoCommonPixels);
    }
    Ok(ErrorSample {
        roll_err: wrapped_angle_diff_deg(pr, gr),
        pitch_err: wrapped_angle_diff_deg(pp, gp),
        vfov_err: (pred_cam.vfov()? - gt_cam.vfov()?).abs(),
        focal_rel_err: (pred_cam.focal() - gt_cam.focal()).abs() / gt_cam.focal(),
        up_field_err: up / n as f64,
        lat_field_err: lat / n as f64,
        distortion_err: (pred_cam.distortion() - gt_cam.distortion()).abs(),
        projection_err: pixel_projection_error(pred_cam, gt_cam)?.mean,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionError {
    /// Per-pixel displacement divided by the image diagonal.
    pub errors: Vec<f64>,
    pub mean: f64,
    /// Recall AUC at 5, 10 and 20 % of the diagonal.
    pub auc: [f64; 3],
}

/// Unprojects a grid of pixels with `gt`, reprojects with `pred` and reports
/// the displacement relative to the image diagonal. Pixels invalid under
/// either camera are skipped.
pub fn pixel_projection_error(pred: &CameraIntrinsics, gt: &CameraIntrinsics) -> Result<ProjectionError, MetricError> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(MetricError::SizeMismatch((pred.width(), pred.height()), (gt.width(), gt.height())));
    }
    let diag = (gt.width() as f64).hypot(gt.height() as f64);
    let grid = GridSpec::for_image(gt.width(), gt.height());
    let (w, h) = grid.dims(gt.width(), gt.height());
    let mut errors = Vec::new();
    for row in 0..h {
        for col in 0..w {
            let p = grid.pixel(col, row);
            let Ok(ray) = gt.unproject(&p) else { continue };
            if let Some(q) = pred.project(&ray) {
                errors.push((q - p).norm() / diag);
            }
        }
    }
    if errors.is_empty() {
        return Err(MetricError::NoCommonPixels);
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let auc = [
        auc_at(&errors, RELATIVE_THRESHOLDS[0])?,
        auc_at(&errors, RELATIVE_THRESHOLDS[1])?,
        auc_at(&errors, RELATIVE_THRESHOLDS[2])?,
    ];
    Ok(ProjectionError { errors, mean, auc })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricSummary {
    pub name: String,
    pub unit: String,
    pub mean: f64,
    pub median: f64,
    pub thresholds: Vec<f64>,
    pub auc: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub count: usize,
    pub metrics: Vec<MetricSummary>,
}

fn summarize(name: &str, unit: &str, values: &[f64], thresholds: &[f64]) -> Result<MetricSummary, MetricError> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Ok(MetricSummary {
        name: name.to_string(),
        unit: unit.to_string(),
        mean: sorted.iter().sum::<f64>() / n as f64,
        median,
        thresholds: thresholds.to_vec(),
        auc: thresholds.iter().map(|&t| auc_at(&sorted, t)).collect::<Result<_, _>>()?,
    })
}

/// Mean, median and AUC per metric. Values are sorted before aggregation,
/// so the report does not depend on sample order.
pub fn report(samples: &[ErrorSample]) -> Result<MetricReport, MetricError> {
    if samples.is_empty() {
        return Err(MetricError::Empty);
    }
    let col = |f: fn(&ErrorSample) -> f64| samples.iter().map(f).collect::<Vec<_>>();
    let deg = &ANGLE_THRESHOLDS_DEG;
    let metrics = vec![
        summarize("roll", "deg", &col(|s| s.roll_err), deg)?,
        summarize("pitch", "deg", &col(|s| s.pitch_err), deg)?,
        summarize("vfov", "deg", &col(|s| s.vfov_err), deg)?,
        summarize("focal_rel", "ratio", &col(|s| s.focal_rel_err), &RELATIVE_THRESHOLDS)?,
        summarize("up_field", "deg", &col(|s| s.up_field_err.to_degrees()), deg)?,
        summarize("lat_field", "deg", &col(|s| s.lat_field_err.to_degrees()), deg)?,
        summarize("projection", "diag", &col(|s| s.projection_err), &RELATIVE_THRESHOLDS)?,
        summarize("distortion", "abs", &col(|s| s.distortion_err), &RELATIVE_THRESHOLDS)?,
    ];
    Ok(MetricReport {
        count: samples.len(),
        metrics,
    })
}

impl MetricReport {
    /// Fixed-width table: metric, mean, median, then the three AUC columns.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:>10} {:>10} {:>8} {:>8} {:>8}  thresholds",
            "metric", "mean", "med.", "AUC1", "AUC2", "AUC3"
        );
        for m in &self.metrics {
            let t: Vec<String> = m.thresholds.iter().map(|t| format!("{t}")).collect();
            let _ = writeln!(
                out,
                "{:<12} {:>10.4} {:>10.4} {:>8.2} {:>8.2} {:>8.2}  {} {}",
                m.name,
                m.mean,
                m.median,
                100.0 * m.auc[0],
                100.0 * m.auc[1],
                100.0 * m.auc[2],
                t.join("/"),
                m.unit
            );
        }
        let _ = writeln!(out, "samples: {}", self.count);
        out
    }
}
