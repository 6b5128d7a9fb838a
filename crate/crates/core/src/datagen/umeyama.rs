//! Closed-form similarity alignment of point sets.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error("point sets differ in length ({src} vs {dst})")]
    LengthMismatch { src: usize, dst: usize },
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("source points are degenerate for this alignment mode")]
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignMode {
    /// Unconstrained rotation.
    Full,
    /// Rotation about world `+Z` only.
    YawScale,
}

/// `dst ~ s * R * src + t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimilarityTransform {
    pub s: f64,
    pub rotation: Matrix3<f64>,
    pub t: Vector3<f64>,
    pub rmse: f64,
}

impl SimilarityTransform {
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p * self.s + self.t
    }
}

const DEGENERATE_TOL: f64 = 1e-12;

fn mean(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().sum::<Vector3<f64>>() / points.len() as f64
}

pub fn umeyama_align(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
    mode: AlignMode,
) -> Result<SimilarityTransform, AlignError> {
    if src.len() != dst.len() {
        return Err(AlignError::LengthMismatch {
            src: src.len(),
            dst: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(AlignError::TooFewPoints(src.len()));
    }
    let n = src.len() as f64;
    let (ms, md) = (mean(src), mean(dst));
    let cs: Vec<Vector3<f64>> = src.iter().map(|p| p - ms).collect();
    let cd: Vec<Vector3<f64>> = dst.iter().map(|p| p - md).collect();
    let var_s = cs.iter().map(|p| p.norm_squared()).sum::<f64>() / n;
    let scale_ref = var_s.max(cd.iter().map(|p| p.norm_squared()).sum::<f64>() / n).max(1.0);

    let (rotation, s) = match mode {
        AlignMode::Full => {
            let cov_s = cs.iter().map(|p| p * p.transpose()).sum::<Matrix3<f64>>() / n;
            let sv = cov_s.singular_values();
            let mut sorted = [sv[0], sv[1], sv[2]];
            sorted.sort_by(|a, b| b.total_cmp(a));
            if sorted[1] <= DEGENERATE_TOL * scale_ref {
                return Err(AlignError::Degenerate);
            }
            let sigma = cs.iter().zip(&cd).map(|(s, d)| d * s.transpose()).sum::<Matrix3<f64>>() / n;
            let svd = sigma.svd(true, true);
            let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
            let mut sign = Matrix3::identity();
            if (u.determinant() * vt.determinant()) < 0.0 {
                // Flip the axis of the smallest singular value.
                let k = (0..3).min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b])).unwrap();
                sign[(k, k)] = -1.0;
            }
            let r = u * sign * vt;
            let trace: f64 = (0..3).map(|i| svd.singular_values[i] * sign[(i, i)]).sum();
            (r, trace / var_s)
        }
        AlignMode::YawScale => {
            let horizontal: f64 = cs.iter().map(|p| p.x * p.x + p.y * p.y).sum::<f64>() / n;
            if horizontal <= DEGENERATE_TOL * scale_ref {
                return Err(AlignError::Degenerate);
            }
            let (mut cross, mut dot) = (0.0, 0.0);
            for (s, d) in cs.iter().zip(&cd) {
                cross += s.x * d.y - s.y * d.x;
                dot += s.x * d.x + s.y * d.y;
            }
            let (sin, cos) = cross.atan2(dot).sin_cos();
            let r = Matrix3::new(cos, -sin, 0.0, sin, cos, 0.0, 0.0, 0.0, 1.0);
            let num: f64 = cs.iter().zip(&cd).map(|(s, d)| d.dot(&(r * s))).sum();
            let den: f64 = cs.iter().map(|p| p.dot(p)).sum();
            (r, num / den)
        }
    };
    if !(s > 0.0 && s.is_finite()) {
        return Err(AlignError::Degenerate);
    }
    let t = md - rotation * ms * s;
    let mut tf = SimilarityTransform { s, rotation, t, rmse: 0.0 };
    tf.rmse = (src.iter().zip(dst).map(|(p, q)| (q - tf.apply(p)).norm_squared()).sum::<f64>() / n).sqrt();
    Ok(tf)
}
