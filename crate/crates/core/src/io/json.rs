use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{file_error, IoError};
use crate::camera::{CameraIntrinsics, CameraModel};
use crate::gravity::GravityState;
use crate::solver::{CalibrationEstimate, IntrinsicsEstimate};

/// Principal point tolerance when reading camera JSON.
const CENTER_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraJson {
    pub model: CameraModel,
    pub width: u32,
    pub height: u32,
    pub f_px: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
}

impl From<&CameraIntrinsics> for CameraJson {
    fn from(cam: &CameraIntrinsics) -> Self {
        Self {
            model: cam.model(),
            width: cam.width(),
            height: cam.height(),
            f_px: cam.focal(),
            cx: cam.cx(),
            cy: cam.cy(),
            k1: cam.k1(),
            xi: cam.xi(),
        }
    }
}

impl CameraJson {
    pub fn to_intrinsics(&self) -> Result<CameraIntrinsics, IoError> {
        let distortion = match self.model {
            CameraModel::Pinhole => 0.0,
            CameraModel::SimpleRadial => self.k1.ok_or_else(|| IoError::Invalid("simple_radial camera needs k1".into()))?,
            CameraModel::Ucm => self.xi.ok_or_else(|| IoError::Invalid("ucm camera needs xi".into()))?,
        };
        let cam = CameraIntrinsics::new(self.model, self.width, self.height, self.f_px, distortion)
            .map_err(|e| IoError::Invalid(e.to_string()))?;
        if (cam.cx() - self.cx).abs() > CENTER_TOL || (cam.cy() - self.cy).abs() > CENTER_TOL {
            return Err(IoError::Invalid(format!(
                "principal point ({}, {}) is not the image center",
                self.cx, self.cy
            )));
        }
        Ok(cam)
    }
}

/// One camera for all views, or one per view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntrinsicsJson {
    Shared(CameraJson),
    PerView(Vec<CameraJson>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewJson {
    pub g: [f64; 3],
    pub roll_deg: f64,
    pub pitch_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rms: Option<f64>,
}

impl ViewJson {
    pub fn from_gravity(g: &GravityState, rms: Option<f64>) -> Self {
        let v = g.vector();
        let (roll, pitch) = g.angles();
        Self {
            g: [v.x, v.y, v.z],
            roll_deg: roll.to_degrees(),
            pitch_deg: pitch.to_degrees(),
            rms,
        }
    }

    pub fn gravity(&self) -> Result<GravityState, IoError> {
        GravityState::from_unit(self.g.into()).map_err(|e| IoError::Invalid(e.to_string()))
    }
}

/// Calibration result, or ground truth when the solver fields are absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultJson {
    pub intrinsics: IntrinsicsJson,
    pub views: Vec<ViewJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_cost: Option<f64>,
}

impl ResultJson {
    pub fn from_estimate(est: &CalibrationEstimate) -> Self {
        let intrinsics = match &est.intrinsics {
            IntrinsicsEstimate::Shared(c) => IntrinsicsJson::Shared(c.into()),
            IntrinsicsEstimate::PerView(v) => IntrinsicsJson::PerView(v.iter().map(CameraJson::from).collect()),
        };
        Self {
            intrinsics,
            views: est
                .gravities
                .iter()
                .zip(&est.per_view_rms)
                .map(|(g, &rms)| ViewJson::from_gravity(g, Some(rms)))
                .collect(),
            converged: Some(est.converged),
            iterations: Some(est.iterations),
            final_cost: Some(est.final_cost),
        }
    }

    pub fn ground_truth(cam: &CameraIntrinsics, gravities: &[GravityState]) -> Self {
        Self {
            intrinsics: IntrinsicsJson::Shared(cam.into()),
            views: gravities.iter().map(|g| ViewJson::from_gravity(g, None)).collect(),
            converged: None,
            iterations: None,
            final_cost: None,
        }
    }

    /// Intrinsics per view.
    pub fn cameras(&self) -> Result<Vec<CameraIntrinsics>, IoError> {
        match &self.intrinsics {
            IntrinsicsJson::Shared(c) => Ok(vec![c.to_intrinsics()?; self.views.len()]),
            IntrinsicsJson::PerView(v) => {
                if v.len() != self.views.len() {
                    return Err(IoError::Invalid(format!(
                        "{} intrinsics records for {} views",
                        v.len(),
                        self.views.len()
                    )));
                }
                v.iter().map(CameraJson::to_intrinsics).collect()
            }
        }
    }

    pub fn gravities(&self) -> Result<Vec<GravityState>, IoError> {
        self.views.iter().map(ViewJson::gravity).collect()
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(file_error(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(file_error(path))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_camera(path: &Path, cam: &CameraIntrinsics) -> Result<(), IoError> {
    write_json(path, &CameraJson::from(cam))
}

pub fn read_camera(path: &Path) -> Result<CameraIntrinsics, IoError> {
    read_json::<CameraJson>(path)?.to_intrinsics()
}

pub fn write_result(path: &Path, result: &ResultJson) -> Result<(), IoError> {
    write_json(path, result)
}

pub fn read_result(path: &Path) -> Result<ResultJson, IoError> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gravity::gravity_from_angles;

    #[test]
    fn camera_json_shape() {
        let cam = CameraIntrinsics::new(CameraModel::Ucm, 640, 480, 300.0, 1.25).unwrap();
        let v = serde_json::to_value(CameraJson::from(&cam)).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"model": "ucm", "width": 640, "height": 480, "f_px": 300.0, "cx": 320.0, "cy": 240.0, "xi": 1.25})
        );
        let back: CameraJson = serde_json::from_value(v).unwrap();
        assert_eq!(back.to_intrinsics().unwrap(), cam);
    }

    #[test]
    fn off_center_principal_point_is_rejected() {
        let mut j = CameraJson::from(&CameraIntrinsics::pinhole(100, 100, 50.0).unwrap());
        j.cx = 40.0;
        assert!(j.to_intrinsics().is_err());
    }

    #[test]
    fn result_round_trip() {
        let cam = CameraIntrinsics::pinhole(100, 80, 50.0).unwrap();
        let gs = vec![gravity_from_angles(0.1, 1.2).unwrap(), gravity_from_angles(-0.2, 0.9).unwrap()];
        let r = ResultJson::ground_truth(&cam, &gs);
        let text = serde_json::to_string(&r).unwrap();
        let back: ResultJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.cameras().unwrap(), vec![cam, cam]);
        let g = back.gravities().unwrap();
        assert!((g[1].vector() - gs[1].vector()).norm() < 1e-15);
    }
}
