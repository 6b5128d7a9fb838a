//! Camera trajectories: resampling, matching and rotation augmentation.

use std::f64::consts::PI;

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use thiserror::Error;

use super::scene::camera_rotation;
use super::umeyama::{umeyama_align, AlignMode, SimilarityTransform};

const QUATERNION_UNIT_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("trajectory needs at least {need} poses, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("timestamps must increase strictly (pose {0})")]
    NonIncreasing(usize),
    #[error("pose {index}: quaternion norm {norm} is not unit")]
    NotUnit { index: usize, norm: f64 },
    #[error("pose {0}: non-finite value")]
    NonFinite(usize),
    #[error("asked for top {k} of {available} candidates")]
    TooManyRequested { k: usize, available: usize },
}

/// World-to-camera pose at time `t` (seconds).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub t: f64,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    /// Camera center in world coordinates.
    pub fn position(&self) -> Vector3<f64> {
        -(self.rotation.inverse() * self.translation)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    poses: Vec<Pose>,
}

impl Trajectory {
    pub fn new(poses: Vec<Pose>) -> Result<Self, TrajectoryError> {
        if poses.is_empty() {
            return Err(TrajectoryError::TooShort { need: 1, got: 0 });
        }
        for (i, p) in poses.iter().enumerate() {
            let finite = p.t.is_finite()
                && p.translation.iter().all(|v| v.is_finite())
                && p.rotation.coords.iter().all(|v| v.is_finite());
            if !finite {
                return Err(TrajectoryError::NonFinite(i));
            }
            let norm = p.rotation.coords.norm();
            if (norm - 1.0).abs() > QUATERNION_UNIT_TOL {
                return Err(TrajectoryError::NotUnit { index: i, norm });
            }
            if i > 0 && !(p.t > poses[i - 1].t) {
                return Err(TrajectoryError::NonIncreasing(i));
            }
        }
        Ok(Self { poses })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.poses.iter().map(Pose::position).collect()
    }

    /// Pose at time `t`, clamped to the covered interval. Translation is
    /// interpolated linearly and rotation by slerp.
    pub fn interpolate(&self, t: f64) -> Pose {
        let last = self.poses.len() - 1;
        if t <= self.poses[0].t {
            return Pose { t, ..self.poses[0] };
        }
        if t >= self.poses[last].t {
            return Pose { t, ..self.poses[last] };
        }
        let j = self.poses.partition_point(|p| p.t <= t);
        let (a, b) = (&self.poses[j - 1], &self.poses[j]);
        let s = (t - a.t) / (b.t - a.t);
        Pose {
            t,
            rotation: slerp(&a.rotation, &b.rotation, s),
            translation: a.translation.lerp(&b.translation, s),
        }
    }

    /// `n` poses evenly spaced over the covered interval.
    pub fn resample(&self, n: usize) -> Result<Trajectory, TrajectoryError> {
        if n < 2 || self.poses.len() < 2 {
            return Err(TrajectoryError::TooShort {
                need: 2,
                got: n.min(self.poses.len()),
            });
        }
        let (t0, t1) = (self.poses[0].t, self.poses[self.poses.len() - 1].t);
        let poses = (0..n)
            .map(|i| self.interpolate(t0 + (t1 - t0) * i as f64 / (n - 1) as f64))
            .collect();
        Trajectory::new(poses)
    }

    /// Same poses with timestamps replaced by `i / fps`.
    pub fn retimed(&self, fps: f64) -> Trajectory {
        let poses = self
            .poses
            .iter()
            .enumerate()
            .map(|(i, p)| Pose { t: i as f64 / fps, ..*p })
            .collect();
        Trajectory { poses }
    }
}

/// Shortest-arc slerp; falls back to normalized lerp for (anti)parallel inputs.
fn slerp(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, s: f64) -> UnitQuaternion<f64> {
    let b = if a.coords.dot(&b.coords) < 0.0 {
        UnitQuaternion::new_unchecked(-b.into_inner())
    } else {
        *b
    };
    a.try_slerp(&b, s, 1e-12)
        .unwrap_or_else(|| UnitQuaternion::new_normalize(a.into_inner().lerp(&b.into_inner(), s)))
}

/// One matched candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryMatch {
    pub index: usize,
    pub transform: SimilarityTransform,
}

/// Ranks candidates by the rmse of a yaw-and-scale alignment of their camera
/// centers onto the target's, after resampling each candidate to the
/// target's pose count when the counts differ. Candidates that cannot be
/// aligned are skipped; ties keep index order.
pub fn match_trajectories(
    candidates: &[Trajectory],
    target: &Trajectory,
    k: usize,
) -> Result<Vec<TrajectoryMatch>, TrajectoryError> {
    if k > candidates.len() {
        return Err(TrajectoryError::TooManyRequested {
            k,
            available: candidates.len(),
        });
    }
    let dst = target.positions();
    let mut matches: Vec<TrajectoryMatch> = candidates
        .iter()
        .enumerate()
        .filter_map(|(index, c)| {
            let src = if c.len() == dst.len() {
                c.positions()
            } else {
                c.resample(dst.len()).ok()?.positions()
            };
            let transform = umeyama_align(&src, &dst, AlignMode::YawScale).ok()?;
            Some(TrajectoryMatch { index, transform })
        })
        .collect();
    matches.sort_by(|a, b| a.transform.rmse.total_cmp(&b.transform.rmse).then(a.index.cmp(&b.index)));
    matches.truncate(k);
    Ok(matches)
}

/// Camera-frame rotation offset: yaw about the camera `y` axis, pitch about
/// `x` and roll about `z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationOffset {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl RotationOffset {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let tilt = PI / 4.0;
        Self {
            yaw: rng.random_range(-PI..=PI),
            pitch: rng.random_range(-tilt..=tilt),
            roll: rng.random_range(-tilt..=tilt),
        }
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.roll)
            * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.pitch)
            * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), self.yaw)
    }
}

/// Applies a per-pose camera-frame offset `O_i * R_i` (translations follow).
pub fn apply_offsets(traj: &Trajectory, offsets: &[UnitQuaternion<f64>]) -> Trajectory {
    let poses = traj
        .poses
        .iter()
        .zip(offsets)
        .map(|(p, o)| Pose {
            t: p.t,
            rotation: o * p.rotation,
            translation: o * p.translation,
        })
        .collect();
    Trajectory { poses }
}

/// Two augmented copies of `traj`: one with a constant offset and one whose
/// offset slerps between two sampled offsets over the normalized frame index.
pub fn augment_rotations<R: Rng + ?Sized>(
    traj: &Trajectory,
    rng: &mut R,
) -> Result<(Trajectory, Trajectory), TrajectoryError> {
    let a = RotationOffset::sample(rng);
    let b0 = RotationOffset::sample(rng);
    let b1 = RotationOffset::sample(rng);
    augment_with_offsets(traj, &a, &b0, &b1)
}

/// [`augment_rotations`] with given offsets.
pub fn augment_with_offsets(
    traj: &Trajectory,
    constant: &RotationOffset,
    start: &RotationOffset,
    end: &RotationOffset,
) -> Result<(Trajectory, Trajectory), TrajectoryError> {
    let n = traj.len();
    if n < 2 {
        return Err(TrajectoryError::TooShort { need: 2, got: n });
    }
    let a = constant.quaternion();
    let (b0, b1) = (start.quaternion(), end.quaternion());
    let ramp: Vec<_> = (0..n).map(|i| slerp(&b0, &b1, i as f64 / (n - 1) as f64)).collect();
    Ok((apply_offsets(traj, &vec![a; n]), apply_offsets(traj, &ramp)))
}

/// A smooth synthetic walk: the camera circles at walking height while
/// panning, for use when no trajectory file is given.
pub fn synthetic_trajectory(n: usize, fps: f64, radius: f64) -> Trajectory {
    let poses = (0..n)
        .map(|i| {
            let s = i as f64 / (n.max(2) - 1) as f64;
            let angle = s * PI / 2.0;
            let center = Vector3::new(radius * angle.cos(), radius * angle.sin(), 1.6);
            let r = camera_rotation(angle + PI / 2.0, 0.1 * (2.0 * PI * s).sin(), 0.0);
            let rotation = UnitQuaternion::from_matrix(&r);
            Pose {
                t: i as f64 / fps,
                rotation,
                translation: -(rotation * center),
            }
        })
        .collect();
    Trajectory { poses }
}
