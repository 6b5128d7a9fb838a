//! Trajectory CSV with header `t,qw,qx,qy,qz,tx,ty,tz` (world-to-camera).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{file_error, IoError};
use crate::datagen::{Pose, Trajectory};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    t: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
    tx: f64,
    ty: f64,
    tz: f64,
}

/// Reads poses; quaternion norms are checked, not corrected.
pub fn read_trajectory<R: Read>(r: R) -> Result<Trajectory, IoError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut poses = Vec::new();
    for row in reader.deserialize() {
        let row: Row = row?;
        poses.push(Pose {
            t: row.t,
            rotation: UnitQuaternion::new_unchecked(Quaternion::new(row.qw, row.qx, row.qy, row.qz)),
            translation: Vector3::new(row.tx, row.ty, row.tz),
        });
    }
    Trajectory::new(poses).map_err(|e| IoError::Invalid(e.to_string()))
}

pub fn write_trajectory<W: Write>(w: W, traj: &Trajectory) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_writer(w);
    for p in traj.poses() {
        let q = p.rotation.quaternion();
        writer.serialize(Row {
            t: p.t,
            qw: q.w,
            qx: q.i,
            qy: q.j,
            qz: q.k,
            tx: p.translation.x,
            ty: p.translation.y,
            tz: p.translation.z,
        })?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_trajectory_file(path: &Path) -> Result<Trajectory, IoError> {
    read_trajectory(File::open(path).map_err(file_error(path))?)
}

pub fn write_trajectory_file(path: &Path, traj: &Trajectory) -> Result<(), IoError> {
    write_trajectory(File::create(path).map_err(file_error(path))?, traj)
}
